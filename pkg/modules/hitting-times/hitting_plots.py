"""
hitting_plots.py
================
Generates two interactive Plotly visualizations of hitting times of the top
state for geometric targets restricted to {1, ..., N}:

  1. Side-by-side log-scale line charts: separation distance sep(n) from
     delta_1 on the left, P(tau > n) from delta_1 and from pi on the right,
     one colour per truncation level N.

  2. Rescaled tail chart: P(tau_pi > x E(tau_pi)) against exp(-x), showing how
     close the stationary hitting time is to an exponential law.

Runs `lamperti hitting` for each N whose artifacts are not in REPORT_DIR yet,
then reads the hitting.csv / hitting_scalars.csv files it wrote.

Outputs:
  hitting_sep_and_tails.html
  hitting_exponential_scaling.html

Usage:
  PYTHONPATH=. python modules/hitting-times/hitting_plots.py
"""

import os

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from lamperti import cli

print("Generating hitting-time visualizations...")

# ──────────────────────────────────────────────
# Configuration
# ──────────────────────────────────────────────
REPORT_DIR = os.path.join("output", "hitting-times")
P_SUCCESS = 0.5
LEVELS = [8, 16, 32]
COLORS = {8: "#636EFA", 16: "#EF553B", 32: "#00CC96"}
SCALED_GRID = np.linspace(0.0, 5.0, 201)


def run_dir(N):
    return os.path.join(REPORT_DIR, f"geometric-N{N}")


def read_scalars(path):
    frame = pd.read_csv(path, comment="#")
    return dict(zip(frame["key"], frame["value"]))


# ──────────────────────────────────────────────
# Compute or Load Data
# ──────────────────────────────────────────────
print("Loading hitting-time artifacts...")
sequences, scalars = {}, {}
for N in LEVELS:
    out = run_dir(N)
    if not os.path.exists(os.path.join(out, "hitting.csv")):
        print(f"  Running lamperti hitting for N={N}...")
        code = cli.main(["hitting", "--family", "geometric", "--p", str(P_SUCCESS), "--N", str(N), "--out", out])
        if code != 0:
            print(f"ERROR: hitting run for N={N} exited with status {code}.")
            exit()
    sequences[N] = pd.read_csv(os.path.join(out, "hitting.csv"), comment="#")
    scalars[N] = read_scalars(os.path.join(out, "hitting_scalars.csv"))
    print(f"  N={N}: horizon {len(sequences[N]) - 1}, E(tau_pi) = {float(scalars[N]['mean_tau_piN']):.6g}")


# ──────────────────────────────────────────────
# Visualization 1: Separation and Tails
# ──────────────────────────────────────────────
print("\nCreating separation / tail chart...")

fig_tails = make_subplots(rows=1, cols=2, subplot_titles=("Separation distance from delta_1",
                                                          "P(tau > n) from delta_1 (solid) and pi (dotted)"))

for N in LEVELS:
    df = sequences[N]
    # sep hits exactly zero once T_(N) is certain; log axes drop those points
    df_sep = df[df["sep"] > 0]
    fig_tails.add_trace(
        go.Scatter(
            x=df_sep["n"],
            y=df_sep["sep"],
            name=f"N={N}",
            legendgroup=f"N={N}",
            line=dict(color=COLORS[N], width=2),
            mode="lines",
            hovertemplate=f"N={N}<br>n=%{{x}}<br>sep=%{{y:.3e}}<extra></extra>",
        ),
        row=1, col=1,
    )
    fig_tails.add_trace(
        go.Scatter(
            x=df["n"],
            y=df["tau_tail_pi0"],
            name=f"N={N} from delta_1",
            legendgroup=f"N={N}",
            showlegend=False,
            line=dict(color=COLORS[N], width=2),
            mode="lines",
        ),
        row=1, col=2,
    )
    fig_tails.add_trace(
        go.Scatter(
            x=df["n"],
            y=df["tau_tail_piN"],
            name=f"N={N} from pi",
            legendgroup=f"N={N}",
            showlegend=False,
            line=dict(color=COLORS[N], width=2, dash="dot"),
            mode="lines",
        ),
        row=1, col=2,
    )

fig_tails.update_layout(
    title={
        "text": f"Hitting the top state of the truncated geometric(p={P_SUCCESS}) chain",
        "x": 0.5,
        "xanchor": "center",
        "font": dict(size=18),
    },
    height=600,
    template="plotly_white",
    legend=dict(orientation="h", yanchor="bottom", y=1.08, xanchor="center", x=0.5),
    margin=dict(l=80, r=40, t=120, b=60),
)
fig_tails.update_xaxes(title_text="n")
fig_tails.update_yaxes(type="log", title_text="sep(n)", row=1, col=1)
fig_tails.update_yaxes(type="log", title_text="P(tau > n)", row=1, col=2)

output_tails = "hitting_sep_and_tails.html"
fig_tails.write_html(output_tails)
print(f"  Saved: {output_tails}")


# ──────────────────────────────────────────────
# Visualization 2: Exponential Scaling
# ──────────────────────────────────────────────
print("\nCreating exponential scaling chart...")

fig_scaled = go.Figure()
fig_scaled.add_trace(
    go.Scatter(
        x=SCALED_GRID,
        y=np.exp(-SCALED_GRID),
        name="exp(-x)",
        line=dict(color="black", width=2, dash="dash"),
        mode="lines",
    )
)

for N in LEVELS:
    df = sequences[N]
    mean = float(scalars[N]["mean_tau_piN"])
    n = np.floor(SCALED_GRID * mean).astype(int)
    tail = df["tau_tail_piN"].to_numpy()
    fig_scaled.add_trace(
        go.Scatter(
            x=SCALED_GRID,
            y=tail[np.minimum(n, tail.size - 1)],
            name=f"N={N}",
            line=dict(color=COLORS[N], width=2),
            mode="lines",
            hovertemplate=f"N={N}<br>x=%{{x:.2f}}<br>tail=%{{y:.4f}}<extra></extra>",
        )
    )

fig_scaled.update_layout(
    title={"text": "P(tau_pi > x E tau_pi) against the unit exponential", "x": 0.5, "xanchor": "center"},
    xaxis_title="x",
    yaxis_title="tail",
    height=600,
    template="plotly_white",
    hovermode="x unified",
)

output_scaled = "hitting_exponential_scaling.html"
fig_scaled.write_html(output_scaled)
print(f"  Saved: {output_scaled}")

print("\n--- Done ---")
