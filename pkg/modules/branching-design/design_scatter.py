"""
design_scatter.py
=================
Generates a grid of scatter plots comparing the designed branching cdf F(j)
with the target cdf F_inf(j) for several target families.

Encodings:
  - X-axis: state j (log scale)
  - Y-axis: cumulative probability
  - Filled markers: designed F(j)
  - Hollow markers: target F_inf(j)
  - Text box: max |F_series - F_bisection| when the series route applies

Output:
  images/branching_design_scatter.png

Usage:
  PYTHONPATH=. python modules/branching-design/design_scatter.py
"""

import os
import traceback

import matplotlib.pyplot as plt
import numpy as np

from lamperti.design import design_branching
from lamperti.errors import LampertiError
from lamperti.laws import make_target

print("Generating branching design scatter plot...")

# ──────────────────────────────────────────────
# Configuration
# ──────────────────────────────────────────────
J_MAX = 40
FAMILIES = [
    ("geometric", {"p": 0.3}, "both"),
    ("sibuya", {"alpha": 0.5}, "bisection"),
    ("poisson-positive", {"lam": 0.8}, "both"),
    ("pareto", {"alpha": 1.5}, "bisection"),
]
DESIGN_COLOR = "#1f77b4"
TARGET_COLOR = "#ff7f0e"
OUTPUT_FILENAME = os.path.join("images", "branching_design_scatter.png")

# ──────────────────────────────────────────────
# Compute Designs
# ──────────────────────────────────────────────
print(f"Designing branching laws up to j={J_MAX}...")
tables = []
for name, params, method in FAMILIES:
    try:
        table = design_branching(make_target(name, params), J_MAX, method)
    except LampertiError as e:
        print(f"  Skipping {name}: {e}")
        continue
    tables.append((name, params, table))
    print(f"  {name}: F(1) = {table.F[0]:.6f}, F({table.N}) = {table.F[-1]:.6f}")

if not tables:
    print("ERROR: no design could be computed.")
    exit()

# ──────────────────────────────────────────────
# Create Scatter Grid
# ──────────────────────────────────────────────
print("Creating plot...")
try:
    cols = 2
    rows = int(np.ceil(len(tables) / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(12, 4.5 * rows), squeeze=False)

    for ax, (name, params, table) in zip(axes.flat, tables):
        ax.scatter(table.j, table.F, s=28, color=DESIGN_COLOR, label="designed F(j)", zorder=3)
        ax.scatter(table.j, table.F_inf, s=28, facecolors="none", edgecolors=TARGET_COLOR,
                   label="target F_inf(j)", zorder=4)

        if table.discrepancy is not None:
            ax.text(0.97, 0.05, f"series vs bisection: {table.discrepancy:.1e}", transform=ax.transAxes,
                    ha="right", fontsize=9, bbox=dict(boxstyle="round", facecolor="white", alpha=0.8))

        label = ", ".join(f"{k}={v}" for k, v in params.items())
        ax.set_title(f"{name} ({label})", fontsize=12)
        ax.set_xscale("log")
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("j", fontsize=11)
        ax.set_ylabel("cumulative probability", fontsize=11)
        ax.grid(True, linestyle=":", alpha=0.6)
        ax.spines["top"].set_visible(False)
        ax.spines["right"].set_visible(False)
        ax.legend(loc="lower right" if table.discrepancy is None else "center right", fontsize=9)

    for ax in list(axes.flat)[len(tables):]:
        ax.set_visible(False)

    fig.suptitle("Designed branching cdf F against its target F_inf", fontsize=14)
    plt.tight_layout()

    # Save
    os.makedirs(os.path.dirname(OUTPUT_FILENAME), exist_ok=True)
    print(f"Saving to {OUTPUT_FILENAME}...")
    fig.savefig(OUTPUT_FILENAME, dpi=150)
    print(f"  Saved: {OUTPUT_FILENAME}")

except Exception as e:
    print(f"ERROR: {e}")
    print(traceback.format_exc())

print("\n--- Done ---")
