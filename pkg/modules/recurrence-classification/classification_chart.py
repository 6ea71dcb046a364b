"""
classification_chart.py
=======================
Generates an Altair line chart of the classification sequence i * P(nu > i)
against log i (i = 2^10 .. 2^40) for the designed branching laws of the
standard examples, with a horizontal rule at the recurrence threshold
e^{-gamma}.

Encodings:
  - X-axis: log i
  - Y-axis: i * P(nu > i)
  - Color: family (legend carries the verdict)
  - Rule: e^{-gamma}, the boundary between positive recurrence and transience

Output:
  classification_sequences.html

Usage:
  PYTHONPATH=. python modules/recurrence-classification/classification_chart.py
"""

import altair as alt
import numpy as np
import pandas as pd

from lamperti.chain import classify
from lamperti.config import E_NEG_GAMMA
from lamperti.design import branching_law

print("Generating recurrence classification chart...")

# ──────────────────────────────────────────────
# Configuration
# ──────────────────────────────────────────────
FAMILIES = [
    ("geometric", {"p": 0.5}),
    ("sibuya", {"alpha": 0.5}),
    ("harmonic", {}),
    ("counting", {}),
    ("linear", {}),
]
# sequences above this are clipped so the threshold stays readable
Y_MAX = 2.0
OUTPUT_FILENAME = "classification_sequences.html"

# ──────────────────────────────────────────────
# Classify
# ──────────────────────────────────────────────
print("Classifying designed laws...")
frames = []
for name, params in FAMILIES:
    result = classify(branching_law(name, params))
    label = f"{name}-design: {result.verdict}"
    print(f"  {label} (L = {result.limit_estimate:.6g})")
    frames.append(pd.DataFrame({
        "family": label,
        "log_i": np.log(result.i_values),
        "i_tail": np.minimum(result.a_values, Y_MAX),
    }))

df = pd.concat(frames, ignore_index=True)
print(f"  Chart data: {len(df)} rows")

# ──────────────────────────────────────────────
# Create Chart
# ──────────────────────────────────────────────
print("\nCreating chart...")

lines = alt.Chart(df).mark_line(point=True).encode(
    x=alt.X("log_i", title="log i", type="quantitative"),
    y=alt.Y("i_tail", title="i P(nu > i)", type="quantitative", scale=alt.Scale(domain=[0, Y_MAX])),
    color=alt.Color("family", title="Designed law", type="nominal", scale=alt.Scale(scheme="category10")),
    tooltip=[
        alt.Tooltip("family", title="Family", type="nominal"),
        alt.Tooltip("log_i", format=".2f", title="log i", type="quantitative"),
        alt.Tooltip("i_tail", format=".6f", title="i P(nu > i)", type="quantitative"),
    ],
)

threshold = alt.Chart(pd.DataFrame({"y": [E_NEG_GAMMA]})).mark_rule(strokeDash=[6, 4], color="black").encode(
    y="y:Q",
    tooltip=[alt.Tooltip("y:Q", format=".6f", title="e^-gamma")],
)

chart = (lines + threshold).properties(
    title="Classification sequences of designed branching laws",
    width=720,
    height=420,
)

chart.save(OUTPUT_FILENAME)
print(f"  Saved: {OUTPUT_FILENAME}")

print("\n--- Done ---")
