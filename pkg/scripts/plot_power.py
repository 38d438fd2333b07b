"""Plot power against support share from a power.csv file.

Usage: python3 scripts/plot_power.py out/power.csv [n]
Needs matplotlib, which htemech itself does not depend on.
"""
import sys

import matplotlib.pyplot as plt

from htemech.csvio import read_table

path = sys.argv[1]
n = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
header, rows = read_table(path, "power")
rows = [dict(zip(header, r)) for r in rows]

fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
for ax, outcome in zip(axes, ("y1", "y2")):
    for est, style in (("linear", "-"), ("factor", "--")):
        sel = [r for r in rows if int(r["n"]) == n and r["outcome"] == outcome and r["estimator"] == est]
        for coef in sorted({r["coef"] for r in sel}):
            pts = sorted((float(r["q"]), float(r["power"])) for r in sel if r["coef"] == coef)
            ax.plot(*zip(*pts), style, label=f"{est} {coef}")
    ax.axhline(0.05, color="grey", lw=0.5)
    ax.set_title(f"{outcome}, n={n}")
    ax.set_xlabel("support share q")
axes[0].set_ylabel("rejection rate")
axes[1].legend(fontsize=7)
fig.tight_layout()
fig.savefig(path.replace(".csv", f"_n{n}.png"), dpi=150)
