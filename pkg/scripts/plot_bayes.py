"""Overlay prior and posterior densities from a bayes_density.csv file.

Usage: python3 scripts/plot_bayes.py out/bayes_density.csv
"""
import sys

import matplotlib.pyplot as plt
import numpy as np

from htemech.csvio import read_table

header, rows = read_table(sys.argv[1], "bayes_density")
p, prior, post = np.array(rows, dtype=float).T
plt.plot(p, prior, "--", label="prior")
plt.plot(p, post, label="posterior")
plt.xlabel("p")
plt.legend()
plt.savefig(sys.argv[1].replace(".csv", ".png"), dpi=150)
