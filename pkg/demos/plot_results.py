"""Plot a results directory written by ``acc-lab run`` (needs matplotlib).

Usage: ``python plot_results.py results/vacancy_N32``
"""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

out = Path(sys.argv[1])
rows = [r for r in csv.DictReader((out / "table.csv").open()) if r["status"] == "ok"]
fig, ax = plt.subplots()
if "err_rel" in rows[0]:
    for hK in sorted({r["hK"] for r in rows}):
        sel = [r for r in rows if r["hK"] == hK]
        dof = np.array([float(r["dof"]) for r in sel])
        ax.loglog(dof, [float(r["err_rel"]) for r in sel], "o-", label=f"hK = {hK}")
        ax.loglog(dof, [float(r["err_model"]) for r in sel], "k--", lw=0.8)
    ax.set_xlabel("DoF")
    ax.set_ylabel("relative H1 error")
elif "diff" in rows[0]:
    ax.loglog([float(r["dof"]) for r in rows], [float(r["diff"]) for r in rows], "o-")
    ax.set_xlabel("DoF")
    ax.set_ylabel("|t_ac - t_a|")
else:
    s = np.array([float(r["s"]) for r in rows])
    t = np.array([float(r["t"]) for r in rows])
    ax.scatter(s, t, c=[r["stable_coupled"] == "True" for r in rows], cmap="coolwarm", marker="s", s=80)
    ax.scatter(s, t, c=[r["stable_atomistic"] == "True" for r in rows], cmap="coolwarm", marker=".", s=20)
    ax.set_xlabel("s")
    ax.set_ylabel("t")
ax.legend() if ax.get_legend_handles_labels()[0] else None
fig.savefig(out / "plot.png", dpi=150)
print(f"wrote {out / 'plot.png'}")
