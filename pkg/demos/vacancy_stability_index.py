"""Vacancy stability index: exact single-vacancy spectrum, free patches and periodic cells.

The index kappa measures how much of the nearest-neighbour axial energy
survives when the bonds touching vacancies are removed, relative to the
optimal extension of the displacement into the vacancies.
"""
import numpy as np

from acclab import analytic_single_vacancy_index, build_domain, patch_stability_index, stability_index
from acclab.lattice import hexnorm

# exact block spectrum of an isolated vacancy (rational arithmetic)
spec = analytic_single_vacancy_index()
for k in sorted(spec.eigenvalues):
    print(f"k = {k:+d}   lambda = {spec.eigenvalues[k]}")
print("kappa =", spec.kappa, "=", float(spec.kappa))

# free patches of growing radius around one vacancy and a divacancy
print("\nseparation   single   divacancy")
for sep in (4, 8, 12):
    k1 = patch_stability_index([(0, 0)], sep // 2).kappa
    k2 = patch_stability_index([(0, 0), (1, 0)], sep // 2).kappa
    print(f"{sep:10d}   {k1:.4f}   {k2:.4f}")

# periodic cells: one vacancy per cell
print("\nperiod   kappa")
for N in (6, 8, 10, 12):
    res = stability_index(build_domain(N, [(0, 0)]))
    print(f"{N:6d}   {res.kappa:.4f}")

# the minimising mode concentrates next to the vacancy (hexagonal cell centred on it)
d = build_domain(8, [(0, 0)], cell="hexagon")
res = stability_index(d)
amp2 = np.sum(res.mode**2, axis=1)
r = hexnorm(d.sites)
print(f"\nhexagonal cell N=8: kappa {res.kappa:.4f}")
for R in (1, 2, 4):
    print(f"share of the mode within distance {R} of the vacancy: {amp2[r <= R].sum() / amp2.sum():.3f}")
