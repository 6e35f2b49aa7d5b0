"""Where the coercivity bound is positive, and how the coupled and atomistic stability regions compare.

Part 1 scans stretch ranges [m, M] and compares the sets where the
coercivity constant with a vacancy (kappa = 2/7), the homogeneous constant,
and the exact homogeneous lattice spectrum are positive. Part 2 scans the
strain family [[1 + s, 0.1], [0, 1 + t]] and compares lowest Hessian
eigenvalues of the periodic lattice and the coupled model.
"""
import numpy as np

from acclab import ExperimentSpec, gamma, gamma_hom, homogeneous_atomistic_stable, lennard_jones, run_experiment

pot = lennard_jones()
ms = np.linspace(0.85, 1.0, 16)
Ms = np.linspace(1.0, 1.2, 16)
rows = []
for m in ms:
    row = ""
    for M in Ms:
        if gamma(pot, m, M, 0.0, 2 / 7).gamma > 0:
            row += "#"
        elif gamma_hom(pot, m, M) > 0:
            row += "+"
        elif homogeneous_atomistic_stable(pot, m, M):
            row += "."
        else:
            row += " "
    rows.append(f"m={m:.3f} |{row}|")
print("columns: M from 1.0 to 1.2;  # gamma > 0, + gamma_hom > 0, . lattice stable")
print("\n".join(rows))

spec = ExperimentSpec("stability-bravais", 24, K=[8], hK=[2], s_grid=(-0.12, 0.12, 9), t_grid=(-0.12, 0.12, 9))
res = run_experiment(spec)
grid = {(r["s"], r["t"]): r for r in res.rows}
ss = sorted({k[0] for k in grid})
ts = sorted({k[1] for k in grid})
print("\nrows t, columns s;  # both stable, c coupled only, blank neither")
for t in reversed(ts):
    line = "".join(
        "#" if grid[s, t]["stable_atomistic"] else ("c" if grid[s, t]["stable_coupled"] else " ") for s in ss
    )
    print(f"t={t:+.3f} |{line}|")
print({k: res.summary[k] for k in ("contains", "containment_violations", "hausdorff")})
