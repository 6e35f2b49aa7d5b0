"""Convergence of the coupled solution to the atomistic one around a vacancy.

A scaled-down version of the H1 error study: the atomistic reference is
computed once (and cached), then every (K, hK) mesh is solved and the
relative error compared with the error model. Pass a larger N on the
command line for a longer run, e.g. ``python vacancy_convergence.py 128``.
"""
import sys
from pathlib import Path

from acclab import ExperimentSpec, run_experiment

N = int(sys.argv[1]) if len(sys.argv) > 1 else 64
out = Path("results") / f"vacancy_N{N}"
spec = ExperimentSpec("vacancy", N, K=[4, 8], hK=[1, 2], output=out, cache_dir=Path("results") / "cache")
res = run_experiment(spec)

print("  K  hK   DoF   Err_rel    Err_model  ratio")
for r in res.rows:
    if r["status"] != "ok":
        print(f"{r['K']:3d} {r['hK']:3d}   {r['status']}")
        continue
    print(f"{r['K']:3d} {r['hK']:3d} {r['dof']:5d}   {r['err_rel']:.3e}  {r['err_model']:.3e}  {r['model_ratio']:.2f}")
print(f"fitted slope of log Err against log DoF: {res.summary['slope']:.3f}")
print(f"tables and fields written to {out}")
