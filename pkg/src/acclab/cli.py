"""Command-line entry point ``acc-lab``."""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .defects import patch_stability_index, stability_index
from .experiments import ErrorModel, ExperimentSpec, error_model, run_experiment
from .io import load_config, read_vacancy_pattern, write_snapshot
from .lattice import DEFAULT_CUTOFF, build_domain
from .potential import make_potential
from .stability import OutOfTheoryError, gamma


def _range(text):
    lo, hi, n = text.split(":")
    return float(lo), float(hi), int(n)


def _two_ranges(text):
    a, b = text.split(",")
    return _range(a), _range(b)


def cmd_run(args):
    cfg = load_config(args.config)
    spec = ExperimentSpec.from_config(cfg, Path(args.config).parent)
    if args.out:
        spec.output = Path(args.out)
    if spec.output is None:
        spec.output = Path(args.config).with_suffix("")
    result = run_experiment(spec)
    for row in result.rows:
        print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items() if k != "config_hash"))
    for k, v in result.summary.items():
        print(f"{k}: {v}")
    print(f"wrote {spec.output}")
    return 0 if result.ok else 1


def cmd_kappa(args):
    vac = read_vacancy_pattern(args.pattern)
    if args.patch_radius is not None:
        res = patch_stability_index(vac, args.patch_radius)
        sites = res.info["sites"]
        N = args.patch_radius
    else:
        domain = build_domain(args.period, vac, cell=args.cell)
        res = stability_index(domain)
        sites, N = domain.sites, args.period
    print(f"kappa = {res.kappa:.10f}")
    print(f"residual = {res.residual:.2e}, unknowns = {res.n_dof}")
    out = Path(args.out)
    write_snapshot(out, N, 0, np.eye(2), sites, res.mode)
    print(f"mode written to {out}")
    return 0


def cmd_stability_region(args):
    pot = make_potential(args.potential)
    out = Path(args.out)
    if args.strain_grid:
        s, t = _two_ranges(args.strain_grid)
        spec = ExperimentSpec(
            "stability-bravais", args.N, K=[args.K], hK=[args.hK], family=args.family, s_grid=s, t_grid=t, shear=args.shear
        )
        result = run_experiment(spec)
        cols = ["s", "t", "lambda_atomistic", "lambda_coupled", "stable_atomistic", "stable_coupled", "status"]
        with open(out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(cols)
            for r in result.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in (r.get(c, "") for c in cols)])
        for k, v in result.summary.items():
            print(f"{k}: {v}")
        print(f"wrote {out}")
        return 0 if result.ok else 1
    (m0, m1, nm), (M0, M1, nM) = _two_ranges(args.grid)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["m", "M", "gamma_hom", "gamma_kappa", "gamma_kappa_delta"])
        for m in np.linspace(m0, m1, nm):
            for M in np.linspace(M0, M1, nM):
                if m > M:
                    continue
                rep = gamma(pot, m, M, 0.0, args.kappa, args.cutoff)
                try:
                    gd = gamma(pot, m, M, args.delta, args.kappa, args.cutoff).gamma
                except OutOfTheoryError:
                    gd = float("nan")
                w.writerow([repr(float(v)) for v in (m, M, rep.gamma_hom, rep.gamma, gd)])
    print(f"wrote {out}")
    return 0


def cmd_error_model(args):
    p = np.inf if args.p == "inf" else float(args.p)
    pred = error_model(ErrorModel(args.beta, p, args.K, args.N, args.hK, args.alpha))
    print(f"regime      {pred.regime}")
    print(f"alpha       {pred.alpha:.6g} ({'equidistributed' if pred.alpha_consistent else 'not equidistributed'})")
    print(f"Err         {pred.err:.6e}")
    print(f"Err (exact) {pred.err_exact:.6e}")
    print(f"Err (rate)  {pred.err_asymptotic:.6e}")
    print(f"DoF         {pred.dof:.6e}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="acc-lab", description="Atomistic/continuum coupling laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment described by a TOML file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: next to the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("kappa", help="vacancy stability index of a vacancy pattern")
    p.add_argument("--pattern", required=True, help="file of 'i j' vacancy sites")
    p.add_argument("--period", type=int, default=12, help="periodic cell parameter N")
    p.add_argument("--cell", choices=["parallelogram", "hexagon"], default="parallelogram")
    p.add_argument("--patch-radius", type=int, help="use a free patch of this radius instead of a periodic cell")
    p.add_argument("--out", default="kappa_mode.snap")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("stability-region", help="coercivity constants on an (m, M) grid or stability on an (s, t) strain grid")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--grid", help="m0:m1:steps,M0:M1:steps")
    g.add_argument("--strain-grid", help="s0:s1:steps,t0:t1:steps")
    p.add_argument("--kappa", type=float, default=2.0 / 7.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--potential", default="lennard-jones")
    p.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF)
    p.add_argument("--N", type=int, default=24)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--hK", type=int, default=2)
    p.add_argument("--family", choices=["radial", "algebraic"], default="radial")
    p.add_argument("--shear", type=float, default=0.1)
    p.add_argument("--out", default="stability_region.csv")
    p.set_defaults(func=cmd_stability_region)

    p = sub.add_parser("error-model", help="predicted error and degrees of freedom of a graded mesh")
    p.add_argument("--beta", type=float, default=3.0)
    p.add_argument("--p", default="2")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--hK", type=float, default=1.0)
    p.add_argument("--alpha", type=float, help="grading exponent (default: equidistributed)")
    p.set_defaults(func=cmd_error_model)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
