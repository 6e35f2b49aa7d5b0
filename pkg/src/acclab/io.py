"""Plain-text input and output: vacancy patterns, run configs, field snapshots, meshes."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class FormatError(ValueError):
    pass


# ----------------------------------------------------------------------------
# vacancy patterns


def read_vacancy_pattern(path) -> np.ndarray:
    """Read ``i j`` integer pairs, one per line; ``#`` starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected two integers, got {line!r}")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def write_vacancy_pattern(path, sites, comment: str | None = None):
    lines = [f"# {comment}"] if comment else []
    lines += [f"{int(i)} {int(j)}" for i, j in np.asarray(sites).reshape(-1, 2)]
    Path(path).write_text("\n".join(lines) + "\n")


# ----------------------------------------------------------------------------
# run configuration

DEFAULT_CONFIG = {
    "potential": {"kind": "lennard-jones", "cutoff": 3.1, "params": {}},
    "mesh": {"K": [4, 8, 16], "hK": [1, 2], "alpha": 1.5, "family": "algebraic"},
    "solve": {"tol": 1e-8, "maxiter": 20000, "precond": "laplace"},
    "continuation": {"dt": 1e-3, "bisect_tol": 1e-8},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path) -> dict:
    """Read a TOML run config and fill in defaults for missing sections."""
    with open(path, "rb") as f:
        cfg = tomllib.load(f)
    return _merge(DEFAULT_CONFIG, cfg)


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to TOML-serialisable builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in list(obj)]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_config(cfg: dict) -> str:
    return tomli_w.dumps(_plain(cfg))


def write_config(path, cfg: dict):
    Path(path).write_text(dump_config(cfg))


def config_hash(obj) -> str:
    """Stable short hash of a config-like object (key order independent)."""
    text = json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ----------------------------------------------------------------------------
# field snapshots


@dataclass
class Snapshot:
    N: int
    K: int
    B: np.ndarray
    sites: np.ndarray  # (n, 2) integer lattice coordinates
    u: np.ndarray  # (n, 2) displacements


def _r(x) -> str:
    return repr(float(x))


def write_snapshot(path, N: int, K: int, B, sites, u):
    """Write ``N K`` and ``B`` row-major, then ``site_i site_j ux uy`` rows (shortest round-trip repr)."""
    B = np.asarray(B, dtype=float).reshape(2, 2)
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, 2)
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    if len(sites) != len(u):
        raise FormatError("sites and displacements differ in length")
    lines = [f"{int(N)} {int(K)}", " ".join(_r(b) for b in B.ravel())]
    lines += [f"{i} {j} {_r(a)} {_r(b)}" for (i, j), (a, b) in zip(sites.tolist(), u.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> Snapshot:
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    if len(lines) < 2:
        raise FormatError(f"{path}: truncated snapshot header")
    head = lines[0].split()
    N, K = int(head[0]), int(head[1])
    B = np.array([float(x) for x in lines[1].split()]).reshape(2, 2)
    body = [l.split() for l in lines[2:]]
    if any(len(r) != 4 for r in body):
        raise FormatError(f"{path}: rows must have four fields")
    sites = np.array([(int(r[0]), int(r[1])) for r in body], dtype=np.int64).reshape(-1, 2)
    u = np.array([(float(r[2]), float(r[3])) for r in body]).reshape(-1, 2)
    return Snapshot(N, K, B, sites, u)


# ----------------------------------------------------------------------------
# mesh export


def write_mesh(stem, mesh):
    """Write ``stem.node`` (index x y region-free) and ``stem.ele`` (index n0 n1 n2 region) files."""
    stem = Path(stem)
    xy = mesh.domain.positions()
    used = np.unique(mesh.tri_sites)
    nodes = [f"{len(used)} 2 0 0"] + [f"{k} {_r(xy[s, 0])} {_r(xy[s, 1])}" for k, s in enumerate(used)]
    local = -np.ones(mesh.domain.n_sites, dtype=np.int64)
    local[used] = np.arange(len(used))
    t = local[mesh.tri_sites]
    eles = [f"{len(t)} 3 1"] + [f"{k} {a} {b} {c} {int(r)}" for k, ((a, b, c), r) in enumerate(zip(t.tolist(), mesh.region))]
    stem.with_suffix(".node").write_text("\n".join(nodes) + "\n")
    stem.with_suffix(".ele").write_text("\n".join(eles) + "\n")
