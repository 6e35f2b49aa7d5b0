import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from acclab.io import (
    DEFAULT_CONFIG,
    FormatError,
    config_hash,
    dump_config,
    load_config,
    read_snapshot,
    read_vacancy_pattern,
    write_config,
    write_mesh,
    write_snapshot,
    write_vacancy_pattern,
)
from acclab.lattice import build_domain
from acclab.mesh import MeshPlan, build_graded_mesh

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(
    B=arrays(np.float64, (2, 2), elements=finite),
    u=arrays(np.float64, st.tuples(st.integers(0, 20), st.just(2)), elements=finite),
    N=st.integers(1, 500),
    K=st.integers(0, 100),
)
def test_snapshot_round_trip_is_bit_exact(tmp_path_factory, B, u, N, K):
    path = tmp_path_factory.mktemp("snap") / "f.snap"
    sites = np.arange(2 * len(u), dtype=np.int64).reshape(-1, 2) - 7
    write_snapshot(path, N, K, B, sites, u)
    s = read_snapshot(path)
    assert (s.N, s.K) == (N, K)
    assert s.B.tobytes() == B.tobytes()
    assert np.array_equal(s.sites, sites)
    assert s.u.tobytes() == u.tobytes()


def test_snapshot_rejects_bad_rows(tmp_path):
    p = tmp_path / "bad.snap"
    p.write_text("4 1\n1 0 0 1\n0 0 0.5\n")
    with pytest.raises(FormatError):
        read_snapshot(p)
    with pytest.raises(FormatError):
        write_snapshot(p, 4, 1, np.eye(2), [[0, 0]], np.zeros((2, 2)))


def test_vacancy_pattern_comments(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("# divacancy\n0 0\n\n1 0  # neighbour\n")
    assert read_vacancy_pattern(p).tolist() == [[0, 0], [1, 0]]
    write_vacancy_pattern(p, [[2, -1]], comment="single")
    assert read_vacancy_pattern(p).tolist() == [[2, -1]]
    p.write_text("0 0 0\n")
    with pytest.raises(FormatError):
        read_vacancy_pattern(p)
    p.write_text("0 x\n")
    with pytest.raises(FormatError):
        read_vacancy_pattern(p)


def test_config_defaults_and_round_trip(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[experiment]\nkind = "vacancy"\nN = 32\n[mesh]\nK = [4]\n')
    cfg = load_config(p)
    assert cfg["mesh"]["K"] == [4] and cfg["mesh"]["hK"] == DEFAULT_CONFIG["mesh"]["hK"]
    write_config(p, cfg)
    again = load_config(p)
    assert again == cfg
    assert config_hash(cfg) == config_hash(dict(reversed(list(cfg.items()))))
    assert "np." not in dump_config({"a": np.float64(1.5), "b": np.arange(3)})


def test_mesh_export(tmp_path):
    d = build_domain(16, [(0, 0)], cell="hexagon")
    m = build_graded_mesh(d, MeshPlan(4, 1))
    write_mesh(tmp_path / "m", m)
    nodes = (tmp_path / "m.node").read_text().splitlines()
    eles = (tmp_path / "m.ele").read_text().splitlines()
    assert int(nodes[0].split()[0]) == len(nodes) - 1
    assert int(eles[0].split()[0]) == m.n_triangles == len(eles) - 1
