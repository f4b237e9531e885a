import json

import numpy as np
import pytest

from contspec.algebra import SeparableKernel, StateFunctional, random_observable
from contspec.io import (dump_json, from_jsonable, load_json, read_csv, read_phase_space, to_jsonable, write_csv,
                         write_phase_space, write_profile_csv)
from contspec.spectral import build_grid
from contspec.wigner import make_phase_grid


def _same(a, b):
    for name in ("bb", "cc_diag", "cross_lo", "cross_ol"):
        x, y = getattr(a, name), getattr(b, name)
        assert (x is None and y is None) or np.array_equal(x, y)


def test_csv_round_trip_is_exact(tmp_path):
    rows = [(0.1, 1, True), (1 / 3, 2, False), (np.pi * 1e-300, -4, True)]
    path = write_csv(tmp_path / "t.csv", ["x", "n", "flag"], rows, seed=7)
    text = path.read_text().splitlines()
    assert text[0] == "# seed=7" and text[1] == "x,n,flag"
    assert text[2].endswith(",1,true")
    header, data = read_csv(path)
    assert header == ["x", "n", "flag"]
    assert data[:, 0].tolist() == [0.1, 1 / 3, np.pi * 1e-300]


def test_csv_without_seed_and_empty(tmp_path):
    path = write_csv(tmp_path / "e.csv", ["a", "b"], [])
    assert path.read_text() == "a,b\n"
    header, data = read_csv(path)
    assert header == ["a", "b"] and data.shape == (0, 2)


def test_json_round_trip_dense_kernel(tmp_path, rng):
    grid = build_grid("gauss-legendre", 5, 3.0)
    obs = random_observable(grid, 2, rng)
    full = rng.normal(size=(5, 5, 2, 2)) + 1j * rng.normal(size=(5, 5, 2, 2))
    obs = type(obs)(grid, obs.bb, obs.cc_diag, obs.cross_lo, obs.cross_ol, full)
    back = load_json(dump_json(obs, tmp_path / "o.json"))
    _same(obs, back)
    assert np.array_equal(back.cc_full, full)
    assert np.array_equal(back.grid.nodes, grid.nodes) and back.grid.scheme == grid.scheme


def test_json_round_trip_separable_state(rng):
    grid = build_grid("gauss-laguerre-mapped", 4, 20.0)
    g = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = StateFunctional(grid, np.eye(1), np.ones((4, 1, 1)), cc_full=SeparableKernel.outer(g, np.conj(g)))
    d = json.loads(json.dumps(to_jsonable(rho)))
    assert d["kind"] == "state" and d["blocks"]["cross_lo"] is None
    back = from_jsonable(d)
    assert isinstance(back, StateFunctional) and isinstance(back.cc_full, SeparableKernel)
    assert np.array_equal(back.cc_full.u, rho.cc_full.u) and np.array_equal(back.cc_full.v, rho.cc_full.v)
    _same(rho, back)


def test_plain_json_and_numpy_scalars(tmp_path):
    p = dump_json({"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "z": 1 + 2j}, tmp_path / "x.json")
    assert load_json(p) == {"a": 1.5, "b": [0, 1, 2], "c": True, "z": [1.0, 2.0]}
    with pytest.raises(TypeError):
        dump_json({"bad": object()}, tmp_path / "y.json")


def test_profile_csv(tmp_path):
    grid = build_grid("gauss-legendre", 3, 1.0)
    rho = StateFunctional(grid, np.eye(2), np.broadcast_to(np.diag([1.0, 2.0]), (3, 2, 2)).copy())
    _, data = read_csv(write_profile_csv(rho, tmp_path / "p.csv"))
    assert data.shape == (6, 3) and data[:, 2].tolist() == [1, 2] * 3


def test_phase_space_round_trip(tmp_path, rng):
    g = make_phase_grid(2.0, 9, 1.0, 5, 0.1)
    vals = rng.normal(size=(9, 5))
    paths = write_phase_space(vals, g, tmp_path / "w", seed=3)
    back, header = read_phase_space(tmp_path / "w")
    assert np.array_equal(back, vals) and header["seed"] == 3 and header["dtype"] == "float64-le"
    _, data = read_csv(paths["csv"])
    assert np.array_equal(data[:, 2], vals.ravel())
