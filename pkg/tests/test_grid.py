import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as gamma_fn

from inls.grid import (CartesianGrid, Field, RadialGrid, gradient_norm2, h1_report, l2_norm2, radial_grid,
                       radial_laplacian, read_snapshot, weighted_integral, write_snapshot)
from inls.interaction import two_wave

from oracles import gaussian_mass, weighted_gaussian


def test_unit_ball_volume():
    g = RadialGrid(3, 2001, 1.0)
    assert abs(weighted_integral(g, np.ones(g.N)) - 4 * np.pi / 3) <= 1e-6


def test_weighted_gaussian():
    g = radial_grid(3, 4096, 40.0, 0.5)
    val = weighted_integral(g, np.exp(-3 * g.r ** 2), 0.5)
    ref = 2 * np.pi * 3 ** ((0.5 - 3) / 2) * gamma_fn((3 - 0.5) / 2)
    assert abs(val - ref) <= 1e-6
    assert abs(ref - weighted_gaussian(3, 0.5, 3.0)) <= 1e-12


@pytest.mark.parametrize("n,b", [(2, 0.5), (3, 0.6), (4, 1.2), (5, 1.9)])
def test_weighted_gaussian_all_dimensions(n, b):
    g = RadialGrid(n, 4096, 30.0, b)
    assert abs(weighted_integral(g, np.exp(-g.r ** 2), b) / weighted_gaussian(n, b, 1.0) - 1) <= 1e-6


def test_untuned_weight_still_integrates():
    g = RadialGrid(3, 4096, 30.0)
    assert abs(weighted_integral(g, np.exp(-g.r ** 2), 0.7) / weighted_gaussian(3, 0.7, 1.0) - 1) <= 1e-6


def test_zero_integrand():
    g = radial_grid(3, 512, 10.0)
    assert weighted_integral(g, np.zeros(g.N), 0.5) == 0.0


def test_non_integrable_weight():
    with pytest.raises(ValueError):
        weighted_integral(radial_grid(2, 64, 1.0), np.ones(64), 2.0)


def test_laplacian_of_r2():
    g = RadialGrid(3, 2048, 10.0)
    lap = radial_laplacian(g, g.r ** 2)
    assert np.abs(lap[:-10] - 6.0).max() <= 1e-10


def test_laplacian_of_gaussian_second_order():
    errs = []
    for N in (513, 1025, 2049):
        g = RadialGrid(3, N, 10.0)
        lap = radial_laplacian(g, np.exp(-g.r ** 2))
        errs.append(np.abs(lap - (4 * g.r ** 2 - 6) * np.exp(-g.r ** 2))[: N // 2].max())
    assert errs[-1] <= 10 * g.h ** 2
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_laplacian_of_constant():
    g = RadialGrid(3, 1024, 10.0)
    assert np.abs(radial_laplacian(g, np.full(g.N, 2.5))[:-10]).max() <= 1e-12


def test_h1_report_zero_and_gaussian():
    spec = two_wave()
    g = radial_grid(3, 4096, 40.0, 0.6)
    m, d = h1_report(spec, Field(g, np.zeros((2, g.N))))
    assert np.all(m == 0) and np.all(d == 0)
    m, _ = h1_report(spec, Field(g, np.exp(-g.r ** 2)))
    assert abs(m[0] ** 2 - (np.pi / 2) ** 1.5) <= 1e-6
    assert abs(m[0] ** 2 - gaussian_mass(3)) <= 1e-6


def test_gradient_of_distance_function():
    # |grad r| = 1 on the support of a tent min(r, 2 - r)_+
    g = RadialGrid(3, 4001, 3.0)
    psi = np.clip(np.minimum(g.r, 2 - g.r), 0, None)
    assert abs(gradient_norm2(g, psi) / (4 * np.pi * 8 / 3) - 1) <= 1e-2


def test_gaussian_gradient_norm():
    g = radial_grid(3, 4096, 40.0)
    # int |grad e^{-r^2}|^2 = 4 int r^2 e^{-2r^2} = n (pi/2)^{n/2}
    assert abs(gradient_norm2(g, np.exp(-g.r ** 2)) - 3 * (np.pi / 2) ** 1.5) <= 1e-7


def test_cartesian_integrals():
    g = CartesianGrid(2, 8.0, 128)
    u = np.exp(-g.radius ** 2)
    assert abs(l2_norm2(g, u) - gaussian_mass(2)) <= 1e-10
    assert abs(gradient_norm2(g, u) - np.pi) <= 1e-8
    assert abs(weighted_integral(g, u, 0.5) / weighted_gaussian(2, 0.5, 1.0) - 1) <= 1e-2


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialGrid(1)
    with pytest.raises(ValueError):
        RadialGrid(3, 2)
    with pytest.raises(ValueError):
        CartesianGrid(2, 1.0, 100)
    with pytest.raises(ValueError):
        Field(radial_grid(3, 64, 1.0), np.zeros(63))


def test_snapshot_round_trip(tmp_path, rng):
    g = radial_grid(3, 256, 10.0, 0.6)
    fld = Field(g, rng.normal(size=(2, g.N)) + 1j * rng.normal(size=(2, g.N)))
    p = tmp_path / "a.bin"
    write_snapshot(str(p), fld)
    back = read_snapshot(str(p), 0.6)
    assert back.grid is g
    assert np.array_equal(back.data, fld.data)
    assert os.listdir(tmp_path) == ["a.bin"]
    c = CartesianGrid(2, 4.0, 16)
    cf = Field(c, rng.normal(size=(1, 16, 16)))
    write_snapshot(str(tmp_path / "c.bin"), cf)
    cb = read_snapshot(str(tmp_path / "c.bin"))
    assert np.array_equal(cb.data, cf.data) and cb.grid.M == 16


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        read_snapshot(str(p))
    p.write_bytes(b"IN")
    with pytest.raises(ValueError):
        read_snapshot(str(p))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([2, 3, 4, 5]))
def test_stiffness_symmetric_semidefinite(seed, n):
    g = radial_grid(n, 200, 10.0, 0.5)
    r = np.random.default_rng(seed)
    x, y = r.normal(size=(2, g.N))
    assert abs(x @ g.stiffness(y) - y @ g.stiffness(x)) <= 1e-10 * np.abs(x).sum() * np.abs(y).sum()
    assert x @ g.stiffness(x) >= -1e-10


def test_weights_positive():
    for n in (2, 3, 4, 5):
        g = radial_grid(n, 128, 5.0, 0.4)
        assert np.all(g.W > 0) and np.all(g.Wb > 0)
