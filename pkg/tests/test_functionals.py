import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inls import functionals as fn
from inls.grid import Field, radial_grid, weighted_integral
from inls.interaction import two_wave

from oracles import gaussian_mass, xi1_formula

G = radial_grid(3, 4096, 40.0, 0.6)
UNIT = np.exp(-G.r ** 2) / np.sqrt(gaussian_mass(3))


def _pair(a, b):
    return Field(G, np.stack([a, b]))


def test_charge_examples():
    spec = two_wave()
    z = np.zeros(G.N)
    assert fn.charge(spec, _pair(z, z)) == 0
    assert abs(fn.charge(spec, _pair(UNIT, z)) - 2) <= 1e-9
    assert abs(fn.charge(spec, _pair(z, UNIT)) - 4) <= 1e-9


def test_energy_examples():
    spec = two_wave()
    z = np.zeros(G.N)
    rep = fn.energy(spec, _pair(z, z))
    assert (rep.Q, rep.K, rep.L, rep.P, rep.E) == (0, 0, 0, 0, 0)
    g = np.exp(-G.r ** 2)
    rep = fn.energy(spec, _pair(g, -g))
    assert rep.P < 0
    assert abs(rep.P + weighted_integral(G, g ** 3, 0.6)) <= 1e-12
    assert rep.L == 0
    assert abs(rep.E - (rep.K + rep.L - 2 * rep.P)) <= 1e-12


def test_mass_term_in_energy():
    spec = two_wave(beta_t=1.5)
    g = np.exp(-G.r ** 2)
    rep = fn.energy(spec, _pair(g, g))
    assert abs(rep.L - 3.0 * gaussian_mass(3)) <= 1e-8


def test_critical_index_examples():
    assert fn.critical_index(3, 0.5) == (0.0, "L2-critical")
    s, reg = fn.critical_index(3, 0.6)
    assert abs(s - 0.1) <= 1e-12 and reg == "intercritical"
    assert fn.critical_index(2, 0.5) == (-0.5, "L2-subcritical")
    assert fn.critical_index(5, 0.5)[1] == "H1-critical"


def test_action_zero_and_ground_state(scalar_gs):
    spec, gs = scalar_gs
    z = Field(gs.psi.grid, np.zeros((1, gs.psi.grid.N)))
    assert fn.action(spec, z, 1.0) == 0
    I = fn.action(spec, gs.psi, 1.0)
    P = fn.potential_integral(spec, gs.psi)
    assert abs(I - P / 2) <= 1e-6 * abs(I)


def test_action_homogeneity(scalar_gs):
    spec, gs = scalar_gs
    K = fn.energy(spec, gs.psi).K
    Qw = fn.mass_term(spec, gs.psi, 1.0)
    P = fn.potential_integral(spec, gs.psi)
    a = 2.0
    got = fn.action(spec, gs.psi.scaled(a), 1.0)
    assert abs(got - (a * a * 0.5 * (K + Qw) - a ** 3 * P)) <= 1e-10 * abs(got)


def test_weinstein_scaling_invariance():
    spec = two_wave()
    u = lambda s: _pair(np.exp(-(s * G.r) ** 2), 0.7 * np.exp(-1.3 * (s * G.r) ** 2))
    J1 = fn.weinstein(spec, u(1.0), 1.0)
    J2 = fn.weinstein(spec, u(0.5).scaled(3.0), 1.0)
    assert abs(J2 / J1 - 1) <= 1e-8


def test_weinstein_absent_when_p_vanishes():
    assert fn.weinstein(two_wave(), _pair(UNIT, np.zeros(G.N)), 1.0) is None
    assert "J=absent" in fn.full_report(two_wave(), _pair(UNIT, 0 * UNIT), 1.0).to_text()


def test_weinstein_at_ground_state(two_wave_gs):
    spec, gs = two_wave_gs
    th = fn.thresholds_from_groundstate(spec, gs)
    assert abs(fn.weinstein(spec, gs.psi, 1.0) / th.xi1 - 1) <= 1e-6


def test_pohozaev_examples(scalar_gs, rng):
    spec, gs = scalar_gs
    assert max(fn.pohozaev_residuals(spec, gs.psi, 1.0)) <= 1e-4
    g = gs.psi.grid
    assert fn.pohozaev_residuals(spec, Field(g, np.zeros((1, g.N))), 1.0) == (0.0, 0.0, 0.0)
    a = rng.uniform(0.5, 1.5, size=3)
    rough = Field(g, (a[0] + a[1] * g.r + a[2] * g.r ** 2) * np.exp(-g.r ** 2))
    assert max(fn.pohozaev_residuals(spec, rough, 1.0)) > 0.1


def test_threshold_examples(two_wave_gs):
    spec, gs = two_wave_gs
    th = fn.thresholds_from_groundstate(spec, gs)
    assert th.xi1_gap <= 1e-6
    assert abs(th.C_op * th.xi1 - 1) <= 1e-10
    assert abs(fn.xi1_closed_form(3, 0.6, 4 * th.Qw) / th.xi1 - 2) <= 1e-12
    assert abs(th.xi1 - xi1_formula(3, 0.6, th.Qw)) <= 1e-12 * th.xi1
    assert th.E_script > 0 and (th.n, th.b, th.l) == (3, 0.6, 2)
    assert "xi1_gap=" in th.to_text()


def test_frequency_masses():
    assert np.allclose(fn.frequency_masses(two_wave(beta_t=1.0), 1.0), [2.0, 6.0])
    with pytest.raises(ValueError):
        fn.frequency_masses(two_wave(), 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.3, 2.0), st.floats(-1.0, 1.0))
def test_functional_homogeneity(c, w, phase):
    spec = two_wave()
    u = _pair(np.exp(-(G.r / w) ** 2), np.exp(1j * phase) * np.exp(-G.r ** 2))
    a = fn.energy(spec, u)
    b = fn.energy(spec, u.scaled(c))
    assert abs(b.K - c * c * a.K) <= 1e-10 * c * c * a.K
    assert abs(b.Q - c * c * a.Q) <= 1e-10 * c * c * a.Q
    assert abs(b.P - c ** 3 * a.P) <= 1e-10 * c ** 3 * (abs(a.P) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-np.pi, np.pi))
def test_gauge_leaves_functionals(theta):
    spec = two_wave()
    u = _pair(np.exp(-G.r ** 2), 0.5 * np.exp(-2 * G.r ** 2))
    ph = np.exp(1j * np.asarray(spec.sigma) * theta)[:, None]
    a = fn.energy(spec, u)
    b = fn.energy(spec, Field(G, ph * u.data))
    assert abs(b.P - a.P) <= 1e-12 * abs(a.P) and abs(b.E - a.E) <= 1e-12 * abs(a.E)
