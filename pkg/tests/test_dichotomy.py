import numpy as np
import pytest

from inls import dichotomy as dc
from inls import evolution as ev
from inls import functionals as fn
from inls import groundstate as gsm
from inls.grid import Field, radial_grid
from inls.interaction import two_wave

from oracles import bootstrap_gamma_formula


@pytest.fixture(scope="module")
def thresholds(two_wave_gs):
    spec, gs = two_wave_gs
    return fn.thresholds_from_groundstate(spec, gs)


@pytest.mark.parametrize("c,verdict", [(0.9, "GlobalIntercritical"), (1.0, "Indeterminate"),
                                       (1.1, "BlowUpCandidate")])
def test_classify_scalings(two_wave_gs, thresholds, c, verdict):
    spec, gs = two_wave_gs
    cl = dc.classify(spec, gs.psi.scaled(c), thresholds)
    assert cl.verdict == verdict
    if c < 1:
        assert cl.energy_margin > 0 and cl.kinetic_margin > 0
    if c > 1:
        assert cl.energy_margin > 0 and cl.kinetic_margin < 0


def test_classify_nonradial_blowup_side(two_wave_gs, thresholds):
    spec, gs = two_wave_gs
    cl = dc.classify(spec, gs.psi.scaled(1.1), thresholds, radial=False)
    assert cl.verdict == "Indeterminate" and "not radial" in cl.note


def test_classify_large_energy(two_wave_gs, thresholds):
    # flipping the second component flips the sign of P, so E = K + 2|P|
    spec, gs = two_wave_gs
    u = Field(gs.psi.grid, gs.psi.data * np.array([[1.0], [-1.0]]))
    cl = dc.classify(spec, u, thresholds)
    assert cl.verdict == "Indeterminate" and cl.note == "energy condition fails"


def test_classify_other_regimes():
    g2 = radial_grid(2, 512, 15.0, 0.5)
    sub = two_wave(2, 0.5)
    gs = gsm.solve(sub, 1.0, g2)
    th = fn.thresholds_from_groundstate(sub, gs)
    assert dc.classify(sub, gs.psi.scaled(3.0), th).verdict == "GlobalSubcritical"
    crit = two_wave(3, 0.5)
    gs = gsm.solve(crit, 1.0, radial_grid(3, 1024, 20.0, 0.5))
    th = fn.thresholds_from_groundstate(crit, gs)
    assert dc.classify(crit, gs.psi.scaled(0.99), th).verdict == "GlobalMassCritical"
    cl = dc.classify(crit, gs.psi.scaled(1.01), th)
    assert cl.verdict == "Indeterminate" and "charge" in cl.note


def test_classify_mismatch(two_wave_gs, thresholds):
    g = radial_grid(2, 128, 10.0, 0.5)
    with pytest.raises(ValueError):
        dc.classify(two_wave(2, 0.5), Field(g, np.zeros((2, g.N))), thresholds)


def test_classify_text(two_wave_gs, thresholds):
    spec, gs = two_wave_gs
    text = dc.classify(spec, gs.psi.scaled(0.9), thresholds).to_text()
    assert text.startswith("verdict=GlobalIntercritical\n")
    assert "kinetic_margin=" in text


def test_signed_power():
    assert dc.signed_power(-8.0, 1 / 3) == pytest.approx(-2.0)
    assert dc.signed_power(0.0, 0.1) == 0.0
    assert dc.signed_power(4.0, 0.5) == 2.0


def test_bootstrap_examples(two_wave_gs, thresholds):
    g, bound = dc.bootstrap_gamma(0.0, 1.0, 2.0)
    assert g == pytest.approx(0.5) and bound == pytest.approx(0.25)
    assert dc.bootstrap_gamma(0.0, 2.0, 2.0)[0] == pytest.approx(0.25)
    spec, gs = two_wave_gs
    Q0 = 0.8 * thresholds.Qw
    got, _ = dc.bootstrap_threshold(3, 0.6, thresholds.xi1, Q0)
    assert got == pytest.approx(bootstrap_gamma_formula(3, 0.6, thresholds.Qw, Q0), rel=1e-12)
    with pytest.raises(ValueError):
        dc.bootstrap_gamma(0.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        dc.bootstrap_gamma(0.0, 1.0, 1.0)


def test_pohozaev_functional_examples(two_wave_gs):
    spec, gs = two_wave_gs
    K = fn.energy(spec, gs.psi).K
    assert abs(dc.pohozaev_functional(spec, gs.psi)) <= 1e-5 * K
    g = gs.psi.grid
    assert dc.pohozaev_functional(spec, Field(g, np.zeros((2, g.N)))) == 0
    assert dc.pohozaev_functional(spec, gs.psi.scaled(1.1)) < 0
    _, _, gap = dc.pohozaev_functional(spec, gs.psi.scaled(1.1), both=True)
    assert gap <= 1e-12


def test_delta_margin_examples(two_wave_gs, thresholds):
    spec, gs = two_wave_gs
    K = fn.energy(spec, gs.psi).K
    assert abs(dc.delta_margin(spec, gs.psi, thresholds)) <= 1e-5 * K
    assert dc.delta_margin(spec, gs.psi.scaled(1.1), thresholds) > 0
    assert dc.delta_margin(spec, gs.psi.scaled(0.9), thresholds) < 0


# --- cutoff ------------------------------------------------------------------

G = radial_grid(3, 4096, 40.0, 0.6)


@pytest.mark.parametrize("R", [5.0, 10.0])
def test_cutoff_shape(R):
    cf = dc.build_cutoff(G, R, strict=False)
    r = G.r
    assert cf.phi[0] == 0
    assert dc.cutoff_derivatives(np.array([R]), R)[0][0] == pytest.approx(R * R)
    assert np.all(cf.phi[r >= 2 * R] == 0)
    assert (cf.phi - r ** 2).max() <= 1e-10
    assert cf.phi.min() >= -1e-10
    assert cf.checks["phi >= 0"][2] and cf.checks["phi <= r^2"][2]


def test_cutoff_smooth_joins():
    R = 5.0
    eps = 1e-9
    for x in (R, 2 * R):
        lo = dc.cutoff_derivatives(np.array([x - eps]), R)[:4, 0]
        hi = dc.cutoff_derivatives(np.array([x + eps]), R)[:4, 0]
        assert np.allclose(lo, hi, atol=1e-6)


def test_cutoff_second_derivative_bound_is_violated():
    # phi(R) = R^2, phi(2R) = phi'(2R) = 0 and phi'' <= 2 force phi = (2R - r)^2 on
    # [R, 2R], whose slope -2R at R cannot match 2R; every such cutoff breaks it
    with pytest.raises(dc.CutoffBoundError) as exc:
        dc.build_cutoff(G, 5.0)
    cf = exc.value.cutoff
    assert not cf.checks["phi'' <= 2"][2]
    assert 13.0 < cf.d2phi.max() < 14.0
    assert cf.C > 0 and "C=" in cf.to_text()


def test_cutoff_radius_validation():
    with pytest.raises(ValueError):
        dc.build_cutoff(G, 25.0, strict=False)
    assert dc.build_cutoff(G, strict=False).R == 10.0


def test_cutoff_bilaplacian_of_polynomial_part():
    cf = dc.build_cutoff(G, 5.0, strict=False)
    inner = G.r < 5.0
    assert np.all(cf.bilap[inner] == 0) and np.allclose(cf.lap[inner], 6.0)


# --- virial ------------------------------------------------------------------

@pytest.fixture(scope="module")
def cutoff():
    return dc.build_cutoff(G, 10.0, strict=False)


def test_virial_sample_real_and_zero(two_wave_gs, cutoff):
    spec, gs = two_wave_gs
    s = dc.virial_sample(spec, gs.psi, cutoff)
    assert s.R == 0.0 and s.V > 0
    z = dc.virial_sample(spec, Field(G, np.zeros((2, G.N))), cutoff)
    assert z.V == 0 and z.R == 0


def test_virial_quadratic_phase_oracle(cutoff):
    # Im(conj(u) d_r u) = 2 mu r |u|^2, so R = 2 alpha_1 int phi' 2 mu r g^2 dx,
    # and phi' = 2r where g lives
    spec = two_wave()
    mu = 0.3
    g = np.exp(-G.r ** 2)
    u = Field(G, np.stack([g * np.exp(1j * mu * G.r ** 2), 0 * g]))
    s = dc.virial_sample(spec, u, cutoff)
    moment = 0.75 * (np.pi / 2) ** 1.5          # int r^2 e^{-2r^2} dx in R^3
    exact = 8 * spec.alpha[0] * mu * moment
    assert abs(s.R - exact) <= 1e-6 * exact
    assert abs(np.sum(G.r ** 2 * g ** 2 * G.W) - moment) <= 1e-9


def test_virial_consistency_zero_and_standing_wave():
    spec = two_wave(2, 0.5)
    g = radial_grid(2, 1024, 20.0, 0.5)
    cf = dc.build_cutoff(g, 5.0, strict=False)
    z = [(0.01 * i, Field(g, np.zeros((2, g.N)))) for i in range(4)]
    assert dc.virial_consistency(z, cf, spec) == 0.0
    gs = gsm.solve(spec, 1.0, g)
    tr = ev.evolve(spec, gs.psi, ev.EvolveOptions(dt=1e-4, T=0.01, keep_stride=10,
                                                   monitor_stride=10),
                   observers=[dc.virial_observer(spec, cf)])
    assert dc.virial_consistency(tr, cf, spec) <= 1e-4
    V = tr["V"]
    assert np.abs(V - V[0]).max() <= 1e-6 * V[0]


def test_virial_consistency_input_checks(cutoff):
    spec = two_wave()
    z = Field(G, np.zeros((2, G.N)))
    with pytest.raises(ValueError):
        dc.virial_consistency([(0.0, z), (1.0, z)], cutoff, spec)
    with pytest.raises(ValueError):
        dc.virial_consistency([(0.0, z), (1.0, z), (3.0, z)], cutoff, spec)
    other = radial_grid(3, 512, 40.0, 0.6)
    with pytest.raises(ValueError):
        dc.virial_sample(spec, Field(other, np.zeros((2, other.N))), cutoff)


def test_delta_check():
    tr = ev.EvolutionTrace(l=1)
    for i, d in enumerate([4.0, 3.0, 2.5]):
        tr.append(float(i), {"delta": d})
    assert dc.delta_check(tr) == (True, 0.5)
    tr.append(3.0, {"delta": 1.0})
    ok, worst = dc.delta_check(tr)
    assert not ok and worst == -1.0
