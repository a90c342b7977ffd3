"""Cubic interaction potentials F(z, zbar), the quadratic nonlinearities
f_k = dF/dzbar_k + conj(dF/dz_k) derived from them, and sampled checks of
the structural hypotheses H1-H8 used throughout the package."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Monomial:
    """coeff * prod z_j^zpow[j] * conj(z_j)^cpow[j]."""

    coeff: complex
    zpow: tuple
    cpow: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeff", complex(self.coeff))
        object.__setattr__(self, "zpow", tuple(int(p) for p in self.zpow))
        object.__setattr__(self, "cpow", tuple(int(p) for p in self.cpow))
        if len(self.zpow) != len(self.cpow):
            raise ValueError("zpow and cpow must have the same length")
        if any(p < 0 for p in self.zpow + self.cpow):
            raise ValueError("powers must be non-negative")

    @property
    def degree(self):
        return sum(self.zpow) + sum(self.cpow)


@dataclass(frozen=True)
class InteractionPotential:
    """A cubic polynomial F in (z, zbar) on C^l.

    ``parts`` optionally lists the supermodular pieces F_s used by the H8
    check; each part is (Monomial, variables) where the monomial is read on
    the non-negative real cone and ``variables`` are the coordinates it must
    vanish on.
    """

    l: int
    terms: tuple = ()
    parts: tuple | None = None

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("need at least one component")
        object.__setattr__(self, "terms", tuple(self.terms))
        for i, t in enumerate(self.terms):
            if len(t.zpow) != self.l:
                raise ValueError(f"term {i} has {len(t.zpow)} slots, expected {self.l}")
            if t.degree != 3:
                raise ValueError(f"term {i} has degree {t.degree}, expected 3")
        if self.parts is not None:
            object.__setattr__(self, "parts", tuple((m, tuple(v)) for m, v in self.parts))


@dataclass(frozen=True)
class SystemSpec:
    """Coefficients of i a_k u_t + g_k Lap u - beta_k u + |x|^-b f_k(u) = 0."""

    n: int
    b: float
    alpha: tuple
    gamma: tuple
    beta: tuple
    sigma: tuple
    F: InteractionPotential

    def __post_init__(self):
        for name in ("alpha", "gamma", "beta", "sigma"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        l = self.F.l
        if not 2 <= self.n <= 5:
            raise ValueError(f"dimension n={self.n} outside 2..5")
        if not 0.0 < self.b < min(2.0, self.n / 2.0):
            raise ValueError(f"need 0 < b < min(2, n/2), got b={self.b}")
        for name in ("alpha", "gamma", "beta", "sigma"):
            if len(getattr(self, name)) != l:
                raise ValueError(f"{name} must have {l} entries")
        if min(self.alpha) <= 0 or min(self.gamma) <= 0 or min(self.sigma) <= 0:
            raise ValueError("alpha, gamma and sigma must be positive")
        if min(self.beta) < 0:
            raise ValueError("beta must be non-negative")

    @property
    def l(self):
        return self.F.l

    def with_(self, **kw) -> "SystemSpec":
        d = dict(n=self.n, b=self.b, alpha=self.alpha, gamma=self.gamma, beta=self.beta, sigma=self.sigma, F=self.F)
        d.update(kw)
        return SystemSpec(**d)


# --- built-in systems ------------------------------------------------------

def _m(c, zp, cp):
    return Monomial(c, zp, cp)


def two_wave(n=3, b=0.6, kappa=1.0, beta_t=0.0) -> SystemSpec:
    """F = conj(z1)^2 z2, stored with alpha=(2,2), gamma=(1,kappa), beta=(0,2 beta_t)."""
    t = _m(1.0, (0, 1), (2, 0))
    F = InteractionPotential(2, (t,), parts=((t, (0, 1)),))
    return SystemSpec(n, b, (2.0, 2.0), (1.0, kappa), (0.0, 2.0 * beta_t), (1.0, 2.0), F)


def three_wave_a(n=3, b=0.6, beta_t=1.0, beta_t1=1.0) -> SystemSpec:
    """F = conj(z1) (z2^2 + z3^2) / 2."""
    t1 = _m(0.5, (0, 2, 0), (1, 0, 0))
    t2 = _m(0.5, (0, 0, 2), (1, 0, 0))
    F = InteractionPotential(3, (t1, t2), parts=((t1, (0, 1)), (t2, (0, 2))))
    return SystemSpec(n, b, (2.0, 1.0, 1.0), (1.0, 1.0, 1.0), (beta_t, beta_t1, 1.0), (2.0, 1.0, 1.0), F)


def three_wave_b(n=3, b=0.6, beta_t=1.0, beta_t1=1.0) -> SystemSpec:
    """F = z1^2 conj(z2) / 2 + z1 z2 conj(z3)."""
    t1 = _m(0.5, (2, 0, 0), (0, 1, 0))
    t2 = _m(1.0, (1, 1, 0), (0, 0, 1))
    F = InteractionPotential(3, (t1, t2), parts=((t1, (0, 1)), (t2, (0, 1, 2))))
    return SystemSpec(n, b, (1.0, 2.0, 3.0), (1.0, 1.0, 1.0), (1.0, beta_t, beta_t1), (1.0, 2.0, 3.0), F)


def scalar_quadratic(n=3, b=0.5, beta=0.0) -> SystemSpec:
    """One equation with F = (z^2 zbar + z zbar^2) / 6, so f = (z^2 + 2|z|^2) / 3.

    On real profiles f(psi) = psi^2.  No gauge weight makes Re F phase
    invariant, so this system is meant for stationary problems only.
    """
    t1 = _m(1.0 / 6.0, (2,), (1,))
    t2 = _m(1.0 / 6.0, (1,), (2,))
    F = InteractionPotential(1, (t1, t2), parts=())
    return SystemSpec(n, b, (1.0,), (1.0,), (beta,), (1.0,), F)


PRESETS = {"two_wave": two_wave, "three_wave_a": three_wave_a, "three_wave_b": three_wave_b}


# --- algebra ---------------------------------------------------------------

def _collect(monos, l):
    acc = {}
    for m in monos:
        key = (m.zpow, m.cpow)
        acc[key] = acc.get(key, 0j) + m.coeff
    return [Monomial(c, zp, cp) for (zp, cp), c in sorted(acc.items()) if c != 0]


def derive_nonlinearities(F: InteractionPotential) -> list:
    """f_k = dF/dzbar_k + conj(dF/dz_k) as collected monomial lists."""
    for i, t in enumerate(F.terms):
        if t.degree != 3:
            raise ValueError(f"term {i} has degree {t.degree}, expected 3")
    out = []
    e = np.eye(F.l, dtype=int)
    for k in range(F.l):
        monos = []
        for t in F.terms:
            if t.cpow[k]:
                monos.append(Monomial(t.coeff * t.cpow[k], t.zpow, tuple(np.subtract(t.cpow, e[k]))))
            if t.zpow[k]:
                # conj(c z^a zbar^p) = conj(c) zbar^a z^p
                zp = tuple(np.subtract(t.zpow, e[k]))
                monos.append(Monomial(np.conj(t.coeff) * t.zpow[k], t.cpow, zp))
        out.append(_collect(monos, F.l))
    return out


def _eval(terms, z, zb):
    """Evaluate a monomial list with z and zbar treated as independent inputs."""
    z = np.asarray(z)
    zb = np.asarray(zb)
    acc = np.zeros(z.shape[1:], dtype=complex)
    for t in terms:
        v = np.full(z.shape[1:], t.coeff, dtype=complex)
        for j, (a, p) in enumerate(zip(t.zpow, t.cpow)):
            if a:
                v = v * z[j] ** a
            if p:
                v = v * zb[j] ** p
        acc = acc + v
    return acc


def _check_len(z, l):
    z = np.asarray(z, dtype=complex)
    if z.shape[0] != l:
        raise ValueError(f"expected {l} components, got {z.shape[0]}")
    return z


def eval_potential(F: InteractionPotential, z) -> complex:
    """F(z); z has shape (l,) or (l, ...) for batches."""
    z = _check_len(z, F.l)
    v = _eval(F.terms, z, np.conj(z))
    return v[()] if v.ndim == 0 else v


def eval_nonlinearity(fk: Sequence[Monomial], z) -> complex:
    """f_k(z) for one derived monomial list."""
    z = np.asarray(z, dtype=complex)
    if fk and len(fk[0].zpow) != z.shape[0]:
        raise ValueError(f"expected {len(fk[0].zpow)} components, got {z.shape[0]}")
    v = _eval(fk, z, np.conj(z))
    return v[()] if v.ndim == 0 else v


class Nonlinearity:
    """Vectorised evaluator of (f_1, ..., f_l) for fields of shape (l, ...)."""

    def __init__(self, F: InteractionPotential):
        self.F = F
        self.f = derive_nonlinearities(F)

    def __call__(self, u):
        ub = np.conj(u)
        return np.stack([_eval(fk, u, ub) if fk else np.zeros(u.shape[1:], complex) for fk in self.f])

    def potential(self, u):
        return _eval(self.F.terms, u, np.conj(u))


def gauge_residual(spec: SystemSpec, z, theta: float) -> float:
    """|Re F(e^{i sigma theta} z) - Re F(z)|."""
    z = _check_len(z, spec.l)
    ph = np.exp(1j * np.asarray(spec.sigma) * theta)
    ph = ph.reshape((-1,) + (1,) * (z.ndim - 1))
    return np.abs(np.real(eval_potential(spec.F, ph * z)) - np.real(eval_potential(spec.F, z)))


def charge_identity_residual(spec: SystemSpec, z) -> float:
    """|Im sum_k sigma_k f_k(z) conj(z_k)|; vanishes for a valid gauge."""
    z = _check_len(z, spec.l)
    f = Nonlinearity(spec.F)(z)
    s = np.asarray(spec.sigma).reshape((-1,) + (1,) * (z.ndim - 1))
    return np.abs(np.imag(np.sum(s * f * np.conj(z), axis=0)))


# --- hypothesis checks -------------------------------------------------------

@dataclass
class HypothesisResult:
    passed: bool
    residual: float
    witness: np.ndarray | None = None
    note: str = ""


@dataclass
class HypothesisReport:
    results: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.results.values() if r.note != "not checked")

    def to_text(self):
        lines = []
        for key, r in self.results.items():
            status = "not checked" if r.note == "not checked" else ("pass" if r.passed else "FAIL")
            line = f"{key} {status} residual={r.residual:.3e}"
            if r.note and r.note != "not checked":
                line += f" ({r.note})"
            if r.witness is not None:
                line += " witness=" + " ".join(f"{c.real:+.6e}{c.imag:+.6e}j" for c in np.ravel(r.witness))
            lines.append(line)
        return "\n".join(lines) + "\n"


TOL = 1e-12


def _worst(res, samples, tol=TOL, note=""):
    res = np.asarray(res, dtype=float)
    i = int(np.argmax(res)) if res.size else 0
    worst = float(res.max()) if res.size else 0.0
    ok = worst <= tol
    return HypothesisResult(ok, worst, None if ok else samples[:, i], note)


def _derivative_terms(terms, j, conj_var):
    """d/dz_j (conj_var False) or d/dzbar_j (True) of a monomial list."""
    out = []
    for t in terms:
        pw = t.cpow if conj_var else t.zpow
        if pw[j]:
            new = list(pw)
            new[j] -= 1
            if conj_var:
                out.append(Monomial(t.coeff * pw[j], t.zpow, tuple(new)))
            else:
                out.append(Monomial(t.coeff * pw[j], tuple(new), t.cpow))
    return out


def _dual_eval(terms, z, zb, dz, dzb):
    """Value and directional derivative of a monomial list by forward-mode
    dual arithmetic, with z and zbar as independent inputs."""
    val = np.zeros(z.shape[1:], dtype=complex)
    der = np.zeros(z.shape[1:], dtype=complex)
    for t in terms:
        v = np.full(z.shape[1:], t.coeff, dtype=complex)
        d = np.zeros(z.shape[1:], dtype=complex)
        for j, (a, p) in enumerate(zip(t.zpow, t.cpow)):
            for x, dx in ((z[j], dz[j]),) * a + ((zb[j], dzb[j]),) * p:
                v, d = v * x, d * x + v * dx
        val = val + v
        der = der + d
    return val, der


def _ad_wirtinger(F, z, k):
    """dF/dzbar_k + conj(dF/dz_k) from exact real-coordinate derivatives of F."""
    zb = np.conj(z)
    zero = np.zeros_like(z)
    e = zero.copy()
    e[k] = 1.0
    _, Fx = _dual_eval(F.terms, z, zb, e, e)  # z = x + iy: dz/dx = dzbar/dx = 1
    _, Fy = _dual_eval(F.terms, z, zb, 1j * e, -1j * e)
    dzb = 0.5 * (Fx + 1j * Fy)
    dz = 0.5 * (Fx - 1j * Fy)
    return dzb + np.conj(dz)


def _random_fields(grid, l, count, rng):
    r = grid.r
    out = []
    for _ in range(count):
        amp = rng.uniform(0.2, 2.0, size=(l, 1))
        width = rng.uniform(0.5, 3.0, size=(l, 1))
        center = rng.uniform(0.0, 3.0, size=(l, 1))
        phase = rng.uniform(-3, 3, size=(l, 1)) * r[None] ** 2 / 10 + rng.uniform(0, 2 * np.pi, size=(l, 1))
        sign = rng.choice([-1.0, 1.0], size=(l, 1))
        out.append(sign * amp * np.exp(-((r[None] - center) / width) ** 2) * np.exp(1j * phase))
    return out


def check_hypotheses(spec: SystemSpec, sample_count: int = 1000, seed: int = 0) -> HypothesisReport:
    """Sampled checks of H1-H8 and the charge identity; failures carry a witness."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    from .grid import radial_grid, weighted_integral

    rng = np.random.default_rng(seed)
    l, F = spec.l, spec.F
    nl = Nonlinearity(F)
    z = rng.normal(size=(l, sample_count)) + 1j * rng.normal(size=(l, sample_count))
    scale2 = np.sum(np.abs(z) ** 2, axis=0)
    csum = sum(abs(t.coeff) for t in F.terms) or 1.0
    rep = HypothesisReport()

    # H1: f_k(0) = 0
    f0 = nl(np.zeros((l, 1), complex))[:, 0]
    rep.results["H1"] = HypothesisResult(bool(np.all(np.abs(f0) <= TOL)), float(np.abs(f0).max()))

    # H2: Lipschitz bound on the first derivatives of f_k
    w = rng.normal(size=(l, sample_count)) + 1j * rng.normal(size=(l, sample_count))
    dist = np.sum(np.abs(z - w), axis=0)
    worst_ratio = 0.0
    bound = 0.0
    for fk in nl.f:
        for j in range(l):
            for cv in (False, True):
                dt = _derivative_terms(fk, j, cv)
                if not dt:
                    continue
                bound = max(bound, sum(abs(t.coeff) for t in dt))
                diff = np.abs(_eval(dt, z, np.conj(z)) - _eval(dt, w, np.conj(w)))
                worst_ratio = max(worst_ratio, float(np.max(diff / dist)))
    excess = max(0.0, worst_ratio - bound) / (bound or 1.0)
    rep.results["H2"] = HypothesisResult(excess <= 1e-12, excess, None, f"largest observed constant {worst_ratio:.6g}")

    # H3: symbolic f_k against exact derivatives of F in the real coordinates
    res3 = np.zeros(sample_count)
    for k in range(l):
        fs = _eval(nl.f[k], z, np.conj(z)) if nl.f[k] else np.zeros(sample_count, complex)
        cs = _ad_wirtinger(F, z, k)
        res3 = np.maximum(res3, np.abs(fs - cs) / (csum * scale2))
    rep.results["H3"] = _worst(res3, z)

    # H4: gauge invariance of Re F and the charge identity
    theta = rng.uniform(-np.pi, np.pi, size=sample_count)
    Fabs = np.abs(eval_potential(F, z)) + csum * scale2 ** 1.5 * 1e-3
    ph = np.exp(1j * np.outer(spec.sigma, theta))
    g = np.abs(np.real(eval_potential(F, ph * z)) - np.real(eval_potential(F, z))) / Fabs
    rep.results["H4"] = _worst(g, z)
    ci = charge_identity_residual(spec, z)
    rep.results["charge_identity"] = _worst(ci, z, tol=1e-13)

    # H5: homogeneity of degree three
    lam = rng.uniform(0.0, 10.0, size=sample_count)
    lam[lam == 0] = 1.0
    Fz = eval_potential(F, z)
    res5 = np.abs(eval_potential(F, lam * z) - lam ** 3 * Fz) / (lam ** 3 * (np.abs(Fz) + csum * scale2 ** 1.5 * 1e-3))
    rep.results["H5"] = _worst(res5, z)

    # H6: |Re int w F(u)| <= int w F(|u|) on sampled radial fields
    grid = radial_grid(spec.n, 512, 12.0, spec.b)
    worst6, wit6 = 0.0, None
    for u in _random_fields(grid, l, min(sample_count, 64), rng):
        lhs = abs(weighted_integral(grid, np.real(nl.potential(u)), spec.b))
        rhs = weighted_integral(grid, np.real(nl.potential(np.abs(u).astype(complex))), spec.b)
        ex = max(0.0, lhs - rhs) / (abs(rhs) + 1e-300)
        if ex > worst6:
            worst6, wit6 = ex, u[:, 0]
    rep.results["H6"] = HypothesisResult(worst6 <= TOL, worst6, wit6, "sampled smooth radial fields")

    # H7: F real on R^l, f_k >= 0 on the non-negative cone
    yr = rng.normal(size=(l, sample_count))
    Fy = eval_potential(F, yr.astype(complex))
    res7 = np.abs(np.imag(Fy)) / (csum * np.sum(yr ** 2, 0) ** 1.5)
    yp = np.abs(yr)
    fy = nl(yp.astype(complex))
    s2 = np.sum(yp ** 2, 0)
    res7 = np.maximum(res7, np.max(np.abs(np.imag(fy)), 0) / (csum * s2))
    res7 = np.maximum(res7, np.max(np.maximum(-np.real(fy), 0.0), 0) / (csum * s2))
    rep.results["H7"] = _worst(res7, yr.astype(complex))

    # H8: supermodularity and vanishing on coordinate hyperplanes of each part
    if F.parts is None:
        rep.results["H8"] = HypothesisResult(True, 0.0, None, "not checked")
    elif not F.parts:
        rep.results["H8"] = HypothesisResult(True, 0.0)
    else:
        worst8, wit8 = 0.0, None
        for mono, var in F.parts:
            fs = lambda y: np.real(_eval([mono], y, y))
            y = np.abs(rng.normal(size=(l, sample_count)))
            for i in var:
                for j in var:
                    if i == j:
                        continue
                    hh = rng.uniform(0.0, 2.0, size=sample_count)
                    kk = rng.uniform(0.0, 2.0, size=sample_count)
                    ei = np.zeros((l, 1))
                    ei[i] = 1
                    ej = np.zeros((l, 1))
                    ej[j] = 1
                    a = fs(y + hh * ei + kk * ej) + fs(y)
                    c = fs(y + hh * ei) + fs(y + kk * ej)
                    sc = np.abs(a) + np.abs(c) + 1e-300
                    ex = np.maximum(c - a, 0.0) / sc
                    m = int(np.argmax(ex))
                    if ex[m] > worst8:
                        worst8, wit8 = float(ex[m]), y[:, m]
            for j in var:
                y0 = y.copy()
                y0[j] = 0.0
                v = np.abs(fs(y0)) / (abs(mono.coeff) * np.sum(y ** 2, 0) ** 1.5)
                m = int(np.argmax(v))
                if v[m] > worst8:
                    worst8, wit8 = float(v[m]), y0[:, m]
        rep.results["H8"] = HypothesisResult(worst8 <= TOL, worst8, None if worst8 <= TOL else wit8)
    return rep
