"""Global existence versus blow-up: threshold classifier, bootstrap constant,
Pohozaev functional, virial cutoff and localized virial diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import functionals as fn
from .grid import Field, RadialGrid
from .interaction import Nonlinearity, SystemSpec

VERDICTS = ("GlobalSubcritical", "GlobalMassCritical", "GlobalIntercritical", "BlowUpCandidate", "Indeterminate")


def signed_power(x: float, p: float) -> float:
    """sign(x) |x|^p; extends x^p to negative x (negative energies)."""
    return math.copysign(abs(x) ** p, x) if x != 0 else 0.0


@dataclass
class Classification:
    verdict: str
    s_c: float
    energy_side: float          # E(u0)^s_c Q(u0)^(1-s_c)
    energy_threshold: float     # E_script(psi)^s_c Q(psi)^(1-s_c)
    kinetic_side: float         # K(u0)^s_c Q(u0)^(1-s_c)
    kinetic_threshold: float    # K(psi)^s_c Q(psi)^(1-s_c)
    charge: float
    charge_threshold: float
    radial: bool
    note: str = ""

    @property
    def energy_margin(self):
        """Positive when the energy condition holds."""
        return self.energy_threshold - self.energy_side

    @property
    def kinetic_margin(self):
        """Positive for the global side, negative for the blow-up side."""
        return self.kinetic_threshold - self.kinetic_side

    @property
    def charge_margin(self):
        return self.charge_threshold - self.charge

    def to_text(self):
        keys = ["verdict", "s_c", "energy_side", "energy_threshold", "energy_margin",
                "kinetic_side", "kinetic_threshold", "kinetic_margin",
                "charge", "charge_threshold", "charge_margin", "radial", "note"]
        out = []
        for k in keys:
            v = getattr(self, k)
            out.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        return "\n".join(out) + "\n"


def classify(spec: SystemSpec, u0: Field, thresholds: fn.ThresholdSet, radial: bool = True) -> Classification:
    """Compare u0 against the ground-state thresholds.

    ``thresholds`` must come from a ground state at omega = 1 with all beta_k = 0.
    Verdicts follow the hypothesis range of each result; anything else is
    Indeterminate with signed margins.  Negative energies enter through
    ``signed_power``.
    """
    if thresholds.n is not None and (thresholds.n != spec.n or thresholds.l != spec.l
                                      or abs(thresholds.b - spec.b) > 1e-14):
        raise ValueError(f"thresholds are for (n={thresholds.n}, b={thresholds.b}, l={thresholds.l}), "
                         f"system is (n={spec.n}, b={spec.b}, l={spec.l})")
    if u0.l != spec.l:
        raise ValueError("field and system have different component counts")
    n, b = spec.n, spec.b
    d = n + 2.0 * b
    rep = fn.energy(spec, u0)
    s = rep.s_c
    es = signed_power(rep.E, s) * rep.Q ** (1.0 - s)
    et = signed_power(thresholds.E_script, s) * thresholds.Q ** (1.0 - s)
    ks = rep.K ** s * rep.Q ** (1.0 - s)
    kt = thresholds.K ** s * thresholds.Q ** (1.0 - s)
    out = Classification("Indeterminate", s, es, et, ks, kt, rep.Q, thresholds.Q, bool(radial))
    in_range = n >= 2 and d < 6.0 and 0.0 < b < min(2.0, n / 2.0)
    if not in_range:
        out.note = "parameters outside the range of the global/blow-up results"
        return out
    if 2 <= n <= 3 and d < 4.0:
        out.verdict = "GlobalSubcritical"
    elif n == 3 and abs(2.0 * b - 1.0) < 1e-14:
        if rep.Q < thresholds.Q:
            out.verdict = "GlobalMassCritical"
        else:
            out.note = "charge not below the ground-state charge"
    elif 4.0 < d < 6.0:
        if not es < et:
            out.note = "energy condition fails"
        elif ks < kt and b < 1.0:
            out.verdict = "GlobalIntercritical"
        elif ks > kt and radial:
            out.verdict = "BlowUpCandidate"
        elif ks > kt:
            out.note = "blow-up side but data not radial"
        elif ks < kt:
            out.note = "global side needs b < 1"
        else:
            out.note = "kinetic comparison is an equality"
    else:
        out.note = "no result covers this (n, b)"
    return out


def bootstrap_gamma(alpha: float, beta: float, q: float):
    """For G(t) <= a + beta G(t)^q: gamma = (beta q)^(-1/(q-1)) and the bound
    (1 - 1/q) gamma that a must stay below.

    Returns
    -------
    (gamma, alpha_bound)
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not q > 1:
        raise ValueError("q must exceed 1")
    g = (beta * q) ** (-1.0 / (q - 1.0))
    return g, (1.0 - 1.0 / q) * g


def bootstrap_threshold(n: int, b: float, xi1: float, Q0: float):
    """gamma of the bootstrap for sum gamma_k||grad u_k||^2 with
    beta = (2/xi1) Q0^((6-n-2b)/4) and q = (n+2b)/4."""
    d = n + 2.0 * b
    return bootstrap_gamma(0.0, 2.0 / xi1 * Q0 ** ((6.0 - d) / 4.0), d / 4.0)


def pohozaev_functional(spec: SystemSpec, fld: Field, both: bool = False):
    """T_n = K - (n+2b)/2 P.

    With ``both`` returns (direct, recombined, relative gap), where the second
    form is (n+2b)/4 E - (n+2b-4)/4 K - (n+2b)/4 L.
    """
    rep = fn.energy(spec, fld)
    d = spec.n + 2.0 * spec.b
    direct = rep.K - 0.5 * d * rep.P
    if not both:
        return direct
    alt = 0.25 * d * rep.E - 0.25 * (d - 4.0) * rep.K - 0.25 * d * rep.L
    scale = max(abs(rep.K), abs(rep.L), abs(rep.P) * d, 1e-300)
    return direct, alt, abs(direct - alt) / scale


def delta_margin(spec: SystemSpec, fld: Field, thresholds: fn.ThresholdSet | None = None) -> float:
    """-T_n(field): positive on the blow-up side."""
    if thresholds is not None and thresholds.n is not None and thresholds.n != spec.n:
        raise ValueError("thresholds and system dimensions differ")
    return -pohozaev_functional(spec, fld)


# --- cutoff ----------------------------------------------------------------

def _transition():
    # p on [0, 1]: p = 1, p' = 2, p'' = 2, p''' = 0 at 0; p..p''' = 0 at 1
    A = np.zeros((8, 8))
    for d in range(4):
        for k in range(d, 8):
            A[d, k] = math.factorial(k) / math.factorial(k - d) * (0.0 ** (k - d) if k > d else 1.0)
            A[4 + d, k] = math.factorial(k) / math.factorial(k - d)
    c = np.linalg.solve(A, np.array([1.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
    return np.polynomial.Polynomial(c)


_P = _transition()
_DP = [_P.deriv(m) for m in range(5)]


def cutoff_derivatives(r, R):
    """phi and its first four radial derivatives at r."""
    r = np.asarray(r, dtype=float)
    out = np.zeros((5,) + r.shape)
    inner = r <= R
    mid = (r > R) & (r < 2.0 * R)
    out[0][inner] = r[inner] ** 2
    out[1][inner] = 2.0 * r[inner]
    out[2][inner] = 2.0
    s = (r[mid] - R) / R
    for m in range(5):
        out[m][mid] = R ** (2 - m) * _DP[m](s)
    return out


class CutoffBoundError(ValueError):
    """A cutoff violates one of its required bounds; ``cutoff`` holds the instance."""

    def __init__(self, msg, cutoff):
        super().__init__(msg)
        self.cutoff = cutoff


@dataclass
class CutoffFunction:
    R: float
    n: int
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    lap: np.ndarray
    bilap: np.ndarray
    d4phi: np.ndarray
    checks: dict = field(default_factory=dict)   # name -> (worst value, limit, ok)

    @property
    def C(self):
        """Recorded constant in |Lap^2 phi| <= C / R^2."""
        return float(np.abs(self.bilap).max() * self.R ** 2)

    @property
    def ok(self):
        return all(c[2] for c in self.checks.values())

    def to_text(self):
        lines = [f"R={self.R!r}", f"C={self.C!r}"]
        lines += [f"{k}: {'PASS' if ok else 'FAIL'} worst={v!r} limit={lim!r}" for k, (v, lim, ok) in self.checks.items()]
        return "\n".join(lines) + "\n"


def build_cutoff(grid: RadialGrid, R: float | None = None, strict: bool = True, tol: float = 1e-10) -> CutoffFunction:
    """phi = r^2 on [0, R], a degree-7 Hermite transition on [R, 2R], 0 beyond.

    The bounds 0 <= phi <= r^2 and phi'' <= 2 are checked at every node, and
    |Lap^2 phi| R^2 and phi'''' R^2 are recorded.  With ``strict`` a violated
    bound raises CutoffBoundError.

    The transition with these matching conditions has phi'' up to about 13.4
    near r = 2R.  No C^1 function equal to R^2 at R with zero value and slope
    at 2R can keep phi'' <= 2 on [R, 2R], so strict construction always fails;
    use ``strict=False`` to obtain the cutoff with the violation recorded.
    """
    if R is None:
        R = grid.r_max / 4.0
    R = float(R)
    if not R > 0 or not 2.0 * R < grid.r_max:
        raise ValueError(f"need 0 < 2R < r_max (R={R}, r_max={grid.r_max})")
    r = grid.r
    f0, f1, f2, f3, f4 = cutoff_derivatives(r, R)
    n = grid.n
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = np.where(r > 0, f2 + (n - 1) * f1 / np.where(r > 0, r, 1.0), n * f2)
        # Lap^2 of a radial function through derivatives of g = Lap phi
        rr = np.where(r > 0, r, 1.0)
        g1 = f3 + (n - 1) * (f2 / rr - f1 / rr ** 2)
        g2 = f4 + (n - 1) * (f3 / rr - 2.0 * f2 / rr ** 2 + 2.0 * f1 / rr ** 3)
        bilap = np.where(r > 0, g2 + (n - 1) * g1 / rr, 0.0)
    bilap[r <= R] = 0.0   # phi = r^2 there
    lap[r <= R] = 2.0 * n
    cf = CutoffFunction(R, n, r, f0, f1, f2, lap, bilap, f4)
    cf.checks = {
        "phi >= 0": (float(-f0.min()), tol, bool(f0.min() >= -tol)),
        "phi <= r^2": (float((f0 - r ** 2).max()), tol, bool((f0 - r ** 2).max() <= tol)),
        "phi'' <= 2": (float(f2.max()), 2.0 + tol, bool(f2.max() <= 2.0 + tol)),
        "phi'''' R^2 <= 4": (float(f4.max() * R ** 2), 4.0, bool(f4.max() * R ** 2 <= 4.0 + tol)),
    }
    if strict and not cf.ok:
        bad = [k for k, c in cf.checks.items() if not c[2]]
        raise CutoffBoundError("cutoff bounds violated: " + "; ".join(
            f"{k} (worst {cf.checks[k][0]:.6g})" for k in bad), cf)
    return cf


# --- virial ----------------------------------------------------------------

@dataclass
class VirialSample:
    t: float
    V: float
    R: float
    forcing: float    # sum (2 alpha_k / gamma_k) Im int phi |x|^-b f_k conj(u_k)
    delta: float      # -T_n

    @property
    def rhs(self):
        """Right side of dV/dt = R - forcing."""
        return self.R - self.forcing


def _virial_parts(spec, fld, cutoff):
    g = fld.grid
    if not isinstance(g, RadialGrid):
        raise TypeError("virial diagnostics need a radial field")
    g = g.tuned(spec.b)
    if g.N != cutoff.r.size or abs(g.r[-1] - cutoff.r[-1]) > 1e-12 * g.r_max:
        raise ValueError("cutoff built on a different grid")
    u = fld.data
    al = np.asarray(spec.alpha, float)
    ga = np.asarray(spec.gamma, float)
    phi = cutoff.phi
    V = float(np.sum((al ** 2 / ga)[:, None] * phi * g.W * np.abs(u) ** 2))
    Su = g.stiffness(u)
    R = float(2.0 * np.sum(al * np.imag(np.sum(np.conj(u) * phi * Su, axis=-1))))
    f = Nonlinearity(spec.F)(u)
    forcing = float(np.sum((2.0 * al / ga) * np.imag(np.sum(phi * g.Wb * f * np.conj(u), axis=-1))))
    return V, R, forcing


def virial_sample(spec: SystemSpec, fld: Field, cutoff: CutoffFunction, t: float = 0.0) -> VirialSample:
    """V = int phi sum (alpha_k^2/gamma_k)|u_k|^2 and R = 2 sum alpha_k Im int phi' d_r u_k conj(u_k).

    R is evaluated as 2 sum alpha_k Im <phi u_k, -Lap_h u_k>, which equals the
    radial form after summation by parts and makes the discrete identity
    dV/dt = R - forcing exact for the semi-discrete flow.
    """
    V, R, forcing = _virial_parts(spec, fld, cutoff)
    return VirialSample(float(t), V, R, forcing, delta_margin(spec, fld))


def virial_observer(spec: SystemSpec, cutoff: CutoffFunction):
    """Observer for evolution.evolve adding V, R and delta columns."""
    def obs(fld, t):
        s = virial_sample(spec, fld, cutoff, t)
        return {"V": s.V, "R": s.R, "forcing": s.forcing, "delta": s.delta}
    return obs


def virial_consistency(fields, cutoff: CutoffFunction | None = None, spec: SystemSpec | None = None) -> float:
    """Max over interior samples of |centered dV/dt - (R - forcing)|.

    ``fields`` is a list of (t, Field) at uniform spacing, an evolution trace
    with kept fields, or a trace carrying the V, R and forcing columns of
    ``virial_observer`` (then cutoff and spec are not needed).
    """
    pairs = getattr(fields, "fields", fields)
    if not len(pairs) and hasattr(fields, "columns") and "V" in fields.columns:
        t = fields["t"]
        V = fields["V"]
        rhs = fields["R"] - fields["forcing"]
    else:
        if len(pairs) < 3:
            raise ValueError("need at least 3 stored fields")
        t = np.array([p[0] for p in pairs])
        parts = [_virial_parts(spec, f, cutoff) for _, f in pairs]
        V = np.array([p[0] for p in parts])
        rhs = np.array([p[1] - p[2] for p in parts])
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    dts = np.diff(t)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(abs(dts[0]), 1e-300):
        raise ValueError("samples are not uniformly spaced")
    dV = (V[2:] - V[:-2]) / (2.0 * dts[0])
    return float(np.max(np.abs(dV - rhs[1:-1])))


def delta_check(trace, column: str = "delta"):
    """Sampled negativity of T_n: returns (ok, worst) with worst the minimum of
    delta(t) - |delta(0)|/2 over samples after t = 0."""
    d = np.asarray(trace[column])
    if d.size < 2:
        return True, float("inf")
    worst = float(np.min(d[1:] - 0.5 * abs(d[0])))
    return worst >= 0.0, worst
