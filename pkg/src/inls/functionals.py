"""Scalar functionals of a field: charge, energy and its parts, action,
Weinstein quotient, criticality index, Pohozaev residuals and the sharp
Gagliardo-Nirenberg constants obtained from a ground state."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Field, RadialGrid, gradient_norm2, l2_norm2, weighted_integral
from .interaction import Nonlinearity, SystemSpec


@dataclass
class FunctionalReport:
    Q: float
    K: float
    L: float
    P: float
    E: float
    s_c: float
    regime: str
    I: float | None = None
    J: float | None = None
    omega: float | None = None
    extra: dict = field(default_factory=dict)

    def to_text(self):
        """One functional per line, key=value."""
        keys = ["Q", "K", "L", "P", "E", "I", "J", "omega", "s_c", "regime"]
        lines = [f"{k}={_fmt(getattr(self, k))}" for k in keys]
        lines += [f"{k}={_fmt(v)}" for k, v in self.extra.items()]
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return "absent"
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(repr(float(x)) for x in np.ravel(v))
    return repr(float(v))


def _grid_for(spec, fld):
    g = fld.grid
    return g.tuned(spec.b) if isinstance(g, RadialGrid) else g


def norms2(spec: SystemSpec, fld: Field):
    """Per-component squared L^2 and gradient norms."""
    g = _grid_for(spec, fld)
    return l2_norm2(g, fld.data), gradient_norm2(g, fld.data)


def potential_integral(spec: SystemSpec, fld: Field) -> float:
    """P = Re int |x|^-b F(u)."""
    g = _grid_for(spec, fld)
    return weighted_integral(g, np.real(Nonlinearity(spec.F).potential(fld.data)), spec.b)


def charge(spec: SystemSpec, fld: Field) -> float:
    """Q = sum alpha_k sigma_k ||u_k||^2."""
    m2, _ = norms2(spec, fld)
    return float(np.dot(np.multiply(spec.alpha, spec.sigma), m2))


def critical_index(n: int, b: float):
    """s_c = (n + 2b - 4) / 2 and the regime label."""
    s = 0.5 * (n + 2.0 * b - 4.0)
    d = n + 2.0 * b
    if abs(d - 4.0) < 1e-12:
        reg = "L2-critical"
    elif d < 4.0:
        reg = "L2-subcritical"
    elif abs(d - 6.0) < 1e-12:
        reg = "H1-critical"
    elif d < 6.0:
        reg = "intercritical"
    else:
        reg = "H1-supercritical"
    return s, reg


def energy(spec: SystemSpec, fld: Field) -> FunctionalReport:
    """K, L, P and E = K + L - 2P (plus Q and the regime)."""
    m2, g2 = norms2(spec, fld)
    K = float(np.dot(spec.gamma, g2))
    L = float(np.dot(spec.beta, m2))
    P = potential_integral(spec, fld)
    Q = float(np.dot(np.multiply(spec.alpha, spec.sigma), m2))
    s, reg = critical_index(spec.n, spec.b)
    return FunctionalReport(Q=Q, K=K, L=L, P=P, E=K + L - 2.0 * P, s_c=s, regime=reg)


def frequency_masses(spec: SystemSpec, omega: float):
    """b_k = alpha_k sigma_k omega + beta_k; all must be positive."""
    bk = np.multiply(spec.alpha, spec.sigma) * omega + np.asarray(spec.beta)
    bad = np.nonzero(bk <= 0)[0]
    if bad.size:
        raise ValueError(f"b_k = alpha_k sigma_k omega + beta_k must be positive; fails for k={int(bad[0])}")
    return bk


def mass_term(spec: SystemSpec, fld: Field, omega: float) -> float:
    """The frequency-weighted mass sum b_k ||psi_k||^2."""
    m2, _ = norms2(spec, fld)
    return float(np.dot(frequency_masses(spec, omega), m2))


def action(spec: SystemSpec, fld: Field, omega: float) -> float:
    """I = (K + sum b_k ||psi_k||^2) / 2 - P."""
    bk = frequency_masses(spec, omega)
    m2, g2 = norms2(spec, fld)
    K = float(np.dot(spec.gamma, g2))
    return 0.5 * (K + float(np.dot(bk, m2))) - potential_integral(spec, fld)


def weinstein(spec: SystemSpec, fld: Field, omega: float):
    """J = Qw^((6-n-2b)/4) K^((n+2b)/4) / P with Qw the frequency-weighted mass;
    None when P vanishes."""
    P = potential_integral(spec, fld)
    if P == 0.0:
        return None
    m2, g2 = norms2(spec, fld)
    K = float(np.dot(spec.gamma, g2))
    Qw = float(np.dot(frequency_masses(spec, omega), m2))
    d = spec.n + 2.0 * spec.b
    return Qw ** ((6.0 - d) / 4.0) * K ** (d / 4.0) / P


def full_report(spec: SystemSpec, fld: Field, omega: float | None = None) -> FunctionalReport:
    rep = energy(spec, fld)
    if omega is not None:
        rep.omega = omega
        rep.I = action(spec, fld, omega)
        rep.J = weinstein(spec, fld, omega)
        rep.extra["Qw"] = mass_term(spec, fld, omega)
    return rep


def pohozaev_residuals(spec: SystemSpec, psi: Field, omega: float):
    """Relative residuals of P = 2I, K = (n+2b) I and Qw = (6-n-2b) I.

    Absolute values are returned when I vanishes.
    """
    bk = frequency_masses(spec, omega)
    m2, g2 = norms2(spec, psi)
    K = float(np.dot(spec.gamma, g2))
    Qw = float(np.dot(bk, m2))
    P = potential_integral(spec, psi)
    I = 0.5 * (K + Qw) - P
    d = spec.n + 2.0 * spec.b
    r1, r2, r3 = abs(P - 2.0 * I), abs(K - d * I), abs(Qw - (6.0 - d) * I)
    if I == 0.0:
        return r1, r2, r3
    return r1 / abs(I), r2 / abs(K), r3 / abs(Qw)


def xi1_closed_form(n: int, b: float, Qw: float) -> float:
    """Infimum of the Weinstein quotient expressed through the ground-state mass term."""
    d = n + 2.0 * b
    return 0.5 * d ** (d / 4.0) * (6.0 - d) ** ((4.0 - d) / 4.0) * np.sqrt(Qw)


def gn_constant(xi1: float) -> float:
    """Optimal constant of int |x|^-b F <= C Qw^((6-n-2b)/4) K^((n+2b)/4)."""
    return 1.0 / xi1


@dataclass
class ThresholdSet:
    Q: float
    K: float
    E_script: float
    xi1: float
    xi1_direct: float
    C_op: float
    Qw: float
    P: float
    s_c: float
    n: int | None = None
    b: float | None = None
    l: int | None = None

    @property
    def xi1_gap(self):
        return abs(self.xi1 - self.xi1_direct) / abs(self.xi1)

    def to_text(self):
        keys = ["Q", "K", "E_script", "P", "Qw", "xi1", "xi1_direct", "xi1_gap", "C_op", "s_c"]
        return "\n".join(f"{k}={_fmt(getattr(self, k))}" for k in keys) + "\n"


def thresholds_from_groundstate(spec: SystemSpec, gs) -> ThresholdSet:
    """Threshold quantities of a ground state, with xi_1 by both routes."""
    psi, omega = gs.psi, gs.omega
    rep = energy(spec, psi)
    Qw = mass_term(spec, psi, omega)
    xi = xi1_closed_form(spec.n, spec.b, Qw)
    J = weinstein(spec, psi, omega)
    return ThresholdSet(Q=rep.Q, K=rep.K, E_script=rep.K - 2.0 * rep.P, xi1=xi,
                        xi1_direct=J if J is not None else float("nan"), C_op=gn_constant(xi),
                        Qw=Qw, P=rep.P, s_c=rep.s_c, n=spec.n, b=spec.b, l=spec.l)
