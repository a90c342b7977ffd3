"""Radial ground states of the stationary system

    -gamma_k Lap psi_k + b_k psi_k = |x|^-b f_k(psi),   b_k = alpha_k sigma_k omega + beta_k,

by Petviashvili iteration with one global stabilizing factor.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from . import functionals as fn
from .grid import Field, RadialGrid, write_snapshot
from .interaction import Nonlinearity, SystemSpec


class GroundStateError(RuntimeError):
    """Iteration failed; ``history`` holds the residual per iteration."""

    def __init__(self, reason, history=()):
        super().__init__(reason)
        self.reason = reason
        self.history = list(history)


@dataclass
class GroundStateOptions:
    max_iterations: int = 2000
    tol: float = 1e-8
    stabilizer_tol: float = 1e-10
    amplitude: object = 1.0     # scalar or one per component
    width: object = 1.0
    damping: float = 0.8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tol <= 0 or self.stabilizer_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class GroundStateResult:
    psi: Field
    omega: float
    bk: np.ndarray
    iterations: int
    residual: np.ndarray
    stabilizer: float
    report: fn.FunctionalReport
    pohozaev: tuple
    history: list = field(default_factory=list, repr=False)

    @property
    def profiles(self):
        return np.real(self.psi.data)

    def to_text(self):
        lines = [f"omega={self.omega!r}",
                 "b_k=" + ",".join(repr(float(x)) for x in self.bk),
                 f"iterations={self.iterations}",
                 "residual=" + ",".join(repr(float(x)) for x in self.residual),
                 f"stabilizer={self.stabilizer!r}",
                 "pohozaev=" + ",".join(repr(float(x)) for x in self.pohozaev)]
        return "\n".join(lines) + "\n" + self.report.to_text()

    def save(self, path):
        """Snapshot at ``path`` plus a text sidecar ``path + '.txt'``."""
        write_snapshot(path, self.psi)
        tmp = path + ".txt.tmp"
        with open(tmp, "w") as fh:
            fh.write(self.to_text())
        os.replace(tmp, path + ".txt")


def _per_component(v, l, name):
    a = np.broadcast_to(np.asarray(v, dtype=float), (l,)).copy()
    if a.shape != (l,):
        raise ValueError(f"{name} needs {l} entries")
    return a


class _Factor:
    """LU factors of gamma S + c W in LAPACK band storage."""

    def __init__(self, grid: RadialGrid, gamma, shift):
        ab = np.zeros((7, grid.N))
        ab[2:] = grid.banded(gamma, shift)
        self.lu, self.piv, info = lapack.dgbtrf(ab, 2, 2)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded factorization failed (info={info})")

    def solve(self, rhs):
        x, info = lapack.dgbtrs(self.lu, 2, 2, rhs, self.piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed (info={info})")
        return x


def _residuals(grid, gamma, bk, psi, rhs):
    res = gamma[:, None] * grid.stiffness(psi) + bk[:, None] * grid.W * psi - rhs
    return np.sqrt(np.sum(res ** 2 / grid.W, axis=-1))


def solve(spec: SystemSpec, omega: float, grid: RadialGrid, opts: GroundStateOptions | None = None,
          initial=None) -> GroundStateResult:
    """Petviashvili iteration for the radial ground state at frequency omega.

    Parameters
    ----------
    initial : array (l, N), optional
        Starting profiles; Gaussians a_k exp(-(r/width_k)^2) otherwise.

    Raises
    ------
    ValueError
        if some b_k <= 0.
    GroundStateError
        on collapse to zero ("trivial attractor") or non-convergence.
    """
    opts = opts or GroundStateOptions()
    if spec.n != grid.n:
        raise ValueError(f"grid dimension {grid.n} differs from system dimension {spec.n}")
    bk = fn.frequency_masses(spec, omega)
    l = spec.l
    grid = grid.tuned(spec.b)
    gamma = np.asarray(spec.gamma, dtype=float)
    facs = [_Factor(grid, gamma[k], bk[k]) for k in range(l)]
    nl = Nonlinearity(spec.F)
    if initial is None:
        a = _per_component(opts.amplitude, l, "amplitude")
        wd = _per_component(opts.width, l, "width")
        psi = a[:, None] * np.exp(-(grid.r[None, :] / wd[:, None]) ** 2)
    else:
        psi = np.array(np.real(initial), dtype=float).reshape(l, grid.N)
    Wb = grid.Wb
    history = []
    S = np.nan
    for it in range(1, opts.max_iterations + 1):
        if np.sqrt(np.sum(psi ** 2 * grid.W)) < 1e-12:
            raise GroundStateError("trivial attractor", history)
        rhs = Wb * np.real(nl(psi))
        top = float(np.sum(gamma[:, None] * psi * grid.stiffness(psi)) + np.sum(bk[:, None] * grid.W * psi ** 2))
        bot = float(np.sum(rhs * psi))
        res = _residuals(grid, gamma, bk, psi, rhs)
        history.append(float(res.max()))
        if not np.isfinite(top) or not np.isfinite(bot):
            raise GroundStateError("iteration diverged", history)
        if bot <= 0.0 or abs(bot) < 1e-300:
            raise GroundStateError("trivial attractor", history)
        S = top / bot
        if res.max() <= opts.tol and abs(S - 1.0) <= opts.stabilizer_tol:
            break
        new = np.stack([facs[k].solve(rhs[k]) for k in range(l)]) * S ** 2
        psi = new if opts.damping == 1.0 else (1.0 - opts.damping) * psi + opts.damping * new
    else:
        raise GroundStateError(f"no convergence after {opts.max_iterations} iterations "
                               f"(residual {history[-1]:.3e}, |S-1| {abs(S - 1.0):.3e})", history)
    out = Field(grid, psi)
    rep = fn.full_report(spec, out, omega)
    return GroundStateResult(psi=out, omega=float(omega), bk=bk, iterations=it, residual=res,
                             stabilizer=S, report=rep, pohozaev=fn.pohozaev_residuals(spec, out, omega),
                             history=history)


@dataclass
class Certification:
    items: dict   # name -> (passed, value)

    @property
    def passed(self):
        return all(p for p, _ in self.items.values())

    def to_text(self):
        return "".join(f"{k}: {'PASS' if p else 'FAIL'} ({v:.3e})\n" for k, (p, v) in self.items.items())


def certify(spec: SystemSpec, gs: GroundStateResult, tol: float = 1e-8) -> Certification:
    """Check residual, Pohozaev identities, sign and monotonicity, and the xi_1 gap
    for a ground-state candidate (which need not come from ``solve``)."""
    grid = gs.psi.grid
    bk = fn.frequency_masses(spec, gs.omega)
    psi = np.real(gs.psi.data)
    rhs = grid.Wb * np.real(Nonlinearity(spec.F)(psi))
    res = float(_residuals(grid, np.asarray(spec.gamma, float), bk, psi, rhs).max())
    poh = max(fn.pohozaev_residuals(spec, gs.psi, gs.omega))
    neg = float(max(0.0, -psi.min()))
    rise = float(max(0.0, np.diff(psi, axis=-1).max()))
    th = fn.thresholds_from_groundstate(spec, gs)
    items = {
        "residual": (res <= 10 * tol, res),
        "pohozaev": (poh <= 1e-3, poh),
        "nonnegative": (neg <= 1e-10, neg),
        "monotone": (rise <= 1e-8, rise),
        "xi1_gap": (th.xi1_gap <= 1e-4, th.xi1_gap),
    }
    return Certification(items)


def omega_sweep(spec: SystemSpec, omegas, grid: RadialGrid, opts: GroundStateOptions | None = None):
    """Solve for each omega; returns (omega, Qw, xi1) rows, with failures as
    (omega, nan, nan, reason)."""
    rows = []
    for om in omegas:
        try:
            gs = solve(spec, om, grid, opts)
        except (GroundStateError, ValueError) as exc:
            rows.append((float(om), float("nan"), float("nan"), str(exc)))
            continue
        th = fn.thresholds_from_groundstate(spec, gs)
        rows.append((float(om), th.Qw, th.xi1))
    return rows
