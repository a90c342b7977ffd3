"""Radial and Cartesian discretizations, quadrature with the singular weight
|x|^-b, the discrete Laplacian and field snapshots.

The radial operator is written as ``-Delta_h = W^-1 S`` with a symmetric
positive semidefinite pentadiagonal ``S`` and a positive diagonal mass ``W``.
Symmetry makes Crank-Nicolson unitary in the ``W`` inner product and gives a
discrete integration by parts for free.

``S`` starts from a conservative three-point stencil whose face weights are
chosen so that its leading truncation error is exactly ``h^2/12 Delta^2``;
subtracting that term (``S + h^2/12 S W0^-1 S``) leaves a fourth-order
operator away from the origin.  The first dual cell is a small ball whose
radius makes the stencil exact on both ``r^2`` and ``r^(2-b)``, the leading
singular term of every ground state.  The final masses are then defined by
exactness, ``W = -S r^2 / 2n`` and ``W_b = -S r^(2-b) / ((2-b)(n-b))``, so
the weighted mass ``W_b`` is the one the scheme actually sees.
"""
from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn

# Gregory end correction (third order) applied at r_max
_END = np.array([23.0 / 24.0, 7.0 / 6.0, 3.0 / 8.0])


def surface_area(n):
    """Area of the unit sphere in R^n, 2 pi^(n/2) / Gamma(n/2)."""
    return 2.0 * np.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def _origin_radius(h, b):
    # radius of the first dual cell: exact for 1, r^2 and r^(2-b)
    if b == 0.0:
        return h * np.exp(-0.5)
    return h * np.exp(np.log1p(-0.5 * b) / b)


def _banded_matvec(rs, d1, d2, x):
    # difference form: exact zero on constants wherever the row sum rs vanishes
    y = rs * x
    dx = x[..., 1:] - x[..., :-1]
    y[..., :-1] += d1 * dx
    y[..., 1:] -= d1 * dx
    dx = x[..., 2:] - x[..., :-2]
    y[..., :-2] += d2 * dx
    y[..., 2:] -= d2 * dx
    return y


def _assemble(n, h, Ne, b):
    """Bands of the fourth-order operator on Ne nodes plus the base mass."""
    om = surface_area(n)
    r = h * np.arange(Ne)
    rho = r + 0.5 * h
    a = om * rho ** (n - 1) * (1.0 - n * (n - 1) * h * h / (24.0 * rho * rho)) / h
    W0 = om * h * r ** (n - 1)
    c0 = om * _origin_radius(h, b) ** n / n
    a[0] = 2.0 * n * c0 / (h * h)
    W0[0] = c0
    # base tridiagonal S: diagonal s0, first off-diagonal s1 (ghost zero past the end)
    s0 = a.copy()
    s0[1:] += a[:-1]
    s1 = -a[:-1]
    D = 1.0 / W0
    c = h * h / 12.0
    d0 = s0 + c * (s0 * s0 * D)
    d0[1:] += c * s1 * s1 * D[:-1]
    d0[:-1] += c * s1 * s1 * D[1:]
    d1 = s1 + c * (s0[:-1] * D[:-1] * s1 + s1 * D[1:] * s0[1:])
    d2 = c * s1[:-1] * D[1:-1] * s1[1:]
    # row sums vanish analytically; keep them at zero except for the ghost row
    rs = np.zeros(Ne)
    rs[-1] = d0[-1] + d1[-1] + d2[-1]
    rs[-2] = d0[-2] + d1[-2] + d1[-1] + d2[-2]
    return r, rs, d1, d2


def _moment_weights(n, N, r_max, b):
    """Product quadrature for int_0^r_max g(r) r^(n-1-b) dr with piecewise
    quadratic interpolation of g; power-law moments are exact in the first
    two cells and Gauss-Legendre is used on the smooth cells."""
    h = r_max / (N - 1)
    p = n - 1.0 - b
    Wq = np.zeros(N)
    # first two cells, exact moments in units of h
    for j in range(min(2, N - 1)):
        nodes = np.arange(j, j + 3) if j + 2 < N else np.arange(j - 1, j + 2)
        V = np.vander(nodes.astype(float), 3, increasing=True)
        k = np.arange(3)
        mom = ((j + 1.0) ** (p + k + 1) - float(j) ** (p + k + 1)) / (p + k + 1)
        Wq[nodes] += np.linalg.solve(V.T, mom) * h ** (p + 1)
    if N > 3:
        t, gw = np.polynomial.legendre.leggauss(10)
        t = 0.5 * (t + 1.0)
        gw = 0.5 * gw
        js = np.arange(2, N - 1)
        last = js + 2 >= N
        rr = (js[:, None] + t[None, :]) * h
        f = rr ** p * gw[None, :] * h
        # local coordinate u = t (nodes 0,1,2) or t+1 (nodes -1,0,1 mapped to 0,1,2)
        u = t[None, :] + last[:, None]
        L0 = 0.5 * (u - 1.0) * (u - 2.0)
        L1 = -u * (u - 2.0)
        L2 = 0.5 * u * (u - 1.0)
        base = js - last
        np.add.at(Wq, base, (L0 * f).sum(1))
        np.add.at(Wq, base + 1, (L1 * f).sum(1))
        np.add.at(Wq, base + 2, (L2 * f).sum(1))
    return surface_area(n) * Wq


class RadialGrid:
    """Uniform radial grid r_j = j h on [0, r_max] for radial functions on R^n.

    Parameters
    ----------
    n : int
        Space dimension, 2 to 5.
    N : int
        Number of nodes (r_0 = 0, r_{N-1} = r_max).
    r_max : float
        Truncation radius; homogeneous Dirichlet data past it.
    b : float
        Singular exponent the origin cell is tuned for.  Only the first dual
        cell depends on it.
    """

    kind = 0

    def __init__(self, n: int, N: int = 4096, r_max: float = 40.0, b: float = 0.0):
        n = int(n)
        N = int(N)
        if not 2 <= n <= 5:
            raise ValueError(f"dimension n={n} outside 2..5")
        if N < 3:
            raise ValueError("a radial grid needs N >= 3 nodes")
        if r_max <= 0:
            raise ValueError("r_max must be positive")
        if not 0.0 <= b < min(2.0, n):
            raise ValueError(f"origin tuning exponent b={b} out of range")
        self.n, self.N, self.r_max, self.b = n, N, float(r_max), float(b)
        self.h = self.r_max / (N - 1)
        self.surface = surface_area(n)
        re, rs, d1, d2 = _assemble(n, self.h, N + 4, self.b)
        W = -_banded_matvec(rs, d1, d2, re ** 2)[:N] / (2.0 * n)
        if self.b > 0:
            Wb = -_banded_matvec(rs, d1, d2, re ** (2.0 - self.b))[:N] / ((2.0 - self.b) * (n - self.b))
        else:
            Wb = W.copy()
        W[-3:] *= _END
        Wb[-3:] *= _END
        self.r = re[:N]
        self.W = W
        self.Wb = Wb
        # Dirichlet truncation: couplings to nodes past r_max move into the row sums
        rs = rs[:N].copy()
        rs[N - 2] -= d2[N - 2]
        rs[N - 1] -= d1[N - 1] + d2[N - 1]
        d1, d2 = d1[:N - 1].copy(), d2[:N - 2].copy()
        d0 = rs.copy()
        d0[:-1] -= d1
        d0[1:] -= d1
        d0[:-2] -= d2
        d0[2:] -= d2
        self.bands = (d0, d1, d2)
        self.rowsum = rs
        with np.errstate(divide="ignore"):
            self.w = Wb / W
        if np.any(W <= 0) or np.any(Wb <= 0):
            raise ValueError("non-positive quadrature weight; grid too coarse")
        for arr in (self.r, self.W, self.Wb, self.w):
            arr.setflags(write=False)

    @property
    def shape(self):
        return (self.N,)

    def tuned(self, b: float) -> "RadialGrid":
        """Same nodes with the origin cell tuned for exponent b."""
        if float(b) == self.b:
            return self
        return radial_grid(self.n, self.N, self.r_max, float(b))

    def stiffness(self, x):
        """S x, the symmetric gradient form applied along the last axis."""
        return _banded_matvec(self.rowsum, self.bands[1], self.bands[2], np.asarray(x))

    def banded(self, gamma: float = 1.0, shift: float = 0.0, dtype=float):
        """gamma S + shift W in LAPACK band storage with kl = ku = 2."""
        d0, d1, d2 = self.bands
        ab = np.zeros((5, self.N), dtype=dtype)
        ab[0, 2:] = gamma * d2
        ab[1, 1:] = gamma * d1
        ab[2] = gamma * d0 + shift * self.W
        ab[3, :-1] = gamma * d1
        ab[4, :-2] = gamma * d2
        return ab

    def weights(self, b: float = 0.0):
        """Quadrature weights for int |x|^-b g dx over the ball of radius r_max."""
        if b == 0.0:
            return self.W
        if b == self.b:
            return self.Wb
        return _cached_moment_weights(self.n, self.N, self.r_max, float(b))

    def __repr__(self):
        return f"RadialGrid(n={self.n}, N={self.N}, r_max={self.r_max}, b={self.b})"


@lru_cache(maxsize=32)
def radial_grid(n: int, N: int = 4096, r_max: float = 40.0, b: float = 0.0) -> RadialGrid:
    """Cached RadialGrid constructor (grids are immutable)."""
    return RadialGrid(n, N, r_max, b)


@lru_cache(maxsize=32)
def _cached_moment_weights(n, N, r_max, b):
    w = _moment_weights(n, N, r_max, b)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=32)
def _cell_average(n, b):
    # mean of |y|^-b over the unit cube, split into n pyramids
    t, gw = np.polynomial.legendre.leggauss(40)
    t = 0.5 * (t + 1.0)
    gw = 0.5 * gw
    if n == 1:
        inner = 1.0
    else:
        mesh = np.meshgrid(*([t] * (n - 1)), indexing="ij")
        wts = np.prod(np.meshgrid(*([gw] * (n - 1)), indexing="ij"), axis=0)
        s2 = sum(m * m for m in mesh)
        inner = float((wts * (1.0 + s2) ** (-0.5 * b)).sum())
    radial = 0.5 ** (n - b) / (n - b)
    return 2.0 ** n * n * radial * inner


class CartesianGrid:
    """Periodic box [-L, L)^n with M points per axis.

    Parameters
    ----------
    n : int
        1, 2 or 3.
    L : float
        Half width of the box.
    M : int
        Points per axis, a power of two.
    """

    kind = 1

    def __init__(self, n: int, L: float, M: int):
        n, M = int(n), int(M)
        if n not in (1, 2, 3):
            raise ValueError("Cartesian grids support n = 1, 2, 3")
        if M < 2 or M & (M - 1):
            raise ValueError("M must be a power of two")
        self.n, self.L, self.M = n, float(L), M
        self.h = 2.0 * self.L / M
        self.x = -self.L + self.h * np.arange(M)
        self.k = 2.0 * np.pi * np.fft.fftfreq(M, d=self.h)
        axes = np.meshgrid(*([self.x] * n), indexing="ij")
        self.radius = np.sqrt(sum(a * a for a in axes))
        kk = np.meshgrid(*([self.k] * n), indexing="ij")
        self.k2 = sum(a * a for a in kk)
        self.cell = self.h ** n

    @property
    def shape(self):
        return (self.M,) * self.n

    def singular_weight(self, b: float):
        """|x|^-b at the nodes; the origin node gets the cell average."""
        with np.errstate(divide="ignore"):
            w = self.radius ** (-b)
        w[self.radius == 0] = self.h ** (-b) * _cell_average(self.n, float(b))
        return w

    def __repr__(self):
        return f"CartesianGrid(n={self.n}, L={self.L}, M={self.M})"


@dataclass
class Field:
    """l complex component arrays sharing one grid; data has shape (l, *grid.shape)."""

    grid: object
    data: np.ndarray

    def __post_init__(self):
        self.data = np.array(self.data, dtype=complex)
        if self.data.ndim == len(self.grid.shape):
            self.data = self.data[None]
        if self.data.shape[1:] != tuple(self.grid.shape):
            raise ValueError(f"field shape {self.data.shape[1:]} does not match grid {self.grid.shape}")

    @property
    def l(self):
        return self.data.shape[0]

    def copy(self):
        return Field(self.grid, self.data.copy())

    def scaled(self, c):
        return Field(self.grid, c * self.data)


def weighted_integral(grid, values, b: float = 0.0) -> float:
    """Integral of |x|^-b v over the domain (the ball of radius r_max for radial grids).

    Parameters
    ----------
    grid : RadialGrid or CartesianGrid
    values : array
        Samples v at the nodes; leading axes are summed too.
    b : float
        Exponent of the weight, b < n.
    """
    if b >= grid.n:
        raise ValueError(f"weight |x|^-{b} is not integrable at the origin in dimension {grid.n}")
    v = np.asarray(values)
    if isinstance(grid, RadialGrid):
        return float(np.real(np.sum(v * grid.weights(b))))
    w = grid.singular_weight(b) if b else 1.0
    return float(np.real(np.sum(v * w)) * grid.cell)


def mass_weights(grid):
    """Weights of the discrete L^2 inner product."""
    if isinstance(grid, RadialGrid):
        return grid.W
    return np.full(grid.shape, grid.cell)


def l2_norm2(grid, u):
    """Squared L^2 norm along the trailing grid axes."""
    u = np.asarray(u)
    axes = tuple(range(u.ndim - len(grid.shape), u.ndim))
    return np.sum(np.abs(u) ** 2 * mass_weights(grid), axis=axes)


def gradient_norm2(grid, u):
    """Squared gradient norm, consistent with radial_laplacian by summation by parts."""
    u = np.asarray(u)
    if isinstance(grid, RadialGrid):
        return np.real(np.sum(np.conj(u) * grid.stiffness(u), axis=-1))
    axes = tuple(range(u.ndim - grid.n, u.ndim))
    uh = np.fft.fftn(u, axes=axes)
    return np.sum(grid.k2 * np.abs(uh) ** 2, axis=axes) * grid.cell / grid.M ** grid.n


def gradient_pairing(grid, psi, phi):
    """<grad psi, grad phi> in the discrete inner product (radial grids)."""
    return np.sum(np.conj(phi) * grid.stiffness(psi), axis=-1)


def radial_laplacian(grid: RadialGrid, psi):
    """Discrete Laplacian of a radial function sampled on the grid.

    Neumann symmetry at r = 0 and homogeneous Dirichlet data beyond r_max.
    Exact on constants and r^2 away from the truncation boundary.
    """
    psi = np.asarray(psi)
    if psi.shape[-1] != grid.N:
        raise ValueError("psi must be sampled on every node")
    return -grid.stiffness(psi) / grid.W


def h1_report(spec, field: Field):
    """Per-component L^2 norms and gradient L^2 norms."""
    return np.sqrt(l2_norm2(field.grid, field.data)), np.sqrt(np.maximum(gradient_norm2(field.grid, field.data), 0.0))


# --- snapshots -----------------------------------------------------------

_MAGIC = b"INLS"
_VERSION = 1
_HEAD = struct.Struct("<4sIBIIId")


def write_snapshot(path, field: Field) -> None:
    """Write a field atomically (temporary file then rename)."""
    g = field.grid
    if isinstance(g, RadialGrid):
        head = _HEAD.pack(_MAGIC, _VERSION, g.kind, g.n, field.l, g.N, g.r_max)
    else:
        head = _HEAD.pack(_MAGIC, _VERSION, g.kind, g.n, field.l, g.M, g.L)
    body = np.ascontiguousarray(field.data, dtype="<c16").tobytes()
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".snap-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(head)
            fh.write(body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_snapshot(path, b: float = 0.0) -> Field:
    """Read a field snapshot; b selects the origin tuning of a radial grid."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size:
        raise ValueError("truncated snapshot")
    magic, version, kind, n, l, N, ext = _HEAD.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not an INLS snapshot")
    if version != _VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    if kind == 0:
        grid = radial_grid(n, N, ext, float(b))
    elif kind == 1:
        grid = CartesianGrid(n, ext, N)
    else:
        raise ValueError(f"unknown grid kind {kind}")
    count = l * int(np.prod(grid.shape))
    data = np.frombuffer(raw, dtype="<c16", count=count, offset=_HEAD.size)
    return Field(grid, data.reshape((l,) + tuple(grid.shape)).astype(complex))
