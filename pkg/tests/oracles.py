"""Independent reference solutions used by the tests (no package code)."""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import gamma as gamma_fn


def shoot(n, b, r_end=14.0, r0=1e-6, bracket=(0.1, 200.0), iters=80):
    """Radial ground state of psi'' + (n-1)/r psi' - psi + r^-b psi^2 = 0 by
    shooting on psi(0).

    Starts from the series psi = p0 - c r^(2-b), c = p0^2 / ((2-b)(n-b)).  Too
    large a p0 crosses zero, too small a p0 turns back up; bisection on that.

    Returns
    -------
    p0, dense solution callable on [r0, r_valid], r_valid
    """
    def rhs(r, y):
        p, dp = y
        return [dp, -(n - 1) / r * dp + p - r ** (-b) * p * p]

    def crosses(r, y):
        return y[0]
    crosses.terminal = True

    def turns(r, y):
        return y[1]
    turns.terminal = True
    turns.direction = 1

    def run(p0):
        c = p0 * p0 / ((2.0 - b) * (n - b))
        y0 = [p0 - c * r0 ** (2.0 - b), -(2.0 - b) * c * r0 ** (1.0 - b)]
        return solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=1e-13, atol=1e-15,
                         events=[crosses, turns], dense_output=True)

    lo, hi = bracket
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if run(mid).t_events[0].size:
            hi = mid
        else:
            lo = mid
    p0 = 0.5 * (lo + hi)
    sol = run(p0)
    return p0, sol.sol, sol.t[-1]


def gaussian_mass(n, a=1.0):
    """int_{R^n} exp(-2 a r^2) dx, the squared L2 norm of exp(-a r^2)."""
    return (np.pi / (2.0 * a)) ** (n / 2.0)


def weighted_gaussian(n, b, a):
    """int_{R^n} |x|^-b exp(-a r^2) dx."""
    area = 2.0 * np.pi ** (n / 2.0) / gamma_fn(n / 2.0)
    return 0.5 * area * a ** (-(n - b) / 2.0) * gamma_fn((n - b) / 2.0)


def xi1_formula(n, b, Qw):
    """Closed form of the infimum of the Weinstein quotient."""
    d = n + 2.0 * b
    return 0.5 * d ** (d / 4.0) * (6.0 - d) ** ((4.0 - d) / 4.0) * np.sqrt(Qw)


def bootstrap_gamma_formula(n, b, Qw_psi, Q0):
    """gamma = (n+2b)/(6-n-2b) Qw(psi)^(2/(n+2b-4)) / Q0^((6-n-2b)/(n+2b-4))."""
    d = n + 2.0 * b
    return d / (6.0 - d) * Qw_psi ** (2.0 / (d - 4.0)) / Q0 ** ((6.0 - d) / (d - 4.0))
