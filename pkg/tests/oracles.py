"""Independent reference computations used by the tests.

Nothing here imports the solver; the oracles only share the model definition.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def pendulum_fu(u, eps):
    return eps * 2 * np.pi * np.sin(2 * np.pi * u)


def _energy_for_slope(rho, eps):
    """Energy E of the rotating orbit with one unit of u per 1/rho of x."""
    period = lambda E: quad(lambda u: 1.0 / np.sqrt(2 * (E + eps * (1 - np.cos(2 * np.pi * u)))),
                            0, 1, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    target = 1.0 / rho
    lo, hi = 1e-14, 1.0
    while period(hi) > target:
        hi *= 2
    return brentq(lambda E: period(E) - target, lo, hi, xtol=1e-15, rtol=1e-14)


def pendulum_beta_quadrature(rho, eps):
    """Continuum beta for the x-independent pendulum in one dimension, rho > 0."""
    E = _energy_for_slope(rho, eps)
    I = quad(lambda u: np.sqrt(2 * (E + eps * (1 - np.cos(2 * np.pi * u)))), 0, 1,
             epsabs=1e-14, epsrel=1e-13)[0]
    return rho * I - E


def shoot_pendulum(p, q, eps):
    """Solve u'' = eps f_u(u), u(0) = 0, u(q) = p by shooting on u'(0).

    Returns a dense solution callable on [0, q] together with the action
    (1/q) int_0^q [u'^2/2 + eps f(u)] dx.
    """
    def rhs(x, y):
        return [y[1], pendulum_fu(y[0], eps), 0.5 * y[1] ** 2 + eps * (1 - np.cos(2 * np.pi * y[0]))]

    def end(s):
        sol = solve_ivp(rhs, (0, q), [0.0, s, 0.0], rtol=1e-12, atol=1e-13)
        return sol.y[0, -1] - p

    s0 = p / q
    # the speed at u = 0 is the minimum speed, so the root lies below p/q
    lo, hi = 1e-10, s0 * 1.01
    s = brentq(end, lo, hi, xtol=1e-14)
    sol = solve_ivp(rhs, (0, q), [0.0, s, 0.0], rtol=1e-12, atol=1e-13, dense_output=True)
    return sol, sol.y[2, -1] / q


def quasi_periodic_eval(sol, p, q, x):
    """Evaluate the shooting solution extended by u(x + q) = u(x) + p."""
    x = np.asarray(x, dtype=float)
    w = np.floor(x / q)
    return sol.sol(x - w * q)[0] + w * p


def sup_distance_to_shooting(u_nodes, x_nodes, sol, p, q):
    """Sup-distance between node values and the oracle, minimised over translation."""
    # align by solving u_ex(t) = u_nodes[0] for the phase t
    target = u_nodes[0]

    def phase_err(t):
        return quasi_periodic_eval(sol, p, q, np.array([t]))[0] - target

    lo, hi = -q, q
    t0 = brentq(phase_err, lo, hi, xtol=1e-14)
    err = lambda t: np.max(np.abs(quasi_periodic_eval(sol, p, q, x_nodes + t) - u_nodes))
    best = err(t0)
    # small refinement in case the alignment at node 0 is not the sup-optimal one
    for dt in np.linspace(-1e-3, 1e-3, 41):
        best = min(best, err(t0 + dt))
    return best


def kink_half_width(eps):
    """int_0^1 sqrt(2 eps (1 - cos 2 pi u)) du."""
    return quad(lambda u: np.sqrt(2 * eps * (1 - np.cos(2 * np.pi * u))), 0, 1)[0]


def enumerate_gamma(rho, bound):
    """All k in the box |k_i| <= bound with k.rho integral."""
    n = len(rho)
    out = []
    for k in itertools.product(range(-bound, bound + 1), repeat=n):
        if sum(Fraction(a) * r for a, r in zip(k, rho)).denominator == 1:
            out.append(k)
    return out


def in_integer_span(columns, k):
    """Whether ``k`` lies in the integer span of the given independent columns."""
    B = np.array(columns, dtype=float).T
    coef = np.linalg.solve(B, np.array(k, dtype=float))
    return bool(np.all(np.abs(coef - np.round(coef)) < 1e-9))


def finite_difference_gradient(fun, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def farey(Q, lo=-1, hi=1):
    pts = set()
    for q in range(1, Q + 1):
        for p in range(math.floor(lo * q), math.ceil(hi * q) + 1):
            f = Fraction(p, q)
            if lo <= f <= hi:
                pts.add(f)
    return sorted(pts)


def enumerate_gamma_box(numerators, q, bound):
    """Vectorised :func:`enumerate_gamma` for ``rho = numerators / q``."""
    n = len(numerators)
    axis = np.arange(-bound, bound + 1, dtype=np.int64)
    ks = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), -1).reshape(-1, n)
    return ks[(ks @ np.asarray(numerators, dtype=np.int64)) % q == 0]
