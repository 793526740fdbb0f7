"""Discrete mean action on the periodic class and its minimization.

For a slope ``rho`` with period lattice ``Gamma = B Z^n`` the mean action

    (1/|D|) int_D L(x, u, grad u) dx,     u = rho.x + v,  v Gamma-periodic,

is discretized on the grid ``x = B i / N``.  In cell coordinates the kinetic
term is ``1/2 (B^T rho + D v)^T G (B^T rho + D v)`` with ``G = B^-1 Q B^-T``.
Diagonal entries of ``G`` use compact differences ``(D^+ v)^2`` and off-diagonal
entries use central differences; this is the standard second-order stencil
for ``div(G grad v)`` and, unlike a purely central one, has no checkerboard
null modes.  Since sums of differences of a periodic array vanish, the cross
term with ``B^T rho`` drops out and the discrete action is

    A(v) = 1/2 <Q rho, rho> - c.rho + (1/N^n) sum_i [ 1/2 (K v)_i v_i + eps f(x_i, u_i) ].

The Euler-Lagrange residual ``K v + eps f_u`` is ``N^n`` times the gradient.
"""

from __future__ import annotations

import functools
import zlib
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize as sp_minimize
from scipy.sparse.linalg import splu

from .fields import Field, Grid
from .lagrangian import LagrangianModel
from .slope_lattice import RationalSlope

__all__ = [
    "MinimizeResult",
    "BirkhoffVerdict",
    "ClassPartition",
    "discrete_action",
    "action_gradient",
    "euler_lagrange_residual",
    "minimize",
    "default_starts",
    "slope_stream",
    "birkhoff_check",
    "birkhoff_shifts",
    "moser_bound_check",
    "distinct_minimizers",
]


class _ActionKernel:
    """Precomputed operators for one (model, grid, slope) triple."""

    def __init__(self, model: LagrangianModel, grid: Grid, rho: RationalSlope):
        if model.n != grid.n or rho.n != grid.n:
            raise ValueError(
                f"dimension mismatch: model n={model.n}, grid n={grid.n}, slope n={rho.n}"
            )
        self.model, self.grid, self.rho = model, grid, rho
        n, N = grid.n, grid.N
        B = grid.B
        Binv = np.linalg.inv(B)
        self.G = Binv @ model.Q @ Binv.T
        r = rho.as_array()
        self.const = 0.5 * r @ model.Q @ r - model.c @ r
        self.M = grid.size
        nodes = grid.nodes()
        self.linear = (nodes @ r).reshape(grid.shape)
        self.potential = model.potential.bind(nodes) if model.has_potential else None
        self.eps = model.eps
        self.symbol = self._symbol()
        self._K = None

    def _symbol(self):
        n, N = self.grid.n, self.grid.N
        freqs = [2 * np.pi * np.fft.fftfreq(N)] * (n - 1) + [2 * np.pi * np.fft.rfftfreq(N)]
        th = np.meshgrid(*freqs, indexing="ij")
        lam = np.zeros(th[0].shape)
        for a in range(n):
            lam += self.G[a, a] * 4.0 * np.sin(th[a] / 2) ** 2
            for b in range(n):
                if a != b:
                    lam += self.G[a, b] * np.sin(th[a]) * np.sin(th[b])
        return N**2 * lam

    def apply_K(self, v: np.ndarray) -> np.ndarray:
        """Per-node kinetic operator ``-div_h(G grad_h v)`` via stencils."""
        N, n, G = self.grid.N, self.grid.n, self.G
        out = np.zeros_like(v)
        for a in range(n):
            lap = np.roll(v, -1, axis=a) - 2.0 * v + np.roll(v, 1, axis=a)
            out -= G[a, a] * N**2 * lap
        for a in range(n):
            for b in range(n):
                if a != b and G[a, b] != 0.0:
                    dcb = 0.5 * N * (np.roll(v, -1, axis=b) - np.roll(v, 1, axis=b))
                    out -= G[a, b] * 0.5 * N * (np.roll(dcb, -1, axis=a) - np.roll(dcb, 1, axis=a))
        return out

    def kinetic_sum(self, v: np.ndarray) -> float:
        """``sum_i 1/2 (...)``: compact squares on the diagonal, central products off it."""
        N, n, G = self.grid.N, self.grid.n, self.G
        total = 0.0
        dc = [0.5 * N * (np.roll(v, -1, axis=a) - np.roll(v, 1, axis=a)) for a in range(n)]
        for a in range(n):
            dp = N * (np.roll(v, -1, axis=a) - v)
            total += G[a, a] * np.sum(dp * dp)
            for b in range(n):
                if a != b and G[a, b] != 0.0:
                    total += G[a, b] * np.sum(dc[a] * dc[b])
        return 0.5 * total

    def K_sparse(self):
        if self._K is None:
            N, n, G = self.grid.N, self.grid.n, self.G
            I = sp.identity(N, format="csr")
            S = sp.csr_matrix((np.ones(N), (np.arange(N), (np.arange(N) + 1) % N)), shape=(N, N))
            Dp = N * (S - I)
            Dc = 0.5 * N * (S - S.T)

            def along(op, a):
                mats = [I] * n
                mats[a] = op
                out = mats[0]
                for m in mats[1:]:
                    out = sp.kron(out, m, format="csr")
                return out

            K = sp.csr_matrix((N**n, N**n))
            for a in range(n):
                Da = along(Dp, a)
                K = K + G[a, a] * (Da.T @ Da)
                for b in range(n):
                    if a != b and G[a, b] != 0.0:
                        K = K + G[a, b] * (along(Dc, a).T @ along(Dc, b))
            self._K = K.tocsc()
        return self._K

    def potential_terms(self, v: np.ndarray, order: int = 2):
        if self.potential is None:
            z = np.zeros(v.size)
            return z, z, z
        return self.potential.evaluate((self.linear + v).ravel(), order)

    def scaled_objective(self, v: np.ndarray):
        """``F = N^n (A - const)`` and its gradient (the EL residual)."""
        f, f_u, _ = self.potential_terms(v, order=1)
        Kv = self.apply_K(v)
        F = 0.5 * float(np.sum(Kv * v)) + self.eps * float(np.sum(f))
        g = Kv + self.eps * f_u.reshape(v.shape)
        return F, g

    def action(self, v: np.ndarray) -> float:
        f, _, _ = self.potential_terms(v, order=0)
        return self.const + (self.kinetic_sum(v) + self.eps * float(np.sum(f))) / self.M

    def residual_field(self, v: np.ndarray) -> np.ndarray:
        _, f_u, _ = self.potential_terms(v, order=1)
        return self.apply_K(v) + self.eps * f_u.reshape(v.shape)

    def precond_scale(self, sigma: float) -> np.ndarray:
        return 1.0 / np.sqrt(self.symbol + sigma)

    def apply_symbol(self, v: np.ndarray, mult: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(np.fft.rfftn(v) * mult, s=v.shape, axes=tuple(range(v.ndim)))


@functools.lru_cache(maxsize=32)
def _kernel(model: LagrangianModel, grid: Grid, rho: RationalSlope) -> _ActionKernel:
    return _ActionKernel(model, grid, rho)


def _kernel_for(model: LagrangianModel, field: Field) -> _ActionKernel:
    return _kernel(model, field.grid, field.rho)


def discrete_action(model: LagrangianModel, field: Field) -> float:
    """Mean action of ``field`` over one fundamental domain (node average)."""
    return _kernel_for(model, field).action(field.v)


def action_gradient(model: LagrangianModel, field: Field) -> np.ndarray:
    """Exact gradient of :func:`discrete_action` with respect to the node values."""
    k = _kernel_for(model, field)
    return k.residual_field(field.v) / k.M


def euler_lagrange_residual(model: LagrangianModel, field: Field) -> float:
    """Max-norm of the discrete operator ``-div_h(G grad_h v) + eps f_u``."""
    return float(np.max(np.abs(_kernel_for(model, field).residual_field(field.v))))


@dataclass
class MinimizeResult:
    field: Field
    action: float
    residual: float
    iterations: int
    start_id: int
    converged: bool = True
    history: list = dc_field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "start_id": self.start_id,
            "action": self.action,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "oscillation": self.field.oscillation(),
        }


def slope_stream(rho: RationalSlope) -> int:
    """Stable per-slope stream index for seeding."""
    return zlib.crc32(str(rho).encode())


def default_starts(rho: RationalSlope, grid: Grid, m: int | None = None, r: int = 12,
                   amplitude: float = 0.3, seed: int = 0, modes: int = 4,
                   stream: int | None = None) -> list[np.ndarray]:
    """Vertical shifts ``k/m`` followed by ``r`` seeded smooth random fields.

    ``m`` defaults to the slope denominator capped at 8.  Random field ``i``
    draws from ``SeedSequence(seed, spawn_key=(stream, i))`` so results do not
    depend on how many other starts or jobs are requested.  ``stream``
    defaults to a checksum of the slope.
    """
    if stream is None:
        stream = slope_stream(rho)
    if m is None:
        m = min(rho.denominator, 8)
    starts = [np.full(grid.shape, s / m) for s in range(m)]
    s_coords = grid.index_coords()
    for i in range(r):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, i)))
        offset = rng.uniform(0.0, 1.0)
        field = np.zeros(len(s_coords))
        for _ in range(modes):
            freq = rng.integers(-modes, modes + 1, size=grid.n)
            phase = rng.uniform(0, 2 * np.pi)
            field += rng.normal() * np.cos(2 * np.pi * s_coords @ freq + phase)
        scale = np.max(np.abs(field))
        if scale > 0:
            field *= amplitude / scale
        starts.append((offset + field).reshape(grid.shape))
    return starts


def _descend(kern: _ActionKernel, v0: np.ndarray, tol: float, max_iter: int,
             switch_tol: float):
    """L-BFGS in FFT-preconditioned coordinates, then damped Newton."""
    shape = v0.shape
    history = []
    v = np.array(v0, dtype=float)
    if kern.potential is None or kern.eps == 0.0:
        # quadratic with constant null direction: gauge mean(v) = 0, solve exactly
        history.append(kern.action(v))
        F, g = kern.scaled_objective(v)
        pinv = np.where(kern.symbol > 0, 1.0 / np.where(kern.symbol > 0, kern.symbol, 1.0), 0.0)
        v = v - kern.apply_symbol(g, pinv)
        v = v - v.mean()
        if np.max(np.abs(v)) < 1e-13:
            v = np.zeros(shape)
        history.append(kern.action(v))
        res = float(np.max(np.abs(kern.residual_field(v))))
        return v, res, 1, history, res <= tol

    sigma = max(kern.eps * kern.potential.bound_fuu(), 1e-8 * (1 + np.max(kern.symbol)))
    T = kern.precond_scale(sigma)
    Tinv = 1.0 / T
    iters = 0
    res = float(np.max(np.abs(kern.residual_field(v))))
    history.append(kern.action(v))

    if res > switch_tol:
        last = {}

        def fun(w):
            vv = kern.apply_symbol(w.reshape(shape), T)
            F, g = kern.scaled_objective(vv)
            last.update(w=w.copy(), F=F, res=float(np.max(np.abs(g))))
            return F, kern.apply_symbol(g, T).ravel()

        def callback(intermediate_result):
            x = intermediate_result.x
            if "w" not in last or not np.array_equal(x, last["w"]):
                fun(x)
            history.append(kern.const + last["F"] / kern.M)
            if last["res"] <= switch_tol:
                raise StopIteration

        w0 = kern.apply_symbol(v, Tinv).ravel()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = sp_minimize(fun, w0, jac=True, method="L-BFGS-B", callback=callback,
                              options={"maxiter": max_iter, "maxcor": 20, "gtol": 0.0,
                                       "ftol": 0.0, "maxls": 40})
        iters += int(out.nit)
        v = kern.apply_symbol(out.x.reshape(shape), T)
        res = float(np.max(np.abs(kern.residual_field(v))))

    K = kern.K_sparse()
    F, g = kern.scaled_objective(v)
    for _ in range(60):
        if res <= tol:
            break
        iters += 1
        _, _, f_uu = kern.potential_terms(v, order=2)
        H = K + sp.diags(kern.eps * f_uu)
        try:
            d = -splu(H.tocsc()).solve(g.ravel()).reshape(shape)
            slope = float(np.sum(g * d))
            descent = np.isfinite(slope) and slope < 0
        except RuntimeError:
            descent = False
        if not descent:
            d = -kern.apply_symbol(g, T * T)
            slope = float(np.sum(g * d))
        alpha, accepted = 1.0, False
        for _ in range(40):
            vt = v + alpha * d
            Ft, gt = kern.scaled_objective(vt)
            rt = float(np.max(np.abs(gt)))
            slack = 64 * np.finfo(float).eps * (abs(F) + float(np.sum(np.abs(kern.apply_K(v) * v))) + kern.M)
            if Ft <= F + 1e-4 * alpha * slope or (Ft <= F + slack and rt < res):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        v, F, g, res = vt, Ft, gt, rt
        history.append(kern.action(v))
    return v, res, iters, history, res <= tol


def minimize(model: LagrangianModel, rho: RationalSlope, grid: Grid,
             starts: Sequence[np.ndarray] | None = None, tol: float = 1e-9,
             max_iter: int = 5000, seed: int = 0,
             random_starts: int = 12) -> list[MinimizeResult]:
    """Multistart descent on the periodic class ``W``.

    Each start runs until the Euler-Lagrange residual (``N^n`` times the
    action gradient, max-norm) is at most ``tol``.  Non-convergence is
    reported per start via ``converged=False``.  Results are sorted by
    ``(not converged, action, start_id)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if starts is None:
        starts = default_starts(rho, grid, r=random_starts, seed=seed)
    if len(starts) == 0:
        raise ValueError("at least one start is required")
    kern = _kernel(model, grid, rho)
    switch_tol = max(tol, 1e-6)
    results = []
    for sid, v0 in enumerate(starts):
        v0 = np.asarray(v0, dtype=float).reshape(grid.shape)
        v, res, iters, hist, ok = _descend(kern, v0, tol, max_iter, switch_tol)
        fld = Field(rho, grid, v, seed)
        results.append(MinimizeResult(fld, kern.action(v), res, iters, sid, ok, hist))
    results.sort(key=lambda r: (not r.converged, r.action, r.start_id))
    return results


@dataclass
class BirkhoffVerdict:
    k: tuple
    j: int
    verdict: str
    dmin: float
    dmax: float


def birkhoff_shifts(n: int, kmax: int = 3, jmax: int = 3):
    """All ``(k, j)`` with ``|k|_inf <= kmax``, ``|j| <= jmax``, not both zero."""
    axis = range(-kmax, kmax + 1)
    ks = np.stack(np.meshgrid(*([np.arange(-kmax, kmax + 1)] * n), indexing="ij"), -1).reshape(-1, n)
    out = []
    for k in ks:
        for j in range(-jmax, jmax + 1):
            if any(k) or j:
                out.append((tuple(int(a) for a in k), j))
    del axis
    return out


def birkhoff_check(field: Field, shifts=None, tol: float = 1e-9) -> list[BirkhoffVerdict]:
    """Classify ``d(x) = u(x+k) + j - u(x)`` for each shift.

    Verdicts: ``">"`` everywhere positive, ``"<"`` everywhere negative, ``"="``
    within ``tol`` of zero, ``"VIOLATION"`` on a sign change.
    """
    if shifts is None:
        shifts = birkhoff_shifts(field.n)
    out = []
    translate_cache = {}
    for k, j in shifts:
        k = tuple(int(a) for a in k)
        if k not in translate_cache:
            translate_cache[k] = field.translate(k, 0).v - field.v
        d = translate_cache[k] + j
        lo, hi = float(d.min()), float(d.max())
        if lo > tol:
            verdict = ">"
        elif hi < -tol:
            verdict = "<"
        elif max(abs(lo), abs(hi)) <= tol:
            verdict = "="
        else:
            verdict = "VIOLATION"
        out.append(BirkhoffVerdict(k, int(j), verdict, lo, hi))
    return out


def moser_bound_check(field: Field) -> float:
    """``sup |v - v(0)|`` over the nodes (the ``C^0`` part of the a priori bound)."""
    return field.oscillation()


@dataclass
class ClassPartition:
    classes: list            # lists of indices into the results
    representatives: list    # index of the representative of each class
    actions: list
    gap: float | None        # action(second class) - action(best class)

    @property
    def count(self) -> int:
        return len(self.classes)


def _vertical_distance(v1: np.ndarray, v2: np.ndarray) -> float:
    d = (v1 - v2).ravel()
    mid = 0.5 * (d.max() + d.min())
    return float(min(np.max(np.abs(d - m)) for m in (np.floor(mid), np.ceil(mid))))


def distinct_minimizers(results: Sequence[MinimizeResult], rho: RationalSlope | None = None,
                        tol: float = 1e-6, symmetry: str = "gamma") -> ClassPartition:
    """Partition converged results into classes under ``u -> u(.+k) + j``.

    With ``symmetry="gamma"`` only ``(k, j)`` with ``rho.k + j`` integral are
    used, which on the periodic class amounts to integer vertical shifts.
    ``symmetry="all"`` also identifies translates by ``k`` outside ``Gamma``.
    """
    res = [r for r in results if r.converged]
    if not res:
        return ClassPartition([], [], [], None)
    if rho is None:
        rho = res[0].field.rho
    if symmetry not in ("gamma", "all"):
        raise ValueError("symmetry must be 'gamma' or 'all'")
    extra_shifts = [np.zeros(rho.n, dtype=int)]
    if symmetry == "all":
        lat = res[0].field.grid.lattice
        B = np.array(lat.basis)
        box = np.stack(np.meshgrid(*[np.arange(int(B[i, i])) for i in range(rho.n)],
                                   indexing="ij"), -1).reshape(-1, rho.n)
        extra_shifts = list(box)

    order = sorted(range(len(res)), key=lambda i: (res[i].action, res[i].start_id))
    classes: list[list[int]] = []
    reps: list[int] = []
    for i in order:
        placed = False
        for ci, rep in enumerate(reps):
            vr = res[rep].field.v
            for k in extra_shifts:
                vi = res[i].field.translate(k).v if any(k) else res[i].field.v
                if _vertical_distance(vi, vr) <= tol:
                    classes[ci].append(i)
                    placed = True
                    break
            if placed:
                break
        if not placed:
            classes.append([i])
            reps.append(i)

    def lex_key(ci):
        v = res[reps[ci]].field.v.ravel()
        return tuple(np.round(v - np.floor(v[0]), 12))

    actions = [res[r].action for r in reps]
    idx = list(range(len(classes)))
    idx.sort(key=lambda ci: (round(actions[ci], 12), lex_key(ci)))
    # map back to indices into the caller's list
    back = [results.index(r) for r in res]
    classes = [[back[i] for i in classes[ci]] for ci in idx]
    reps_out = [back[reps[ci]] for ci in idx]
    acts = [actions[ci] for ci in idx]
    gap = acts[1] - acts[0] if len(acts) > 1 else None
    return ClassPartition(classes, reps_out, acts, gap)
