"""Currents of periodic minimizers through the Fourier moments of their measure.

For a field ``u`` of slope ``rho`` the induced probability measure on
``T^{n+1}`` is the push-forward of the normalized volume of the fundamental
domain under ``x -> (x, u(x))``.  It is described by the moments

    m(k, j) = (1/N^n) sum_i exp(-2 pi i (k.x_i + j u(x_i))),   |k|_inf, |j| <= K.

The homological slope of the current is ``(mean grad u, 1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import Field
from .lagrangian import LagrangianModel
from .periodic_minimizer import discrete_action
from .slope_lattice import RationalSlope, format_slope, parse_slope

__all__ = [
    "CurrentDescriptor",
    "ExactForm",
    "measure_of_field",
    "translation_check",
    "slope_of_current",
    "boundary_check",
    "random_test_forms",
    "current_distance",
    "mean_action_consistency",
]


def _mode_axis(K: int) -> np.ndarray:
    return np.arange(-K, K + 1)


@dataclass
class CurrentDescriptor:
    """Moments ``m[k + K, j + K]`` (``k`` flattened over the box in C order)."""

    K: int
    rho: RationalSlope
    moments: np.ndarray          # shape ((2K+1)^n, 2K+1), complex
    mean_gradient: np.ndarray

    @property
    def n(self) -> int:
        return self.rho.n

    def k_modes(self) -> np.ndarray:
        ax = _mode_axis(self.K)
        return np.stack(np.meshgrid(*([ax] * self.n), indexing="ij"), -1).reshape(-1, self.n)

    def moment(self, k, j) -> complex:
        k = np.atleast_1d(np.asarray(k, dtype=int))
        if np.any(np.abs(k) > self.K) or abs(j) > self.K:
            raise KeyError("mode outside the truncation box")
        idx = int(np.ravel_multi_index(tuple(k + self.K), (2 * self.K + 1,) * self.n))
        return complex(self.moments[idx, j + self.K])

    @property
    def slope(self) -> np.ndarray:
        return np.append(self.mean_gradient, 1.0)

    def to_json(self) -> dict:
        ks = self.k_modes()
        entries = []
        for r, k in enumerate(ks):
            for c, j in enumerate(_mode_axis(self.K)):
                z = self.moments[r, c]
                entries.append({"k": [int(a) for a in k], "j": int(j),
                                "re": float(z.real), "im": float(z.imag)})
        return {"K": self.K, "rho": format_slope(self.rho),
                "mean_gradient": self.mean_gradient.tolist(), "moments": entries}

    @classmethod
    def from_json(cls, data: dict) -> "CurrentDescriptor":
        K = int(data["K"])
        rho = parse_slope(data["rho"])
        n = rho.n
        m = np.zeros(((2 * K + 1) ** n, 2 * K + 1), dtype=complex)
        for e in data["moments"]:
            idx = int(np.ravel_multi_index(tuple(np.array(e["k"]) + K), (2 * K + 1,) * n))
            m[idx, e["j"] + K] = complex(e["re"], e["im"])
        return cls(K, rho, m, np.array(data["mean_gradient"], dtype=float))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1))
        return path


def _mean_gradient(field: Field) -> np.ndarray:
    # node average of central differences; fsum keeps the telescoping sum exact
    N = field.grid.N
    means = []
    for a in range(field.n):
        d = np.roll(field.v, -1, axis=a) - np.roll(field.v, 1, axis=a)
        means.append(0.5 * N * math.fsum(d.ravel()) / field.grid.size)
    Binv_T = np.linalg.inv(field.grid.B).T
    return field.rho.as_array() + Binv_T @ np.array(means)


def measure_of_field(field: Field, K: int = 8) -> CurrentDescriptor:
    if K < 0:
        raise ValueError("truncation K must be >= 0")
    n = field.n
    x = field.grid.nodes()
    u = field.u().ravel()
    M = field.grid.size
    ax = _mode_axis(K)
    ks = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1).reshape(-1, n)
    Ex = np.exp(-2j * np.pi * (x @ ks.T))            # (M, (2K+1)^n)
    Eu = np.exp(-2j * np.pi * np.outer(u, ax))       # (M, 2K+1)
    m = (Ex.T @ Eu) / M
    # enforce m(-k,-j) = conj m(k,j) and m(0,0) = 1 structurally
    flipped = m[::-1, ::-1].conj()
    m = 0.5 * (m + flipped)
    centre = (ks.shape[0] // 2, K)
    m[centre] = 1.0
    return CurrentDescriptor(K, field.rho, m, _mean_gradient(field))


def translation_check(field: Field, z, zplus: int = 0, K: int = 8) -> float:
    """``max |m(u) - m(u(. + z) + zplus)|`` over the moment box."""
    a = measure_of_field(field, K)
    b = measure_of_field(field.translate(z, zplus), K)
    return float(np.max(np.abs(a.moments - b.moments)))


def slope_of_current(desc: CurrentDescriptor) -> np.ndarray:
    return desc.slope


@dataclass(frozen=True)
class ExactForm:
    """``eta = g * (product of dx_c over c not in {a, b})`` with
    ``g = amp cos(2 pi (k.x + j y) + phase)``; coordinate ``n`` is ``y``.

    ``d eta`` is the flux form of the divergence-free field
    ``X = d_b g e_a - d_a g e_b`` (up to orientation).
    """

    k: tuple
    j: int
    a: int
    b: int
    amp: float = 1.0
    phase: float = 0.0

    def flux_integrand(self, x: np.ndarray, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """``X_y - sum_c X_c p_c`` at graph points ``(x, u)`` with gradient ``p``."""
        n = x.shape[1]
        w = np.append(np.asarray(self.k, dtype=float), float(self.j))
        theta = 2 * np.pi * (x @ w[:n] + u * w[n]) + self.phase
        dg = -self.amp * 2 * np.pi * np.sin(theta)   # times w_c gives d_c g
        X = np.zeros((len(u), n + 1))
        X[:, self.a] = dg * w[self.b]
        X[:, self.b] = -dg * w[self.a]
        return X[:, n] - np.einsum("ic,ic->i", X[:, :n], p)


def random_test_forms(n: int, count: int = 20, max_mode: int = 2, seed: int = 0) -> list[ExactForm]:
    """Seeded batch of test forms with ``|k|_inf, |j| <= max_mode``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    out = []
    for _ in range(count):
        a, b = sorted(rng.choice(n + 1, size=2, replace=False))
        k = tuple(int(v) for v in rng.integers(-max_mode, max_mode + 1, size=n))
        j = int(rng.integers(-max_mode, max_mode + 1))
        out.append(ExactForm(k, j, int(a), int(b), float(rng.uniform(0.5, 1.5)),
                            float(rng.uniform(0, 2 * np.pi))))
    return out


def boundary_check(field: Field, forms, K: int | None = None) -> float:
    """Max over test forms of the discretized ``T_u(d eta)``.

    ``K`` optionally rejects forms with modes beyond the truncation.
    """
    if field.n < 1:
        raise ValueError("field dimension must be >= 1")
    forms = list(forms)
    if K is not None:
        for f in forms:
            if max([abs(v) for v in f.k] + [abs(f.j)]) > K:
                raise ValueError(f"test form {f} exceeds mode bound {K}")
    x = field.grid.nodes()
    u = field.u().ravel()
    p = field.gradient().reshape(-1, field.n)
    worst = 0.0
    for f in forms:
        if f.a == f.b or not (0 <= f.a <= field.n and 0 <= f.b <= field.n):
            raise ValueError("test form needs two distinct coordinates in 0..n")
        worst = max(worst, abs(float(np.mean(f.flux_integrand(x, u, p)))))
    return worst


def current_distance(d1: CurrentDescriptor, d2: CurrentDescriptor) -> float:
    """Max moment difference plus max slope difference."""
    if d1.K != d2.K:
        raise ValueError(f"moment truncations differ: {d1.K} vs {d2.K}")
    if d1.n != d2.n:
        raise ValueError("descriptor dimensions differ")
    return float(np.max(np.abs(d1.moments - d2.moments)) + np.max(np.abs(d1.slope - d2.slope)))


def moment_breakdown(d1: CurrentDescriptor, d2: CurrentDescriptor, top: int = 10) -> list[dict]:
    """Largest per-moment differences, for reports."""
    diff = np.abs(d1.moments - d2.moments)
    ks = d1.k_modes()
    order = np.argsort(diff, axis=None)[::-1][:top]
    out = []
    for flat in order:
        r, c = np.unravel_index(flat, diff.shape)
        out.append({"k": ks[r].tolist(), "j": int(c - d1.K), "abs_diff": float(diff[r, c])})
    return out


def mean_action_consistency(model: LagrangianModel, field: Field, beta_value: float) -> float:
    """``|discrete_action(field) - beta(rho)|`` for a table value ``beta_value``."""
    return abs(discrete_action(model, field) - float(beta_value))
