"""Separable Lagrangians ``L(x,u,p) = 1/2 <Qp,p> - c.p + eps f(x,u)``.

The potential ``f`` is a truncated Fourier series on ``T^{n+1}``,

    f(x, u) = sum_{k,j} a_{k,j} exp(2 pi i (k.x + j u)),

with ``a_{-k,-j} = conj(a_{k,j})`` so that ``f`` is real.  Storing ``f``
spectrally gives exact periodicity and closed-form derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Potential",
    "LagrangianModel",
    "HypothesisReport",
    "HypothesisViolation",
    "check_hypotheses",
    "perturb",
    "preset_potential",
]

TWO_PI = 2.0 * np.pi


class HypothesisViolation(ValueError):
    """Raised when the quadratic form is not positive definite.

    ``certificate`` holds a vector ``p`` with ``<Qp, p> <= 0``.
    """

    def __init__(self, message, certificate):
        super().__init__(message)
        self.certificate = certificate


def _key(k, j):
    return (tuple(int(a) for a in k), int(j))


@dataclass(frozen=True, eq=False)
class Potential:
    """Truncated Fourier potential on ``T^n x T``.

    ``coefficients`` maps ``(k, j)`` (``k`` a tuple of length ``n``) to a
    complex amplitude.  Missing conjugate partners are filled in; inconsistent
    partners raise ``ValueError``.
    """

    n: int
    coefficients: Mapping[tuple[tuple[int, ...], int], complex] = field(default_factory=dict)

    def __post_init__(self):
        coeffs: dict = {}
        for (k, j), a in dict(self.coefficients).items():
            key = _key(k, j)
            if len(key[0]) != self.n:
                raise ValueError(f"mode {key} does not match dimension n={self.n}")
            coeffs[key] = coeffs.get(key, 0j) + complex(a)
        for (k, j), a in list(coeffs.items()):
            partner = (tuple(-x for x in k), -j)
            if partner not in coeffs:
                coeffs[partner] = np.conj(a)
            elif abs(coeffs[partner] - np.conj(a)) > 1e-12 * (1 + abs(a)):
                raise ValueError(f"coefficients at {(k, j)} and {partner} are not conjugate")
        zero = ((0,) * self.n, 0)
        if zero in coeffs:
            coeffs[zero] = complex(coeffs[zero].real, 0.0)
        coeffs = {key: a for key, a in coeffs.items() if a != 0}
        object.__setattr__(self, "coefficients", dict(sorted(coeffs.items())))

    @classmethod
    def free(cls, n: int) -> "Potential":
        return cls(n, {})

    @classmethod
    def pendulum(cls, n: int) -> "Potential":
        """``f = 1 - cos(2 pi u)``."""
        z = (0,) * n
        return cls(n, {(z, 0): 1.0, (z, 1): -0.5, (z, -1): -0.5})

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[Mapping]) -> "Potential":
        """Build from config entries ``{k: [..], j: int, re: float, im: float}``."""
        coeffs: dict = {}
        for e in entries:
            key = _key(e["k"], e["j"])
            coeffs[key] = coeffs.get(key, 0j) + complex(e.get("re", 0.0), e.get("im", 0.0))
        return cls(n, coeffs)

    def to_entries(self) -> list[dict]:
        return [
            {"k": list(k), "j": j, "re": a.real, "im": a.imag}
            for (k, j), a in self.coefficients.items()
        ]

    @property
    def order(self) -> int:
        """Truncation order ``K``: the largest ``|k|_inf`` or ``|j|`` present."""
        if not self.coefficients:
            return 0
        return max(max([abs(j)] + [abs(a) for a in k]) for k, j in self.coefficients)

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    @property
    def x_independent(self) -> bool:
        return all(not any(k) for k, _ in self.coefficients)

    def scaled(self, s: float) -> "Potential":
        return Potential(self.n, {key: s * a for key, a in self.coefficients.items()})

    def __add__(self, other: "Potential") -> "Potential":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        out = dict(self.coefficients)
        for key, a in other.coefficients.items():
            out[key] = out.get(key, 0j) + a
        return Potential(self.n, out)

    def _arrays(self):
        keys = list(self.coefficients)
        ks = np.array([k for k, _ in keys], dtype=float).reshape(len(keys), self.n)
        js = np.array([j for _, j in keys], dtype=float)
        a = np.array([self.coefficients[key] for key in keys], dtype=complex)
        return ks, js, a

    def _terms(self, x, u):
        ks, js, a = self._arrays()
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        xs = x.reshape(-1, self.n)
        phase = TWO_PI * (xs @ ks.T + u.reshape(-1, 1) * js)
        return ks, js, a, np.cos(phase), np.sin(phase), u.shape

    def value(self, x, u):
        if self.is_zero:
            return np.zeros(np.shape(u))
        _, _, a, c, s, shape = self._terms(x, u)
        return (c @ a.real - s @ a.imag).reshape(shape)

    def derivatives(self, x, u):
        """Return ``(f, f_u, f_uu, f_x, f_xu, f_xx)`` at the given points.

        ``f_x`` has shape ``(..., n)``, ``f_xx`` shape ``(..., n, n)``.
        """
        shape = np.shape(u)
        n = self.n
        if self.is_zero:
            z = np.zeros(shape)
            return z, z, z, np.zeros(shape + (n,)), np.zeros(shape + (n,)), np.zeros(shape + (n, n))
        ks, js, a, c, s, _ = self._terms(x, u)
        re = c * a.real - s * a.imag          # Re(a e^{i phi})
        im = s * a.real + c * a.imag          # Im(a e^{i phi})
        wj = TWO_PI * js
        wk = TWO_PI * ks
        f = re.sum(axis=1)
        f_u = -(im @ wj)
        f_uu = -(re @ wj**2)
        f_x = -(im @ wk)
        f_xu = -((re * wj) @ wk)
        f_xx = -np.einsum("mt,ta,tb->mab", re, wk, wk)
        return (
            f.reshape(shape),
            f_u.reshape(shape),
            f_uu.reshape(shape),
            f_x.reshape(shape + (n,)),
            f_xu.reshape(shape + (n,)),
            f_xx.reshape(shape + (n, n)),
        )

    def bind(self, nodes: np.ndarray) -> "BoundPotential":
        """Precompute the ``x``-dependent phases on a fixed node set."""
        return BoundPotential(self, np.asarray(nodes, dtype=float).reshape(-1, self.n))


class BoundPotential:
    """Potential restricted to fixed nodes; cheap repeated evaluation in ``u``."""

    def __init__(self, potential: Potential, nodes: np.ndarray):
        self.potential = potential
        ks, js, a = potential._arrays()
        self.js = js
        self.amp = np.exp(1j * TWO_PI * (nodes @ ks.T)) * a  # (M, T)
        self._jint = js.astype(int)
        self._jmax = int(np.max(np.abs(self._jint))) if js.size else 0

    def _u_phases(self, u: np.ndarray) -> np.ndarray:
        """``exp(2 pi i j u)`` for every term, built from integer powers."""
        z = np.exp(1j * TWO_PI * u)
        powers = np.empty((u.size, 2 * self._jmax + 1), dtype=complex)
        powers[:, self._jmax] = 1.0
        for p in range(1, self._jmax + 1):
            powers[:, self._jmax + p] = powers[:, self._jmax + p - 1] * z
            powers[:, self._jmax - p] = np.conj(powers[:, self._jmax + p])
        return powers[:, self._jint + self._jmax]

    def evaluate(self, u: np.ndarray, order: int = 2):
        """Return ``(f, f_u, f_uu)`` at node values ``u`` (flattened)."""
        u = np.asarray(u, dtype=float).ravel()
        if self.js.size == 0:
            z = np.zeros_like(u)
            return z, z, z
        w = self.amp * self._u_phases(u)
        f = w.real.sum(axis=1)
        if order == 0:
            return f, None, None
        wj = TWO_PI * self.js
        f_u = -(w.imag @ wj)
        f_uu = -(w.real @ wj**2) if order > 1 else None
        return f, f_u, f_uu

    def bound_fuu(self) -> float:
        """Upper bound on ``|f_uu|`` from the coefficient moduli."""
        if self.js.size == 0:
            return 0.0
        a = np.abs(self.amp[0]) if self.amp.shape[0] else np.zeros_like(self.js)
        return float(np.sum(a * (TWO_PI * self.js) ** 2))


def preset_potential(name: str, n: int) -> Potential:
    presets = {"pendulum": Potential.pendulum, "free": Potential.free}
    try:
        return presets[name](n)
    except KeyError:
        raise ValueError(f"unknown potential preset {name!r}; known: {sorted(presets)}") from None


@dataclass(frozen=True, eq=False)
class LagrangianModel:
    """``L(x,u,p) = 1/2 <Qp,p> - c.p + eps f(x,u)``; immutable after construction.

    ``delta`` is the declared ellipticity constant; when omitted it is taken
    as ``min(lambda_min, 1/lambda_max)`` of ``Q``.
    """

    Q: np.ndarray
    potential: Potential
    eps: float = 0.0
    c: np.ndarray | None = None
    delta: float | None = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be a square matrix")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-14):
            raise ValueError("Q must be symmetric")
        n = Q.shape[0]
        if self.potential.n != n:
            raise ValueError("potential dimension does not match Q")
        c = np.zeros(n) if self.c is None else np.array(self.c, dtype=float).reshape(n)
        Q.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "eps", float(self.eps))
        if self.delta is None:
            lam = np.linalg.eigvalsh(Q)
            if lam[0] > 0:
                object.__setattr__(self, "delta", float(min(lam[0], 1.0 / lam[-1])))

    @classmethod
    def free(cls, n: int = 1, Q=None) -> "LagrangianModel":
        return cls(np.eye(n) if Q is None else Q, Potential.free(n), 0.0)

    @classmethod
    def pendulum(cls, eps: float, n: int = 1, Q=None) -> "LagrangianModel":
        return cls(np.eye(n) if Q is None else Q, Potential.pendulum(n), eps)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def has_potential(self) -> bool:
        return self.eps != 0.0 and not self.potential.is_zero

    def shifted(self, c) -> "LagrangianModel":
        """The model ``L - c`` (cohomology shift replaced by ``c``)."""
        return LagrangianModel(self.Q, self.potential, self.eps, np.asarray(c, dtype=float), self.delta)

    def eval(self, x, u, p):
        p = np.asarray(p, dtype=float)
        kin = 0.5 * np.einsum("...a,ab,...b->...", p, self.Q, p) - p @ self.c
        if not self.has_potential:
            return kin + 0.0 * np.asarray(u, dtype=float)
        return kin + self.eps * self.potential.value(x, u)

    def grad(self, x, u, p):
        """Exact ``(dL/du, dL/dp)``."""
        p = np.asarray(p, dtype=float)
        L_p = p @ self.Q - self.c
        if not self.has_potential:
            return np.zeros(np.shape(u)), L_p
        _, f_u, *_ = self.potential.derivatives(x, u)
        return self.eps * f_u, L_p

    def to_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(),
            "c": self.c.tolist(),
            "eps": self.eps,
            "delta": self.delta,
            "potential": self.potential.to_entries(),
        }


@dataclass
class HypothesisReport:
    eig_min: float
    eig_max: float
    delta: float
    h1: str
    h2: bool
    h3: bool
    h3_certificate: dict | None
    h3_lower_convex: bool
    mixed_pp_px_pu_sup: float
    second_xx_ux_uu_sup: float
    h4_constant: float
    h4: bool
    samples: int
    p_max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_hypotheses(model: LagrangianModel, samples: int = 8, p_max: float = 4.0,
                     delta: float | None = None) -> HypothesisReport:
    """Measure the constants of the standing hypotheses on a sample grid.

    Ellipticity is checked exactly from the spectrum of ``Q``.  The growth
    bounds on second derivatives are sampled over ``samples`` points per
    coordinate of ``(x, u)`` and ``|p| <= p_max``; the reported constant is
    the smallest ``C`` consistent with the samples.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    lam, vecs = np.linalg.eigh(model.Q)
    if lam[0] <= 0:
        raise HypothesisViolation(
            f"Q is not positive definite (eigenvalue {lam[0]:.6g})",
            {"p": vecs[:, 0].tolist(), "quadratic_form": float(lam[0])},
        )
    delta = model.delta if delta is None else float(delta)
    cert = None
    if lam[0] < delta:
        cert = {"eigenvalue": float(lam[0]), "bound": delta, "p": vecs[:, 0].tolist(), "side": "lower"}
    elif lam[-1] > 1.0 / delta:
        cert = {"eigenvalue": float(lam[-1]), "bound": 1.0 / delta, "p": vecs[:, -1].tolist(), "side": "upper"}
    lower_convex = bool(np.linalg.eigvalsh(model.Q - delta * np.eye(model.n))[0] >= -1e-12)

    n = model.n
    axis = (np.arange(samples) + 0.5) / samples
    pts = np.stack(np.meshgrid(*([axis] * (n + 1)), indexing="ij"), axis=-1).reshape(-1, n + 1)
    x, u = pts[:, :n], pts[:, n]
    p_abs = np.linspace(0.0, p_max, samples)
    if model.has_potential:
        _, _, f_uu, _, f_xu, f_xx = model.potential.derivatives(x, u)
        second = model.eps * (np.linalg.norm(f_xx, axis=(1, 2)) + np.linalg.norm(f_xu, axis=1) + np.abs(f_uu))
    else:
        second = np.zeros(len(u))
    # separable family: d2L/dp dx and d2L/dp du vanish identically
    mixed = np.zeros((len(u), samples))
    c1 = float(np.max(mixed / (1.0 + p_abs)))
    c2 = float(np.max(second[:, None] / (1.0 + p_abs[None, :] ** 2)))
    C = max(c1, c2)
    return HypothesisReport(
        eig_min=float(lam[0]),
        eig_max=float(lam[-1]),
        delta=delta,
        h1="analytic (trigonometric polynomial potential)",
        h2=True,
        h3=cert is None,
        h3_certificate=cert,
        h3_lower_convex=lower_convex,
        mixed_pp_px_pu_sup=float(mixed.max()),
        second_xx_ux_uu_sup=float(second.max()),
        h4_constant=C,
        h4=bool(np.isfinite(C)),
        samples=samples,
        p_max=p_max,
    )


def perturb(model: LagrangianModel, g: Potential, s: float) -> LagrangianModel:
    """Return the model with potential ``eps f + s g`` folded into one series."""
    if s == 0:
        return model
    folded = model.potential.scaled(model.eps) + g.scaled(s)
    return LagrangianModel(model.Q, folded, 1.0, model.c, model.delta)
