"""Exact arithmetic on rational slopes and the integer lattices they generate.

Everything here works on Python integers and :class:`fractions.Fraction`, so
results are exact regardless of denominator size.  Lattices are always stored
in a canonical Hermite normal form, which makes equal lattices compare equal.

A slope ``rho = (p_1/q, ..., p_n/q)`` determines

* the period group ``Gamma = {k in Z^n : k.rho in Z}``,
* the rational subspace ``rat(rho, 1)`` spanned by integer ``(k, j)`` with
  ``k.rho + j = 0``,
* its projection ``M(rho)`` to ``R^n``.

Slopes whose denominator is too large to matter at a given resolution are
treated as "effectively irrational" by bounding the integer relation search
with an explicit ``cap``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "RationalSlope",
    "PeriodLattice",
    "RationalSubspace",
    "FundamentalDomain",
    "hermite_rows",
    "integer_kernel",
    "gamma_group",
    "fundamental_domain",
    "rat_space",
    "projection_M",
    "irrationality_index",
    "decompose_slope",
    "gram_projection",
    "parse_slope",
    "format_slope",
]


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True)
class RationalSlope:
    """A slope in ``Q^n`` stored as integer numerators over one denominator.

    The representation is canonical: ``gcd(numerators, denominator) == 1`` and
    ``denominator >= 1``.  ``cap`` optionally bounds integer relation searches
    (see :func:`projection_M`); it does not take part in equality.
    """

    numerators: tuple[int, ...]
    denominator: int = 1
    cap: int | None = field(default=None, compare=False)

    def __post_init__(self):
        nums = tuple(int(p) for p in self.numerators)
        q = int(self.denominator)
        if not nums:
            raise ValueError("slope needs at least one component")
        if q == 0:
            raise ValueError("denominator must be nonzero")
        if q < 0:
            nums, q = tuple(-p for p in nums), -q
        g = reduce(math.gcd, nums, q)
        object.__setattr__(self, "numerators", tuple(p // g for p in nums))
        object.__setattr__(self, "denominator", q // g)
        if self.cap is not None and self.cap < 1:
            raise ValueError("cap must be a positive integer")

    @classmethod
    def from_fractions(cls, values: Iterable, cap: int | None = None) -> "RationalSlope":
        fracs = [Fraction(v) for v in values]
        q = reduce(_lcm, (f.denominator for f in fracs), 1)
        return cls(tuple(int(f * q) for f in fracs), q, cap=cap)

    @classmethod
    def zero(cls, n: int) -> "RationalSlope":
        return cls((0,) * n, 1)

    @property
    def n(self) -> int:
        return len(self.numerators)

    @property
    def components(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(p, self.denominator) for p in self.numerators)

    def as_array(self) -> np.ndarray:
        return np.array([p / self.denominator for p in self.numerators], dtype=float)

    def dot(self, k: Sequence[int]) -> Fraction:
        """Exact value of ``k . rho``."""
        return Fraction(sum(int(a) * p for a, p in zip(k, self.numerators)), self.denominator)

    def with_cap(self, cap: int | None) -> "RationalSlope":
        return RationalSlope(self.numerators, self.denominator, cap=cap)

    def __neg__(self) -> "RationalSlope":
        return RationalSlope(tuple(-p for p in self.numerators), self.denominator, cap=self.cap)

    def __str__(self) -> str:
        return format_slope(self)


def parse_slope(text: str, cap: int | None = None) -> RationalSlope:
    """Parse whitespace-separated ``p/q`` tokens (integers allowed).

    Raises ``ValueError`` naming the offending token.
    """
    tokens = text.replace(",", " ").split()
    if not tokens:
        raise ValueError("empty slope string")
    fracs = []
    for tok in tokens:
        try:
            if "/" in tok:
                num, den = tok.split("/")
                fracs.append(Fraction(int(num), int(den)))
            else:
                fracs.append(Fraction(int(tok)))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"invalid slope token {tok!r}") from None
    return RationalSlope.from_fractions(fracs, cap=cap)


def format_slope(rho: RationalSlope) -> str:
    q = rho.denominator
    return " ".join(f"{p}/{q}" for p in rho.numerators)


# --------------------------------------------------------------------------
# integer linear algebra


def hermite_rows(rows: Iterable[Sequence[int]]) -> list[tuple[int, ...]]:
    """Row Hermite normal form of the lattice generated by ``rows``.

    Returns the nonzero rows of the canonical upper echelon basis: pivots are
    positive and every entry above a pivot lies in ``[0, pivot)``.  Two
    generating sets give the same output iff they generate the same lattice.
    """
    A = [[int(x) for x in r] for r in rows]
    if not A:
        return []
    d = len(A[0])
    top = 0
    for col in range(d):
        if top == len(A):
            break
        while True:
            nz = [r for r in range(top, len(A)) if A[r][col] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda r: abs(A[r][col]))
            A[top], A[piv] = A[piv], A[top]
            done = True
            for r in range(top + 1, len(A)):
                if A[r][col] != 0:
                    f = A[r][col] // A[top][col]
                    A[r] = [a - f * b for a, b in zip(A[r], A[top])]
                    if A[r][col] != 0:
                        done = False
            if done:
                break
        if A[top][col] == 0:
            continue
        if A[top][col] < 0:
            A[top] = [-a for a in A[top]]
        p = A[top][col]
        for r in range(top):
            f = A[r][col] // p
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[top])]
        top += 1
    return [tuple(r) for r in A[:top]]


def integer_kernel(matrix: Sequence[Sequence[int]], ncols: int | None = None) -> list[tuple[int, ...]]:
    """HNF basis of ``{x in Z^d : matrix @ x = 0}``.

    ``ncols`` must be given when ``matrix`` has no rows.
    """
    rows = [list(map(int, r)) for r in matrix]
    d = len(rows[0]) if rows else ncols
    if d is None:
        raise ValueError("ncols required for an empty matrix")
    m = len(rows)
    aug = []
    for j in range(d):
        aug.append([rows[i][j] for i in range(m)] + [int(i == j) for i in range(d)])
    H = hermite_rows(aug)
    kern = [r[m:] for r in H if all(x == 0 for x in r[:m])]
    return hermite_rows(kern)


def _exact_rank(rows: Sequence[Sequence[int]]) -> int:
    return len(hermite_rows(rows))


def _solve_exact(W: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gaussian elimination over Q; raises ``ValueError`` if ``W`` is singular."""
    k = len(b)
    M = [list(map(Fraction, W[i])) + [Fraction(b[i])] for i in range(k)]
    for col in range(k):
        piv = next((r for r in range(col, k) if M[r][col] != 0), None)
        if piv is None:
            raise ValueError("generators are linearly dependent (singular Gram matrix)")
        M[col], M[piv] = M[piv], M[col]
        for r in range(k):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][k] / M[i][i] for i in range(k)]


# --------------------------------------------------------------------------
# lattices and subspaces


@dataclass(frozen=True)
class PeriodLattice:
    """Full-rank sublattice of ``Z^n``; ``basis[i][j]`` is row ``i`` of the
    basis matrix, whose *columns* are the lattice generators."""

    basis: tuple[tuple[int, ...], ...]
    covolume: int

    @property
    def n(self) -> int:
        return len(self.basis)

    @property
    def columns(self) -> list[tuple[int, ...]]:
        return [tuple(row[j] for row in self.basis) for j in range(self.n)]

    def matrix(self) -> np.ndarray:
        return np.array(self.basis, dtype=float)

    def contains(self, k: Sequence[int]) -> bool:
        """Exact membership test via back-substitution over Q."""
        B = [[Fraction(x) for x in row] for row in self.basis]
        try:
            t = _solve_exact(B, [Fraction(int(x)) for x in k])
        except ValueError:
            return False
        return all(x.denominator == 1 for x in t)

    def to_json(self) -> list[list[int]]:
        return [list(row) for row in self.basis]


@dataclass(frozen=True)
class RationalSubspace:
    """Subspace of ``R^ambient`` given by independent integer generators."""

    generators: tuple[tuple[int, ...], ...]
    ambient: int

    @property
    def dimension(self) -> int:
        return len(self.generators)

    def matrix(self) -> np.ndarray:
        if not self.generators:
            return np.zeros((0, self.ambient))
        return np.array(self.generators, dtype=float)

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace (floating point)."""
        A = self.matrix()
        if A.shape[0] == 0:
            return np.zeros((self.ambient, self.ambient))
        q, _ = np.linalg.qr(A.T)
        return q @ q.T

    def distance(self, vectors: np.ndarray) -> np.ndarray:
        """Euclidean distance of each row of ``vectors`` to the subspace."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        return np.linalg.norm(V - V @ self.projector(), axis=1)


@dataclass(frozen=True)
class FundamentalDomain:
    """Half-open parallelepiped ``B [0,1)^n`` for a lattice basis ``B``."""

    basis: tuple[tuple[int, ...], ...]
    volume: int

    def matrix(self) -> np.ndarray:
        return np.array(self.basis, dtype=float)

    def cell_coordinates(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.solve(self.matrix(), pts.T).T

    def contains(self, points) -> np.ndarray:
        s = self.cell_coordinates(points)
        return np.all((s >= 0.0) & (s < 1.0), axis=1)

    def contains_exact(self, point: Sequence[int]) -> bool:
        B = [[Fraction(x) for x in row] for row in self.basis]
        s = _solve_exact(B, [Fraction(x) for x in point])
        return all(0 <= x < 1 for x in s)

    def reduce(self, points) -> np.ndarray:
        """Map points into the cell by lattice translations."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s = self.cell_coordinates(pts)
        return pts - np.floor(s) @ self.matrix().T


def _lattice_from_rows(rows: Iterable[Sequence[int]], n: int) -> PeriodLattice:
    H = hermite_rows(rows)
    if len(H) != n:
        raise ValueError("generators do not span a full-rank lattice")
    basis = tuple(tuple(H[j][i] for j in range(n)) for i in range(n))
    cov = 1
    for i in range(n):
        cov *= H[i][i]
    return PeriodLattice(basis, abs(cov))


def gamma_group(rho: RationalSlope) -> PeriodLattice:
    """The period group ``{k in Z^n : k.rho in Z}`` in Hermite normal form."""
    row = list(rho.numerators) + [rho.denominator]
    kern = integer_kernel([row])
    return _lattice_from_rows([v[:-1] for v in kern], rho.n)


def fundamental_domain(lattice: PeriodLattice) -> FundamentalDomain:
    return FundamentalDomain(lattice.basis, lattice.covolume)


def _box_relation_gram(rho: RationalSlope, cap: int) -> np.ndarray:
    """Gram matrix ``sum k k^T`` over ``k`` in ``[-cap, cap]^n`` with ``k.rho in Z``.

    Its range is the span of all bounded relations.
    """
    n, q = rho.n, rho.denominator
    res = np.array([p % q for p in rho.numerators], dtype=object)
    if q * (2 * cap + 1) * n < 2**62:
        res = res.astype(np.int64)
    axis = np.arange(-cap, cap + 1, dtype=np.int64)
    gram = np.zeros((n, n), dtype=object)
    if n == 1:
        mask = (axis * res[0]) % q == 0
        ks = axis[mask].reshape(-1, 1)
        return (ks.T.astype(object) @ ks.astype(object))
    rest = np.stack(np.meshgrid(*([axis] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    rest_res = rest @ res[1:] if res.dtype != object else rest.astype(object) @ res[1:]
    for k0 in axis:
        mask = (k0 * res[0] + rest_res) % q == 0
        if not mask.any():
            continue
        sel = rest[mask]
        ks = np.concatenate([np.full((len(sel), 1), k0, dtype=np.int64), sel], axis=1)
        gram = gram + ks.T.astype(object) @ ks.astype(object)
    return gram


def _effective_cap(rho: RationalSlope, cap: int | None) -> int | None:
    return cap if cap is not None else rho.cap


def projection_M(rho: RationalSlope, cap: int | None = None) -> RationalSubspace:
    """Integer basis of ``M(rho)``, the projection of ``rat(rho, 1)`` to ``R^n``.

    Without a cap ``M(rho) = R^n`` and the basis is that of ``Gamma``.  With a
    cap, ``M`` is the span of relations ``k`` with ``|k|_inf <= cap`` and the
    returned generators are an HNF basis of ``Gamma`` intersected with it.
    """
    cap = _effective_cap(rho, cap)
    lat = gamma_group(rho)
    n = rho.n
    if cap is None or cap >= rho.denominator:
        return RationalSubspace(tuple(hermite_rows(lat.columns)), n)
    gram = _box_relation_gram(rho, cap)
    span_rows = hermite_rows(gram.tolist())
    if not span_rows:
        return RationalSubspace((), n)
    if len(span_rows) == n:
        return RationalSubspace(tuple(hermite_rows(lat.columns)), n)
    perp = integer_kernel(span_rows, ncols=n)
    B = [list(row) for row in lat.basis]
    CB = [[sum(c[i] * B[i][j] for i in range(n)) for j in range(n)] for c in perp]
    coeffs = integer_kernel(CB, ncols=n)
    gens = [tuple(sum(B[i][j] * t[j] for j in range(n)) for i in range(n)) for t in coeffs]
    return RationalSubspace(tuple(hermite_rows(gens)), n)


def rat_space(rho: RationalSlope, cap: int | None = None) -> RationalSubspace:
    """Integer basis of ``rat(rho, 1)``: generators ``(k, j)`` with ``k.rho + j = 0``."""
    M = projection_M(rho, cap)
    lifted = []
    for k in M.generators:
        j = -rho.dot(k)
        assert j.denominator == 1
        lifted.append(tuple(k) + (int(j),))
    return RationalSubspace(tuple(hermite_rows(lifted)), rho.n + 1)


def irrationality_index(rho: RationalSlope, cap: int | None = None) -> int:
    """``n - dim M(rho)`` under the given relation-search cap."""
    return rho.n - projection_M(rho, cap).dimension


def gram_projection(rho: Sequence, generators: Sequence[Sequence[int]]) -> tuple[Fraction, ...]:
    """Exact orthogonal projection of ``rho`` onto the span of integer generators.

    Solves ``W a = b`` with ``W_ij = w_i.w_j`` and ``b_i = rho.w_i``.
    """
    rho = [Fraction(x) for x in rho]
    n = len(rho)
    ws = [list(map(int, w)) for w in generators]
    if not ws:
        return tuple(Fraction(0) for _ in range(n))
    if _exact_rank(ws) != len(ws):
        raise ValueError("generators are linearly dependent")
    W = [[Fraction(sum(a * b for a, b in zip(wi, wj))) for wj in ws] for wi in ws]
    b = [sum((r * w for r, w in zip(rho, wi)), Fraction(0)) for wi in ws]
    a = _solve_exact(W, b)
    return tuple(sum((a[i] * ws[i][c] for i in range(len(ws))), Fraction(0)) for c in range(n))


def decompose_slope(rho: RationalSlope, cap: int | None = None):
    """Split ``rho = rho1 + rho2`` with ``rho1`` in ``M(rho)`` and ``rho2`` orthogonal.

    Both parts are returned as tuples of ``Fraction``; ``rho1`` is rational by
    construction and ``rho2 . w == 0`` exactly for every generator ``w``.
    """
    M = projection_M(rho, cap)
    rho1 = gram_projection(rho.components, M.generators)
    rho2 = tuple(r - p for r, p in zip(rho.components, rho1))
    return rho1, rho2
