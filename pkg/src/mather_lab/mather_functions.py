"""The minimal mean action beta, its conjugate alpha and the flats of alpha.

``beta`` is sampled at rational slopes by the periodic minimizer; ``alpha`` is
the discrete Legendre-Fenchel conjugate ``alpha(c) = max_rho <c,rho> - beta(rho)``
of the sampled table.  Flats are subdifferentials of ``beta`` at samples.

A discrete conjugate assigns every sample a window of ``c`` (the range
between neighbouring chord slopes) even where ``beta`` is smooth.  Flat
detection removes that artefact by testing support against
``beta(rho') - beta(rho) >= <c, rho'-rho> + sum_a kappa_a/2 (rho'-rho)_a^2``,
where ``kappa_a`` is a lower estimate of the curvature of ``beta`` along axis
``a`` taken from the neighbouring samples.  At a genuine corner the neighbours see no extra
curvature, so the window survives; on a strictly convex stretch it shrinks
to a point.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .fields import grid_for
from .lagrangian import LagrangianModel
from .periodic_minimizer import MinimizeResult, default_starts, distinct_minimizers, minimize
from .slope_lattice import RationalSlope, format_slope, gamma_group, rat_space

__all__ = [
    "BetaConfig",
    "BetaSample",
    "ConvexTable",
    "FlatEstimate",
    "SennReport",
    "ModeLocking",
    "LcResult",
    "BoundaryArgmaxWarning",
    "beta",
    "beta_table",
    "farey_points",
    "slope_grid",
    "table_from_values",
    "table_from_json",
    "convexity_excess",
    "legendre",
    "c_box_grid",
    "double_conjugate",
    "flats",
    "senn_check",
    "mode_locking_measure",
    "lc_minimizer",
]


class BoundaryArgmaxWarning(UserWarning):
    """The conjugation maximum sits on the edge of the slope table."""


@dataclass(frozen=True)
class BetaConfig:
    """Solver settings for one beta sample.

    ``resolution="basis"`` places ``N`` nodes along each basis vector of the
    period lattice.  ``resolution="unit"`` scales that count by the longest
    basis vector so the spacing is at most ``1/N`` for every slope; a table
    built this way is one fixed discretization, which keeps it convex.
    """

    N: int = 256
    tol: float = 1e-9
    random_starts: int = 4
    max_shifts: int = 8
    seed: int = 0
    max_iter: int = 5000
    resolution: str = "basis"

    def __post_init__(self):
        if self.N < 2 or self.tol <= 0 or self.random_starts < 0 or self.max_shifts < 1:
            raise ValueError("invalid solver configuration")
        if self.resolution not in ("basis", "unit"):
            raise ValueError("resolution must be 'basis' or 'unit'")

    def doubled(self) -> "BetaConfig":
        return replace(self, N=2 * self.N)

    def grid_N(self, rho: RationalSlope) -> int:
        if self.resolution == "basis":
            return self.N
        B = gamma_group(rho).matrix()
        return self.N * int(np.max(np.abs(B).max(axis=0)))

    def starts(self, rho: RationalSlope, grid):
        return default_starts(rho, grid, m=min(rho.denominator, self.max_shifts),
                              r=self.random_starts, seed=self.seed)


@dataclass
class BetaSample:
    rho: RationalSlope
    value: float
    residual: float
    classes: int
    converged: bool
    N: int
    starts: int
    best: MinimizeResult | None = dc_field(default=None, repr=False)

    def __float__(self) -> float:
        return float(self.value)

    def meta(self, config: BetaConfig) -> dict:
        return {"N": self.N, "tol": config.tol, "seed": config.seed, "residual": self.residual,
                "classes": self.classes, "starts": self.starts, "converged": self.converged}


def beta(model: LagrangianModel, rho: RationalSlope, config: BetaConfig | None = None,
         keep_field: bool = True) -> BetaSample:
    """Best mean action over the multistart minimization at slope ``rho``."""
    config = config or BetaConfig()
    N = config.grid_N(rho)
    grid = grid_for(rho, N)
    results = minimize(model, rho, grid, starts=config.starts(rho, grid), tol=config.tol,
                       max_iter=config.max_iter, seed=config.seed)
    ok = [r for r in results if r.converged]
    if not ok:
        best = results[0]
        return BetaSample(rho, float("nan"), best.residual, 0, False, N, len(results),
                          best if keep_field else None)
    best = ok[0]
    classes = distinct_minimizers(ok, rho).count
    return BetaSample(rho, best.action, best.residual, classes, True, N, len(results),
                      best if keep_field else None)


def _beta_job(args):
    model, rho, config = args
    return beta(model, rho, config, keep_field=False)


def farey_points(Q: int, lo=-1, hi=1) -> list[Fraction]:
    """Reduced ``p/q`` in ``[lo, hi]`` with ``q <= Q``, ascending."""
    if Q < 1:
        raise ValueError("denominator cap must be >= 1")
    lo, hi = Fraction(lo), Fraction(hi)
    pts = set()
    for q in range(1, Q + 1):
        for p in range(math.floor(lo * q), math.ceil(hi * q) + 1):
            f = Fraction(p, q)
            if lo <= f <= hi:
                pts.add(f)
    return sorted(pts)


def slope_grid(Q: int, lo=-1, hi=1, n: int = 1) -> list[RationalSlope]:
    """Farey points in one dimension, products of Farey grids otherwise."""
    axis = farey_points(Q, lo, hi)
    if not axis:
        raise ValueError(f"empty slope range [{lo}, {hi}] at cap {Q}")
    return [RationalSlope.from_fractions(c) for c in itertools.product(axis, repeat=n)]


@dataclass
class ConvexTable:
    """Sampled convex function: ``values[i]`` at ``points[i]``.

    A beta table carries its slopes; an alpha table carries the argmax sets
    (indices into its ``source`` beta table) and the chosen supporting slope.
    """

    points: np.ndarray
    values: np.ndarray
    kind: str = "beta"
    slopes: list | None = None
    meta: list = dc_field(default_factory=list)
    argmax: list | None = None
    support: np.ndarray | None = None
    boundary: np.ndarray | None = None
    source: "ConvexTable | None" = None
    flagged: list = dc_field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != len(self.points):
            raise ValueError("points and values differ in length")
        if not self.meta:
            self.meta = [{} for _ in self.values]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def index_of(self, rho) -> int:
        if self.slopes is not None and isinstance(rho, RationalSlope):
            try:
                return self.slopes.index(rho)
            except ValueError:
                pass
        x = rho.as_array() if isinstance(rho, RationalSlope) else np.atleast_1d(np.asarray(rho, float))
        d = np.max(np.abs(self.points - x), axis=1)
        i = int(np.argmin(d))
        if d[i] > 1e-12:
            raise KeyError(f"{rho} is not a sample of the table")
        return i

    def value_at(self, rho) -> float:
        return float(self.values[self.index_of(rho)])

    def _label(self, i) -> list[str]:
        if self.slopes is not None:
            return [str(f) for f in self.slopes[i].components]
        return [repr(float(x)) for x in self.points[i]]

    def to_rows(self) -> list[dict]:
        rows = []
        axis = "rho" if self.kind == "beta" else "c"
        for i in range(len(self)):
            row = {f"{axis}_{a + 1}": lab for a, lab in enumerate(self._label(i))}
            row["value"] = repr(float(self.values[i]))
            if self.kind == "alpha" and self.support is not None and self.source is not None:
                row["support"] = self.source.slope_label(int(self.support[i]))
                row["boundary"] = bool(self.boundary[i])
            for key in ("N", "tol", "seed", "residual", "classes", "starts", "converged", "flagged"):
                if key in self.meta[i]:
                    row[key] = self.meta[i][key]
            rows.append(row)
        return rows

    def slope_label(self, i: int) -> str:
        if self.slopes is not None:
            return format_slope(self.slopes[i])
        return " ".join(repr(float(x)) for x in self.points[i])

    def to_csv(self, path) -> Path:
        path = Path(path)
        rows = self.to_rows()
        fields = list(rows[0].keys()) if rows else []
        for r in rows:
            for k in r:
                if k not in fields:
                    fields.append(k)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(rows)
        return path

    def to_json(self) -> dict:
        out = {"kind": self.kind, "n": self.n, "rows": self.to_rows(),
               "flagged": [self.slope_label(i) if self.kind == "beta" else int(i) for i in self.flagged]}
        return out


def table_from_json(data: dict) -> ConvexTable:
    """Rebuild a beta table written by :meth:`ConvexTable.to_json`."""
    if data.get("kind") != "beta":
        raise ValueError("expected a beta table")
    n = int(data["n"])
    slopes, values, meta = [], [], []
    flagged_labels = set(data.get("flagged", []))
    for row in data["rows"]:
        slopes.append(RationalSlope.from_fractions([Fraction(row[f"rho_{a + 1}"]) for a in range(n)]))
        values.append(float(row["value"]))
        meta.append({k: v for k, v in row.items() if not k.startswith("rho_") and k != "value"})
    table = ConvexTable(np.array([s.as_array() for s in slopes]), np.array(values), "beta", slopes, meta)
    table.flagged = [i for i, s in enumerate(slopes) if format_slope(s) in flagged_labels]
    return table


def table_from_values(slopes: Sequence, values: Sequence[float]) -> ConvexTable:
    """Beta table from given values, e.g. a synthetic convex function."""
    sl = [s if isinstance(s, RationalSlope) else RationalSlope.from_fractions(np.atleast_1d(s)) for s in slopes]
    pts = np.array([s.as_array() for s in sl])
    return ConvexTable(pts, np.asarray(values, float), "beta", sl)


def convexity_excess(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Height of each sample above the lower convex hull of the samples."""
    points = np.atleast_2d(points)
    m, n = points.shape
    if m <= n + 1:
        return np.zeros(m)
    lifted = np.column_stack([points, values])
    try:
        hull = ConvexHull(lifted)
    except QhullError:
        # all samples on one hyperplane: affine, hence convex
        return np.zeros(m)
    eq = hull.equations
    lower = eq[eq[:, n] < -1e-12]
    a, b, d = lower[:, :n], lower[:, n], lower[:, n + 1]
    hull_val = np.max(-(points @ a.T + d) / b, axis=1)
    return np.maximum(values - hull_val, 0.0)


def beta_table(model: LagrangianModel, Q: int, lo=-1, hi=1, config: BetaConfig | None = None,
               n: int | None = None, slopes: Sequence[RationalSlope] | None = None,
               workers: int = 1, audit: bool = True, tol_cvx: float = 1e-9) -> ConvexTable:
    """Sample beta on the Farey grid of order ``Q`` and audit convexity.

    Samples sitting more than ``tol_cvx (1 + |beta|)`` above the lower convex
    hull are re-run at ``2N``; any that still violate stay in ``flagged``.
    Non-converged samples get value ``nan`` and are excluded downstream.
    """
    config = config or BetaConfig()
    n = model.n if n is None else n
    if slopes is None:
        slopes = slope_grid(Q, lo, hi, n)
    slopes = list(slopes)
    if not slopes:
        raise ValueError("empty slope list")
    samples = _run_jobs(model, slopes, config, workers)
    values = np.array([s.value for s in samples])
    meta = [s.meta(config) for s in samples]
    table = ConvexTable(np.array([s.as_array() for s in slopes]), values, "beta", slopes, meta)
    if audit:
        bad = _audit(table, tol_cvx)
        if bad:
            redo = _run_jobs(model, [slopes[i] for i in bad], config.doubled(), workers)
            for i, s in zip(bad, redo):
                if s.converged:
                    table.values[i] = s.value
                    table.meta[i] = s.meta(config) | {"rerun_from": config.N}
            table.flagged = _audit(table, tol_cvx)
            for i in table.flagged:
                table.meta[i]["flagged"] = True
    return table


def _audit(table: ConvexTable, tol_cvx: float) -> list[int]:
    ok = np.flatnonzero(table.valid)
    ex = convexity_excess(table.points[ok], table.values[ok])
    thr = tol_cvx * (1 + np.abs(table.values[ok]))
    return [int(ok[i]) for i in np.flatnonzero(ex > thr)]


def _run_jobs(model, slopes, config, workers):
    jobs = [(model, rho, config) for rho in slopes]
    if workers <= 1 or len(jobs) < 2:
        return [_beta_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_beta_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def c_box_grid(lo: float, hi: float, num: int, n: int = 1) -> np.ndarray:
    """Product grid of ``num`` equispaced points per axis in ``[lo, hi]^n``."""
    if num < 1 or hi < lo:
        raise ValueError("c-grid needs num >= 1 and lo <= hi")
    axis = np.linspace(lo, hi, num)
    return np.stack(np.meshgrid(*([axis] * n), indexing="ij"), -1).reshape(-1, n)


def _tie_key(table: ConvexTable, i: int):
    if table.slopes is not None:
        s = table.slopes[i]
        return (s.denominator, s.components)
    return (0, tuple(table.points[i]))


def _is_boundary(table: ConvexTable) -> np.ndarray:
    P = table.points
    ok = table.valid
    lo = P[ok].min(axis=0)
    hi = P[ok].max(axis=0)
    return np.any((P <= lo + 1e-15) | (P >= hi - 1e-15), axis=1)


def legendre(table: ConvexTable, c_grid, tie_tol: float = 1e-12, warn: bool = True) -> ConvexTable:
    """Discrete conjugate ``alpha(c) = max_i <c, rho_i> - beta_i`` with argmax sets."""
    ok = np.flatnonzero(table.valid)
    if ok.size == 0:
        raise ValueError("table has no valid samples")
    C = np.atleast_2d(np.asarray(c_grid, dtype=float))
    if C.shape[1] != table.n:
        C = C.reshape(-1, table.n)
    S = C @ table.points[ok].T - table.values[ok]
    alpha = S.max(axis=1)
    thr = alpha - tie_tol * (1 + np.abs(alpha))
    bnd = _is_boundary(table)
    argmax, support = [], np.empty(len(C), dtype=int)
    for r in range(len(C)):
        idx = ok[np.flatnonzero(S[r] >= thr[r])]
        argmax.append([int(i) for i in idx])
        support[r] = min(idx, key=lambda i: _tie_key(table, i))
    boundary = bnd[support]
    if warn and boundary.any():
        warnings.warn(f"{int(boundary.sum())} of {len(C)} c-points have their conjugation "
                      "maximum on the edge of the slope table", BoundaryArgmaxWarning, stacklevel=2)
    return ConvexTable(C, alpha, "alpha", None, [{} for _ in alpha], argmax, support, boundary, table)


def double_conjugate(alpha: ConvexTable) -> np.ndarray:
    """``max_c <c, rho> - alpha(c)`` at every slope of the source table."""
    beta_t = alpha.source
    S = beta_t.points @ alpha.points.T - alpha.values
    return S.max(axis=1)


# ---------------------------------------------------------------------------
# flats


def _axis_neighbours(table: ConvexTable):
    """Per sample and axis, the nearest valid sample below and above along that axis."""
    P = table.points
    ok = table.valid
    m, n = P.shape
    nb = np.full((m, n, 2), -1, dtype=int)
    for a in range(n):
        others = np.delete(P, a, axis=1)
        keys = {}
        for i in np.flatnonzero(ok):
            keys.setdefault(tuple(others[i]), []).append(i)
        for members in keys.values():
            members.sort(key=lambda i: P[i, a])
            for pos, i in enumerate(members):
                if pos > 0:
                    nb[i, a, 0] = members[pos - 1]
                if pos + 1 < len(members):
                    nb[i, a, 1] = members[pos + 1]
    return nb


def _curvatures(table: ConvexTable):
    """Per-axis second divided differences and their lower estimates.

    ``kappa[i, a]`` is the second difference of beta along axis ``a`` at
    sample ``i``; ``khat[i, a]`` is the smallest such value among the axis
    neighbours of ``i`` (never negative).  Using neighbours rather than the
    sample itself keeps a genuine corner at ``i`` from cancelling itself.
    """
    P, V = table.points, table.values
    nb = _axis_neighbours(table)
    m, n = P.shape
    kappa = np.full((m, n), np.nan)
    for i in range(m):
        for a in range(n):
            lo, hi = nb[i, a]
            if lo < 0 or hi < 0:
                continue
            dm, dp = P[i, a] - P[lo, a], P[hi, a] - P[i, a]
            sm, sp = (V[i] - V[lo]) / dm, (V[hi] - V[i]) / dp
            kappa[i, a] = 2 * (sp - sm) / (dm + dp)
    khat = np.zeros((m, n))
    for i in range(m):
        around = [j for j in nb[i].ravel() if j >= 0]
        for a in range(n):
            vals = [kappa[j, a] for j in around if np.isfinite(kappa[j, a])]
            if vals:
                khat[i, a] = max(0.0, min(vals))
    return kappa, khat, nb


@dataclass
class FlatEstimate:
    rho: RationalSlope
    members: np.ndarray          # member c-points, shape (k, n)
    member_index: np.ndarray     # indices into the alpha table
    alpha_values: np.ndarray
    alpha_offset: float          # alpha(c) = <c, rho> + alpha_offset on the flat
    generators: np.ndarray       # basis of the span of lifted member differences
    interval: tuple | None = None
    point: bool = True
    tau: float = 0.0
    kappa: np.ndarray | None = None   # per-axis curvature used in the correction
    estimate: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return int(self.generators.shape[0])

    @property
    def width(self) -> float:
        """Interval length in one dimension, member diameter otherwise."""
        if self.interval is not None:
            lo, hi = self.interval
            return max(0.0, hi - lo)
        if len(self.members) < 2:
            return 0.0
        d = self.members[:, None, :] - self.members[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def lifted(self) -> np.ndarray:
        """Members lifted to ``(c, -alpha(c))`` in ``R^{n+1}``."""
        return np.column_stack([self.members, -self.alpha_values])

    def to_json(self, rat_basis=None) -> dict:
        out = {"rho": format_slope(self.rho), "point": self.point, "dimension": self.dimension,
               "members": int(len(self.members)), "width": self.width, "tau": self.tau,
               "kappa": None if self.kappa is None else self.kappa.tolist(), "alpha_offset": self.alpha_offset,
               "generators": self.generators.tolist()}
        if self.interval is not None:
            out["interval"] = list(self.interval)
        if self.estimate is not None:
            out["estimate"] = self.estimate.tolist()
        if rat_basis is not None:
            out["rat_basis"] = rat_basis
        return out


def _span_basis(vectors: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    if len(vectors) == 0:
        return np.zeros((0, vectors.shape[1] if vectors.ndim == 2 else 0))
    _, s, Vt = np.linalg.svd(vectors, full_matrices=False)
    r = int(np.sum(s > rtol * max(1.0, s[0])))
    B = Vt[:r].copy()
    B[np.abs(B) < 1e-12] = 0.0
    # orient each generator so its first nonzero entry is positive
    for row in B:
        nz = np.flatnonzero(row)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return B + 0.0


def _gradient_estimate(table: ConvexTable, i: int, nb) -> np.ndarray:
    P, V = table.points, table.values
    g = np.zeros(table.n)
    for a in range(table.n):
        lo, hi = nb[i, a]
        if lo >= 0 and hi >= 0:
            dm, dp = P[i, a] - P[lo, a], P[hi, a] - P[i, a]
            sm, sp = (V[i] - V[lo]) / dm, (V[hi] - V[i]) / dp
            g[a] = (dp * sm + dm * sp) / (dm + dp)
        elif lo >= 0:
            g[a] = (V[i] - V[lo]) / (P[i, a] - P[lo, a])
        elif hi >= 0:
            g[a] = (V[hi] - V[i]) / (P[hi, a] - P[i, a])
    return g


def flats(alpha: ConvexTable, rho, tau: float | None = None, _cache=None) -> FlatEstimate:
    """Subdifferential of the sampled beta at ``rho``, restricted to the c-grid.

    ``tau`` defaults to ``1e-6 (1 + |beta(rho)|)``.  When no grid point
    qualifies the result is a point estimate at the sampled gradient.
    """
    table = alpha.source
    if table is None:
        raise ValueError("flats need an alpha table produced by legendre")
    i = table.index_of(rho)
    if not table.valid[i]:
        raise ValueError(f"slope {rho} has no valid beta sample")
    if isinstance(rho, RationalSlope):
        slope = rho
    else:
        slope = table.slopes[i] if table.slopes else RationalSlope.from_fractions(np.atleast_1d(rho))
    b = float(table.values[i])
    tau = 1e-6 * (1 + abs(b)) if tau is None else float(tau)
    if _cache is None:
        _cache = _curvatures(table)
    _, khat, nb = _cache
    k = khat[i]
    ok = np.flatnonzero(table.valid)
    P, V = table.points[ok], table.values[ok]
    x = table.points[i]

    cand = np.array([r for r, am in enumerate(alpha.argmax) if i in am], dtype=int)
    members = np.zeros(0, dtype=int)
    if cand.size:
        C = alpha.points[cand]
        quad = 0.5 * (((P - x) ** 2) @ k)
        rival = (C @ P.T - V + quad).max(axis=1)
        own = C @ x - b
        members = cand[own >= rival - tau]

    interval = None
    if table.n == 1:
        d = P[:, 0] - x[0]
        num = V - b - 0.5 * k[0] * d**2 + tau
        left, right = d < 0, d > 0
        lo_e = float(np.max(num[left] / d[left])) if left.any() else -math.inf
        hi_e = float(np.min(num[right] / d[right])) if right.any() else math.inf
        interval = (lo_e, hi_e)
        cpts = alpha.points[:, 0]
        members = np.flatnonzero((cpts >= lo_e) & (cpts <= hi_e)) if lo_e <= hi_e else np.zeros(0, int)

    mem_c = alpha.points[members]
    mem_a = alpha.values[members]
    lifted = np.column_stack([mem_c, -mem_a])
    gens = _span_basis(lifted[1:] - lifted[0]) if len(members) > 1 else np.zeros((0, table.n + 1))
    point = len(members) < 2
    est = None
    if len(members) == 0:
        est = _gradient_estimate(table, i, nb)
        if interval is not None and interval[0] > interval[1]:
            est = np.array([0.5 * (interval[0] + interval[1])])
    return FlatEstimate(slope, mem_c, members, mem_a, -b, gens, interval, point, tau, k.copy(), est)


@dataclass
class SennReport:
    rho: RationalSlope
    dim_flat: int
    dim_rat: int
    max_distance: float
    passed: bool
    foliation: bool
    rat_basis: list
    generators: list

    def to_dict(self) -> dict:
        return {"rho": format_slope(self.rho), "dim_flat": self.dim_flat, "dim_rat": self.dim_rat,
                "max_distance": self.max_distance, "passed": self.passed,
                "foliation": self.foliation, "rat_basis": self.rat_basis,
                "generators": self.generators}


def senn_check(flat: FlatEstimate, tol: float = 1e-3) -> SennReport:
    """Check that lifted flat differences lie in ``span rat(rho, 1)``.

    Members are lifted to ``(c, -alpha(c))``: on a flat ``alpha`` is affine
    with gradient ``rho``, so such differences ``(dc, -rho.dc)`` are exactly
    the vectors orthogonal to ``(rho, 1)``.
    """
    rat = rat_space(flat.rho)
    lifted = flat.lifted()
    if len(lifted) < 2:
        maxd = 0.0
    else:
        Pm = rat.projector()
        resid = lifted - lifted @ Pm.T
        maxd = 0.0
        for r in resid:
            maxd = max(maxd, float(np.sqrt(((resid - r) ** 2).sum(axis=1)).max()))
    dim_flat = flat.dimension
    passed = maxd <= tol and dim_flat <= rat.dimension
    return SennReport(flat.rho, dim_flat, rat.dimension, maxd, passed, dim_flat == 0,
                      [list(g) for g in rat.generators], flat.generators.tolist())


@dataclass
class ModeLocking:
    fraction: float
    widths: dict
    mask: np.ndarray = dc_field(repr=False)
    flats: dict = dc_field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "widths": self.widths}


def mode_locking_measure(alpha: ConvexTable, Q: int | None = None, tau: float | None = None,
                         min_members: int = 2, include_edge: bool = False) -> ModeLocking:
    """Fraction of c-grid points inside a detected flat of a slope with denominator ``<= Q``.

    Widths are per slope; in one dimension the exact interval length clipped
    to the c-box, otherwise the member diameter.  Flats with fewer than
    ``min_members`` grid points count as undetected and get width 0.  Slopes
    on the edge of the table have windows that are cut off only by the table
    range, so they are skipped unless ``include_edge`` is set.
    """
    table = alpha.source
    cache = _curvatures(table)
    lo_box = alpha.points.min(axis=0)
    hi_box = alpha.points.max(axis=0)
    mask = np.zeros(len(alpha), dtype=bool)
    widths, found = {}, {}
    edge = _is_boundary(table)
    for i in np.flatnonzero(table.valid):
        s = table.slopes[i]
        if Q is not None and s.denominator > Q:
            continue
        if edge[i] and not include_edge:
            continue
        fl = flats(alpha, s, tau, _cache=cache)
        found[format_slope(s)] = fl
        if fl.interval is not None:
            a, b = max(fl.interval[0], lo_box[0]), min(fl.interval[1], hi_box[0])
            w = max(0.0, b - a)
        else:
            w = fl.width
        if len(fl.members) >= min_members:
            mask[fl.member_index] = True
        else:
            w = 0.0
        widths[format_slope(s)] = w
    return ModeLocking(float(mask.mean()), widths, mask, found)


@dataclass
class LcResult:
    rho: RationalSlope
    result: MinimizeResult
    alpha: float
    identity_error: float
    boundary: bool


def lc_minimizer(model: LagrangianModel, c, table: ConvexTable,
                 config: BetaConfig | None = None) -> LcResult:
    """Minimizer of ``L - c`` at the supporting slope of ``c`` in ``table``.

    Checks that its mean action equals ``-alpha(c)``.
    """
    config = config or BetaConfig()
    c = np.atleast_1d(np.asarray(c, dtype=float))
    alpha_t = legendre(table, c[None, :], warn=False)
    i = int(alpha_t.support[0])
    rho = table.slopes[i]
    if alpha_t.boundary[0]:
        warnings.warn(f"supporting slope {rho} of c={c.tolist()} is on the table edge",
                      BoundaryArgmaxWarning, stacklevel=2)
    N = int(table.meta[i].get("N", config.N))
    shifted = model.shifted(c)
    grid = grid_for(rho, N)
    results = minimize(shifted, rho, grid, starts=config.starts(rho, grid), tol=config.tol,
                       max_iter=config.max_iter, seed=config.seed)
    best = results[0]
    a = float(alpha_t.values[0])
    return LcResult(rho, best, a, abs(best.action + a), bool(alpha_t.boundary[0]))
