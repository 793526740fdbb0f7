"""Quasi-periodic fields ``u(x) = rho.x + v(x)`` sampled on lattice-adapted grids.

A :class:`Grid` places ``N`` points along each basis column of the period
lattice, ``x = B (i / N)``.  The periodic part ``v`` is stored as an array of
shape ``(N,) * n`` indexed by ``i``; it extends to ``R^n`` by periodicity in
``i``, so every :class:`Field` belongs to the class ``W`` by construction.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .slope_lattice import (
    PeriodLattice,
    RationalSlope,
    _lattice_from_rows,
    _solve_exact,
    format_slope,
    gamma_group,
    parse_slope,
)

__all__ = ["Grid", "Field", "grid_for", "save_field", "load_field"]

_MAGIC = b"AMFIELD1"


@dataclass(frozen=True, eq=False)
class Grid:
    lattice: PeriodLattice
    N: int

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("grid resolution N must be >= 2")

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N ** self.n

    @property
    def B(self) -> np.ndarray:
        return self.lattice.matrix()

    @property
    def volume(self) -> int:
        return self.lattice.covolume

    def index_coords(self) -> np.ndarray:
        """Cell coordinates ``i / N`` of all nodes, shape ``(N^n, n)``."""
        axes = [np.arange(self.N) / self.N] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)

    def nodes(self) -> np.ndarray:
        """Node positions ``x = B (i/N)``, shape ``(N^n, n)``, C order in ``i``."""
        return self.index_coords() @ self.B.T

    def same_as(self, other: "Grid") -> bool:
        return self.N == other.N and self.lattice == other.lattice

    def index_shift(self, z) -> tuple[Fraction, ...]:
        """Shift in index units corresponding to the translation ``x -> x + z``."""
        n = self.n
        B = [[Fraction(b) for b in row] for row in self.lattice.basis]
        t = _solve_exact(B, [Fraction(int(a)) for a in z])
        return tuple(self.N * ti for ti in t[:n])

    def to_json(self) -> dict:
        return {"n": self.n, "N": self.N, "basis": self.lattice.to_json(), "covolume": self.volume}


def grid_for(rho: RationalSlope, N: int) -> Grid:
    return Grid(gamma_group(rho), N)


def _fourier_shift(v: np.ndarray, t) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``v`` at ``i + t``."""
    shape = v.shape
    V = np.fft.rfftn(v)
    for axis, ta in enumerate(t):
        ta = float(ta)
        if ta == 0:
            continue
        N = shape[axis]
        if axis == len(shape) - 1:
            m = np.arange(V.shape[axis])
        else:
            m = np.fft.fftfreq(N, 1.0 / N)
        phase = np.exp(2j * np.pi * m * ta / N)
        bshape = [1] * V.ndim
        bshape[axis] = -1
        V = V * phase.reshape(bshape)
    return np.fft.irfftn(V, s=shape, axes=tuple(range(len(shape))))


def shift_periodic(v: np.ndarray, t) -> np.ndarray:
    """Values of the periodic array ``v`` at index offset ``t`` (rational per axis).

    Integral offsets are exact rolls; fractional ones use the trigonometric
    interpolant, which is spectrally accurate for smooth ``v``.
    """
    t = [Fraction(x) for x in t]
    whole = [int(np.floor(x)) for x in t]
    frac = [x - w for x, w in zip(t, whole)]
    out = np.roll(v, shift=[-w for w in whole], axis=tuple(range(v.ndim)))
    if any(frac):
        out = _fourier_shift(out, frac)
    return out


@dataclass(eq=False)
class Field:
    rho: RationalSlope
    grid: Grid
    v: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float).reshape(self.grid.shape)
        if self.rho.n != self.grid.n:
            raise ValueError("slope and grid dimensions differ")

    @classmethod
    def affine(cls, rho: RationalSlope, grid: Grid, const: float = 0.0) -> "Field":
        return cls(rho, grid, np.full(grid.shape, float(const)))

    @property
    def n(self) -> int:
        return self.grid.n

    def linear_part(self) -> np.ndarray:
        return (self.grid.nodes() @ self.rho.as_array()).reshape(self.grid.shape)

    def u(self) -> np.ndarray:
        """Node values of ``u = rho.x + v``, shape ``grid.shape``."""
        return self.linear_part() + self.v

    def index_gradient(self) -> np.ndarray:
        """Central differences of ``v`` in cell coordinates, shape ``shape + (n,)``."""
        N = self.grid.N
        parts = [
            0.5 * N * (np.roll(self.v, -1, axis=a) - np.roll(self.v, 1, axis=a))
            for a in range(self.n)
        ]
        return np.stack(parts, axis=-1)

    def gradient(self) -> np.ndarray:
        """Discrete ``grad u`` at the nodes: ``rho + B^{-T} D_s v``."""
        Binv_T = np.linalg.inv(self.grid.B).T
        return self.rho.as_array() + self.index_gradient() @ Binv_T.T

    def translate(self, z, zplus: int = 0) -> "Field":
        """Field for ``u(x + z) + zplus``; ``z`` integer, any element of ``Z^n``."""
        z = [int(a) for a in z]
        t = self.grid.index_shift(z)
        shifted = shift_periodic(self.v, t)
        const = float(self.rho.dot(z)) + int(zplus)
        return Field(self.rho, self.grid, shifted + const, self.seed)

    def oscillation(self) -> float:
        """``sup |v - v(0)|`` over the nodes."""
        flat = self.v.ravel()
        return float(np.max(np.abs(flat - flat[0])))

    def header(self) -> dict:
        return {
            "n": self.n,
            "N": self.grid.N,
            "basis": self.grid.lattice.to_json(),
            "rho": format_slope(self.rho),
            "seed": self.seed,
        }


def save_field(path, field: Field) -> Path:
    """Binary field file: magic, header length, JSON header, float64 LE values."""
    path = Path(path)
    header = json.dumps(field.header(), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(field.v, dtype="<f8").tobytes())
    return path


def load_field(path) -> Field:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a field file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        data = np.frombuffer(fh.read(), dtype="<f8")
    basis = header["basis"]
    n = header["n"]
    lattice = _lattice_from_rows([[basis[i][j] for i in range(n)] for j in range(n)], n)
    grid = Grid(lattice, header["N"])
    if data.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {data.size}")
    return Field(parse_slope(header["rho"]), grid, data.reshape(grid.shape).copy(), header.get("seed"))
