"""Uniform box grids, potentials and vector fields sampled on them.

Linear indices follow row-major (C) order over multi-indices, so the first
axis varies slowest. ``values.reshape(spec.shape)`` recovers the tensor view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``m`` points per axis on the box ``[lo, hi]``."""

    d: int
    lo: tuple
    hi: tuple
    m: int

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if int(self.m) < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.m}")
        lo = tuple(float(v) for v in np.broadcast_to(self.lo, (self.d,)))
        hi = tuple(float(v) for v in np.broadcast_to(self.hi, (self.d,)))
        if not all(np.isfinite(lo + hi)):
            raise ValueError("grid bounds must be finite")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"need lo < hi on every axis, got lo={lo}, hi={hi}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def size(self) -> int:
        return self.m**self.d

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.d

    @property
    def steps(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / (self.m - 1)

    @cached_property
    def axes(self) -> list:
        """Per-axis coordinate arrays."""
        return [
            self.lo[a] + np.arange(self.m) * (self.hi[a] - self.lo[a]) / (self.m - 1)
            for a in range(self.d)
        ]

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points as a ``(G, d)`` array in linear-index order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    def linearize(self, multi) -> int | np.ndarray:
        multi = np.asarray(multi, dtype=np.int64)
        if np.any(multi < 0) or np.any(multi >= self.m):
            raise IndexError("multi-index out of range")
        return np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), self.shape)

    def delinearize(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx >= self.size):
            raise IndexError("linear index out of range")
        return np.stack(np.unravel_index(idx, self.shape), axis=-1)

    def to_dict(self) -> dict:
        return {"d": self.d, "lo": list(self.lo), "hi": list(self.hi), "m": self.m}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        return cls(d=data["d"], lo=tuple(data["lo"]), hi=tuple(data["hi"]), m=data["m"])


def make_uniform_grid(lo, hi, m: int, d: int) -> GridSpec:
    """Build a :class:`GridSpec`; scalar bounds are broadcast to every axis."""
    return GridSpec(d=d, lo=tuple(np.broadcast_to(lo, (d,))), hi=tuple(np.broadcast_to(hi, (d,))), m=m)


@dataclass(frozen=True, eq=False)
class GridPotential:
    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.spec.size:
            raise ValueError(f"expected {self.spec.size} values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("potential values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def tensor(self) -> np.ndarray:
        return self.values.reshape(self.spec.shape)


@dataclass(frozen=True, eq=False)
class GridVectorField:
    spec: GridSpec
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64).reshape(self.spec.size, self.spec.d)
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vector field components must be finite")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)


def clip_points(points, spec: GridSpec) -> np.ndarray:
    """Vectorised :func:`clip_to_grid` for an ``(n, d)`` array of points.

    The nearest grid point under the Euclidean norm is found axis by axis
    (the squared distance separates over coordinates). Exact ties round down,
    which selects the smallest linear index among the tied points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[1] != spec.d:
        raise ValueError(f"points have dimension {pts.shape[1]}, grid has {spec.d}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("cannot clip non-finite points")
    lo = np.array(spec.lo)
    hi = np.array(spec.hi)
    t = (np.clip(pts, lo, hi) - lo) / spec.steps
    k = np.clip(np.ceil(t - 0.5), 0, spec.m - 1).astype(np.int64)
    return np.ravel_multi_index(tuple(k.T), spec.shape).astype(np.int64)


def clip_to_grid(p, spec: GridSpec) -> int:
    """Linear index of the grid point closest to ``p`` (clamped into the box first)."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    return int(clip_points(p[None, :], spec)[0])


def finite_diff_gradient(f: GridPotential) -> GridVectorField:
    """Central differences inside the box, first-order one-sided at the faces."""
    spec = f.spec
    grads = np.gradient(f.tensor(), *spec.steps, edge_order=1)
    if spec.d == 1:
        grads = [grads]
    return GridVectorField(spec, np.stack([g.ravel() for g in grads], axis=1))


def eval_potential(f: GridPotential, idx) -> float:
    idx = int(idx)
    if not 0 <= idx < f.spec.size:
        raise IndexError(f"index {idx} outside grid of size {f.spec.size}")
    return float(f.values[idx])
