"""Grid Fenchel-Legendre transforms and the empirical semi-dual objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import get_kernels
from .grid import GridPotential, GridSpec, clip_points


@dataclass(frozen=True)
class ClipConfig:
    C: float

    def __post_init__(self):
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValueError(f"clipping constant must be positive and finite, got {self.C}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired samples with their nearest-grid-point indices.

    Build through :func:`make_dataset` so the cached indices always agree
    with :func:`privot.grid.clip_points`.
    """

    X: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)
    spec: GridSpec
    x_idx: np.ndarray = field(repr=False)
    y_idx: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def replace(self, i: int, *, x=None, y=None) -> "Dataset":
        """Neighbouring dataset with record ``i`` replaced."""
        X = self.X.copy()
        Y = self.Y.copy()
        if x is not None:
            X[i] = x
        if y is not None:
            Y[i] = y
        return make_dataset(X, Y, self.spec)


def _as_samples(A, d):
    A = np.array(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1) if d == 1 else A.reshape(1, -1)
    return A


def make_dataset(X, Y, spec: GridSpec) -> Dataset:
    X = _as_samples(X, spec.d)
    Y = _as_samples(Y, spec.d)
    if X.shape != Y.shape:
        raise ValueError(f"X and Y must have the same shape, got {X.shape} and {Y.shape}")
    if X.shape[0] < 1:
        raise ValueError("dataset must contain at least one record")
    if X.shape[1] != spec.d:
        raise ValueError(f"samples have dimension {X.shape[1]}, grid has {spec.d}")
    X.setflags(write=False)
    Y.setflags(write=False)
    return Dataset(X, Y, spec, clip_points(X, spec), clip_points(Y, spec))


def hamming(a: Dataset, b: Dataset) -> int:
    """Number of sample points that differ, counting ``X_i`` and ``Y_i`` separately.

    Neighbouring datasets (distance 1) differ in one source point or one
    target point, which is the granularity the ``2C/n`` sensitivity covers.
    """
    if a.X.shape != b.X.shape:
        raise ValueError("datasets must have the same size to be compared")
    return int(np.any(a.X != b.X, axis=1).sum() + np.any(a.Y != b.Y, axis=1).sum())


def iter_grid_replacements(data: Dataset):
    """Yield every neighbour obtained by moving one ``X_i`` or one ``Y_i`` onto a grid point.

    Items are ``(side, i, g, neighbour)`` with ``side`` in ``{'x', 'y'}``.
    """
    for k in range(2 * data.n * data.spec.size):
        yield _replacement(data, k)


def _replacement(data: Dataset, k: int):
    G = data.spec.size
    side_i, g = divmod(int(k), G)
    side, i = divmod(side_i, data.n)
    side = "xy"[side]
    return side, i, g, data.replace(i, **{side: data.spec.points[g]})


def sample_grid_replacements(data: Dataset, count: int, rng) -> list:
    """``count`` distinct items of :func:`iter_grid_replacements`, chosen uniformly, in enumeration order."""
    total = 2 * data.n * data.spec.size
    count = min(int(count), total)
    picks = np.sort(rng.generator().choice(total, size=count, replace=False))
    return [_replacement(data, k) for k in picks]


def fenchel_grid_transform(f: GridPotential, y) -> float:
    """``max_x <x, y> - f(x)`` over every grid point ``x``."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != f.spec.d:
        raise ValueError("y has the wrong dimension")
    return float(np.max(f.spec.points @ y - f.values))


def fenchel_batch(values, spec: GridSpec, method: str = "separable", threads: int = 1,
                  backend: str | None = None) -> np.ndarray:
    """Grid Fenchel transforms of a ``(B, G)`` stack, evaluated at every grid point.

    ``method='separable'`` nests one-dimensional transforms axis by axis,
    which is exact because the maximisation is over a product set;
    ``method='brute'`` searches all ``G`` points for each of the ``G`` outputs.
    """
    K = get_kernels(backend)
    F = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    if F.shape[1] != spec.size:
        raise ValueError(f"expected {spec.size} values per row, got {F.shape[1]}")
    B = F.shape[0]
    if method == "brute":
        pts = np.ascontiguousarray(spec.points)
        return K.fenchel_brute(pts, pts, F, threads)
    if method != "separable":
        raise ValueError(f"unknown method {method!r}")
    A = -F.reshape((B,) + spec.shape)
    for a in range(spec.d):
        xs = np.ascontiguousarray(spec.axes[a])
        moved = np.moveaxis(A, a + 1, -1)
        lines = np.ascontiguousarray(-moved).reshape(-1, spec.m)
        res = K.legendre_lines(xs, xs, lines, threads).reshape(moved.shape)
        A = np.moveaxis(res, -1, a + 1)
    return np.ascontiguousarray(A).reshape(B, spec.size)


def fenchel_transform_all(f: GridPotential, method: str = "separable", threads: int = 1) -> GridPotential:
    return GridPotential(f.spec, fenchel_batch(f.values[None, :], f.spec, method, threads)[0])


def _check_shared(f: GridPotential, data: Dataset):
    if f.spec != data.spec:
        raise ValueError("potential and dataset live on different grids")


def empirical_semidual_clipped(f: GridPotential, data: Dataset, clip: ClipConfig,
                               fstar: GridPotential | None = None) -> float:
    """Clipped objective: mean of clamped ``f`` at the X indices plus mean of clamped ``f*`` at the Y indices."""
    _check_shared(f, data)
    fstar = fenchel_transform_all(f) if fstar is None else fstar
    C = clip.C
    return float(np.mean(np.clip(f.values[data.x_idx], -C, C))
                 + np.mean(np.clip(fstar.values[data.y_idx], -C, C)))


def empirical_semidual_unclipped(f: GridPotential, data: Dataset,
                                 fstar: GridPotential | None = None) -> float:
    _check_shared(f, data)
    fstar = fenchel_transform_all(f) if fstar is None else fstar
    return float(np.mean(f.values[data.x_idx]) + np.mean(fstar.values[data.y_idx]))


def semidual_scores(F, Fstar, data: Dataset, clip: ClipConfig | None = None) -> np.ndarray:
    """Objective for a stack of candidates (rows of ``F``) with precomputed transforms.

    Uses grid-point counts, so the cost is ``O(B * G)`` regardless of ``n``.
    """
    F = np.atleast_2d(F)
    Fstar = np.atleast_2d(Fstar)
    G = data.spec.size
    cx = np.bincount(data.x_idx, minlength=G).astype(np.float64)
    cy = np.bincount(data.y_idx, minlength=G).astype(np.float64)
    if clip is not None:
        F = np.clip(F, -clip.C, clip.C)
        Fstar = np.clip(Fstar, -clip.C, clip.C)
    return (F @ cx + Fstar @ cy) / data.n


def clamp_saturation(F, Fstar, data: Dataset, clip: ClipConfig) -> dict:
    """Fraction of evaluated terms that hit the clamp, per candidate (diagnostic, data-dependent)."""
    F = np.atleast_2d(F)
    Fstar = np.atleast_2d(Fstar)
    G = data.spec.size
    cx = np.bincount(data.x_idx, minlength=G).astype(np.float64)
    cy = np.bincount(data.y_idx, minlength=G).astype(np.float64)
    return {"f_term": (np.abs(F) > clip.C) @ cx / data.n,
            "fstar_term": (np.abs(Fstar) > clip.C) @ cy / data.n}


def sensitivity_clipped(n: int, clip: ClipConfig) -> float:
    """Per-query sensitivity ``2C/n`` of the clipped objective."""
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 2.0 * clip.C / int(n)


def sensitivity_theoretical(f_sup: float, domain_radius: float, n: int) -> float:
    """Unclipped bound ``max(2 ||f||_inf, 2 |domain|^2) / n``."""
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if f_sup < 0 or domain_radius < 0:
        raise ValueError("f_sup and domain_radius must be non-negative")
    return max(2.0 * f_sup, 2.0 * domain_radius**2) / int(n)
