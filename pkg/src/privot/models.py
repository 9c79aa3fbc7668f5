"""Synthetic data models.

Two families live here:

* the Gaussian attraction/repulsion experiment, where ``X`` is uniform on a
  box and ``Y`` is the image of fresh uniform draws under the true map;
* the lower-bound packing ``phi_theta(x) = |x|^2/2 + h^(alpha+1) sum_i theta_i psi((x - p_i)/h)``
  with its pairwise L2 map distances and pushforward TV distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .candidates import AttractionRepulsionParams, attraction_repulsion_gradient
from .dp import SeededRng
from .grid import GridSpec
from .semidual import Dataset, make_dataset


@dataclass(frozen=True)
class ExperimentModel:
    true_params: AttractionRepulsionParams
    lo: float = -0.5
    hi: float = 0.5
    n: int = 200000
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not self.lo < self.hi:
            raise ValueError("sampling box needs lo < hi")

    @property
    def d(self) -> int:
        return self.true_params.d

    def true_map(self, x):
        return attraction_repulsion_gradient(x, self.true_params)


def generate_samples(model: ExperimentModel, rng: SeededRng):
    """``X`` uniform on the box; ``Y = grad f(U)`` for an independent uniform ``U``."""
    d = model.d
    X = model.lo + (model.hi - model.lo) * rng.child(0).generator().random((model.n, d))
    U = model.lo + (model.hi - model.lo) * rng.child(1).generator().random((model.n, d))
    return X, model.true_map(U)


def generate_dataset(model: ExperimentModel, rng: SeededRng, spec: GridSpec) -> Dataset:
    X, Y = generate_samples(model, rng)
    return make_dataset(X, Y, spec)


# ---------------------------------------------------------------- bump


def bump_function(t, order: int = 0):
    """Mollifier ``B(t) = exp(-1/(1 - t^2))`` on ``|t| < 1`` (zero elsewhere) or its derivatives."""
    t = np.asarray(t, dtype=np.float64)
    inside = np.abs(t) < 1.0
    ti = np.where(inside, t, 0.0)
    s = 1.0 - ti * ti
    B = np.where(inside, np.exp(-1.0 / s), 0.0)
    if order == 0:
        return B
    g1 = -2.0 * ti / (s * s)
    if order == 1:
        return B * g1
    if order == 2:
        g2 = -(2.0 + 6.0 * ti * ti) / (s * s * s)
        return B * (g1 * g1 + g2)
    raise ValueError("order must be 0, 1 or 2")


def packing_psi(x, a: float):
    """``a * prod_i B(x_i / 2)``; supported on ``[-2, 2]^d``."""
    x = np.asarray(x, dtype=np.float64)
    return a * np.prod(bump_function(x / 2.0), axis=-1)


def packing_psi_grad(x, a: float):
    x = np.asarray(x, dtype=np.float64)
    B0 = bump_function(x / 2.0)
    B1 = bump_function(x / 2.0, 1) / 2.0
    d = x.shape[-1]
    out = np.empty_like(x)
    for i in range(d):
        others = np.prod(np.delete(B0, i, axis=-1), axis=-1) if d > 1 else 1.0
        out[..., i] = a * B1[..., i] * others
    return out


def packing_psi_hessian(x, a: float):
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    derivs = [bump_function(x / 2.0, k) / 2.0**k for k in range(3)]
    out = np.empty(x.shape + (d,))
    for i in range(d):
        for k in range(d):
            orders = [0] * d
            orders[i] += 1
            orders[k] += 1
            term = np.full(x.shape[:-1], a)
            for ax in range(d):
                term = term * derivs[orders[ax]][..., ax]
            out[..., i, k] = term
    return out


@lru_cache(maxsize=None)
def _psi_hessian_sup(d: int, samples: int = 401) -> float:
    t = np.linspace(-2.0, 2.0, samples)
    mesh = np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)
    H = packing_psi_hessian(mesh, 1.0)
    return float(np.max(np.abs(np.linalg.eigvalsh(H))))


def default_amplitude(d: int = 1) -> float:
    """Largest ``a`` with sampled ``sup ||hess psi||_op <= 0.5`` (valid for every ``h <= 1``, ``alpha >= 1``).

    ``psi`` is linear in ``a``, so the threshold is solved in closed form.
    """
    return 0.5 / _psi_hessian_sup(int(d), 401 if d == 1 else 101)


# ---------------------------------------------------------------- packing


@dataclass(frozen=True, eq=False)
class PackingSpec:
    """Packing parameters. Bumps sit at ``k/(m+1)`` per axis with radius ``2h`` (sup norm)."""

    m: int
    h: float
    alpha: float
    theta: np.ndarray = field(repr=False)
    a: float | None = None
    d: int = 1

    def __post_init__(self):
        if int(self.m) < 1 or int(self.d) < 1:
            raise ValueError("m and d must be positive")
        theta = np.asarray(self.theta, dtype=np.int8).reshape(-1)
        if theta.size != int(self.m) ** int(self.d) or not np.all((theta == 0) | (theta == 1)):
            raise ValueError(f"theta must be a 0/1 vector of length m^d = {int(self.m) ** int(self.d)}")
        # psi(./h) has sup-norm radius 2h, so disjointness needs 4h <= 1/(m+1)
        if not 0 < self.h < 1.0 / (4 * (int(self.m) + 1)):
            raise ValueError(f"need 0 < h < 1/(4(m+1)) = {1 / (4 * (int(self.m) + 1)):.6g} for disjoint supports")
        if not self.alpha > 1:
            raise ValueError("smoothness alpha must exceed 1")
        a = default_amplitude(int(self.d)) if self.a is None else float(self.a)
        if not a > 0:
            raise ValueError("amplitude must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "d", int(self.d))

    @property
    def centers(self) -> np.ndarray:
        return packing_centers(self.m, self.d)

    def with_theta(self, theta) -> "PackingSpec":
        return PackingSpec(self.m, self.h, self.alpha, theta, self.a, self.d)


def packing_centers(m: int, d: int) -> np.ndarray:
    k = np.arange(1, m + 1) / (m + 1)
    mesh = np.meshgrid(*([k] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _locate(x, spec: PackingSpec):
    """Nearest bump index and rescaled offset ``u = (x - p_i)/h`` for each point."""
    x = np.asarray(x, dtype=np.float64)
    m = spec.m
    k = np.clip(np.rint(x * (m + 1)), 1, m).astype(np.int64) - 1
    idx = np.ravel_multi_index(tuple(np.moveaxis(k, -1, 0)), (m,) * spec.d)
    u = (x - (k + 1) / (m + 1)) / spec.h
    return idx, u


def _active(theta, idx, u):
    return (theta[idx] == 1) & (np.max(np.abs(u), axis=-1) < 2.0)


def packing_potential(x, spec: PackingSpec):
    x = np.asarray(x, dtype=np.float64)
    idx, u = _locate(x, spec)
    bump = np.where(_active(spec.theta, idx, u), packing_psi(u, spec.a), 0.0)
    return 0.5 * np.sum(x * x, axis=-1) + spec.h ** (spec.alpha + 1) * bump


def packing_gradient(x, spec: PackingSpec):
    x = np.asarray(x, dtype=np.float64)
    idx, u = _locate(x, spec)
    on = _active(spec.theta, idx, u)[..., None]
    return x + spec.h**spec.alpha * np.where(on, packing_psi_grad(u, spec.a), 0.0)


def packing_hessian(x, spec: PackingSpec):
    x = np.asarray(x, dtype=np.float64)
    idx, u = _locate(x, spec)
    on = _active(spec.theta, idx, u)[..., None, None]
    eye = np.eye(spec.d)
    return eye + spec.h ** (spec.alpha - 1) * np.where(on, packing_psi_hessian(u, spec.a), 0.0)


def _midpoints(resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) / resolution


def _check_resolution(spec: PackingSpec, resolution: int):
    if spec.h * resolution < 8:
        raise ValueError(f"quadrature too coarse: h={spec.h} spans {spec.h * resolution:.2f} cells, need >= 8")


def _cell_chunks(d: int, resolution: int, chunk: int = 1 << 20):
    """Midpoints of the unit-cube tensor grid, in row-major chunks."""
    t = _midpoints(resolution)
    total = resolution**d
    for start in range(0, total, chunk):
        lin = np.arange(start, min(total, start + chunk))
        multi = np.stack(np.unravel_index(lin, (resolution,) * d), axis=-1)
        yield t[multi]


def packing_pairwise_distance(theta1, theta2, spec: PackingSpec, resolution: int) -> float:
    """Midpoint-rule value of ``int_{[0,1]^d} |grad phi_theta1 - grad phi_theta2|^2``."""
    _check_resolution(spec, resolution)
    s1 = spec.with_theta(theta1)
    s2 = spec.with_theta(theta2)
    partial = []
    for x in _cell_chunks(spec.d, resolution):
        diff = packing_gradient(x, s1) - packing_gradient(x, s2)
        partial.append(np.sum(diff * diff))
    return float(np.sum(partial)) / resolution**spec.d


def packing_tv_distance_1d(theta1, theta2, spec: PackingSpec, resolution: int) -> float:
    """TV between the pushforwards of ``Unif[0,1]`` under the two packing maps (``d = 1``).

    Each bump where the bit vectors differ contributes
    ``int |1 - 1/phi''(x)| |phi''(x)| dx`` over its support, with ``phi`` the
    potential carrying that bump; the TV is half the total.
    """
    if spec.d != 1:
        raise ValueError("TV quadrature is implemented for d = 1 only")
    _check_resolution(spec, resolution)
    t1 = np.asarray(theta1).reshape(-1)
    t2 = np.asarray(theta2).reshape(-1)
    differ = (t1 != t2).astype(np.int8)
    x = _midpoints(resolution)[:, None]
    idx, u = _locate(x, spec)
    on = _active(differ, idx, u)
    H = 1.0 + spec.h ** (spec.alpha - 1) * packing_psi_hessian(u, spec.a)[:, 0, 0]
    integrand = np.where(on, np.abs(1.0 - 1.0 / H) * np.abs(H), 0.0)
    return 0.5 * float(np.sum(integrand)) / resolution


def invert_monotone_1d(grad, y, lo: float, hi: float, iters: int = 80):
    """Solve ``grad(x) = y`` on ``[lo, hi]`` by bisection for an increasing ``grad``."""
    y = np.asarray(y, dtype=np.float64)
    a = np.full(y.shape, lo, dtype=np.float64)
    b = np.full(y.shape, hi, dtype=np.float64)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = grad(mid) < y
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def pushforward_density_1d(grad, hess, y, lo: float, hi: float):
    """Density of ``grad(U)`` for ``U ~ Unif[lo, hi]`` and a strictly convex potential."""
    y = np.asarray(y, dtype=np.float64)
    x = invert_monotone_1d(grad, y, lo, hi)
    inside = (y >= grad(np.float64(lo))) & (y <= grad(np.float64(hi)))
    return np.where(inside, 1.0 / ((hi - lo) * hess(x)), 0.0)


def packing_density_1d(theta, spec: PackingSpec, y):
    s = spec.with_theta(theta)
    grad = lambda x: packing_gradient(np.asarray(x)[..., None], s)[..., 0]
    hess = lambda x: packing_hessian(np.asarray(x)[..., None], s)[..., 0, 0]
    return pushforward_density_1d(grad, hess, y, 0.0, 1.0)


def hamming_bits(theta1, theta2) -> int:
    return int(np.sum(np.asarray(theta1).reshape(-1) != np.asarray(theta2).reshape(-1)))


def fit_loglog_slope(xs, ys) -> float:
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    return float(np.polyfit(lx, ly, 1)[0])


def packing_report(hs, alpha: float = 2.0, resolution_cells: int = 64, a: float | None = None) -> list:
    """Distance and TV rows for ``Ham = 1`` single-bump packings (``d = 1``, ``m = 1``).

    ``resolution_cells`` is the number of quadrature cells per ``h``.
    """
    rows = []
    for h in hs:
        spec = PackingSpec(m=1, h=h, alpha=alpha, theta=[0], a=a, d=1)
        res = int(math.ceil(resolution_cells / h))
        dist = packing_pairwise_distance([0], [1], spec, res)
        tv = packing_tv_distance_1d([0], [1], spec, res)
        rows.append({"h": h, "ham": 1, "alpha": alpha, "a": spec.a, "resolution": res,
                     "distance": dist, "tv": tv,
                     "distance_scaled": dist / h ** (2 * alpha + 1), "tv_scaled": tv / h**alpha})
    return rows
