"""Finite-dimensional wavelet spaces and coefficient-grid coverings.

The basis is a tensor product of a compactly supported orthonormal
scaling/wavelet pair, mapped onto the box ``[lo, hi]^d`` and restricted to
the translates whose supports stay inside the box. Level 0 holds the
scaling functions at the coarsest scale ``j0``; level ``l >= 1`` holds the
``2^d - 1`` mixed types at scale ``j0 + l - 1``. ``V_J`` spans levels
``0..J``, and coefficient vectors are ordered by (level, type, translate).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .dp import PrivacyBudget
from .grid import GridPotential, GridSpec


class CoveringTooLarge(ValueError):
    """Raised when a requested covering exceeds the enumeration cap."""


# ------------------------------------------------------------ generators


@dataclass(frozen=True)
class WaveletGenerator:
    """Scaling function ``father``/wavelet ``mother`` pair supported on ``[0, support]``."""

    name: str
    support: int
    base_level: int
    smoothness: float
    father: object = field(repr=False, compare=False)
    mother: object = field(repr=False, compare=False)


def _haar_father(t):
    t = np.asarray(t, dtype=np.float64)
    return ((t >= 0) & (t < 1)).astype(np.float64)


def _haar_mother(t):
    t = np.asarray(t, dtype=np.float64)
    return np.where((t >= 0) & (t < 0.5), 1.0, 0.0) - np.where((t >= 0.5) & (t < 1), 1.0, 0.0)


@lru_cache(maxsize=None)
def _db2_tables(levels: int = 12):
    """Daubechies-2 scaling function and wavelet on the dyadic grid ``k / 2^levels`` of ``[0, 3]``."""
    s3 = math.sqrt(3.0)
    h = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * math.sqrt(2.0))
    # values at the integers: eigenvector of the refinement operator for eigenvalue 1
    A = np.zeros((4, 4))
    for n in range(4):
        for k in range(4):
            if 0 <= 2 * n - k < 4:
                A[n, k] = math.sqrt(2.0) * h[2 * n - k]
    w, V = np.linalg.eig(A)
    v = np.real(V[:, np.argmin(np.abs(w - 1.0))])
    v = v / v.sum()
    N = 3 * 2**levels
    phi = np.zeros(N + 1)
    phi[:: 2**levels] = v
    for lev in range(1, levels + 1):
        stride = 2 ** (levels - lev)
        for idx in range(stride, N, 2 * stride):
            # phi(x) = sqrt(2) sum_k h_k phi(2x - k); 2x - k sits on the coarser grid
            acc = 0.0
            for k in range(4):
                j = 2 * idx - k * 2**levels
                if 0 <= j <= N:
                    acc += h[k] * phi[j]
            phi[idx] = math.sqrt(2.0) * acc
    g = np.array([(-1) ** k * h[3 - k] for k in range(4)])
    psi = np.zeros(N + 1)
    for idx in range(N + 1):
        acc = 0.0
        for k in range(4):
            j = 2 * idx - k * 2**levels
            if 0 <= j <= N:
                acc += g[k] * phi[j]
        psi[idx] = math.sqrt(2.0) * acc
    return np.linspace(0.0, 3.0, N + 1), phi, psi


def _db2_father(t):
    x, phi, _ = _db2_tables()
    return np.interp(np.asarray(t, dtype=np.float64), x, phi, left=0.0, right=0.0)


def _db2_mother(t):
    x, _, psi = _db2_tables()
    return np.interp(np.asarray(t, dtype=np.float64), x, psi, left=0.0, right=0.0)


GENERATORS = {
    "haar": WaveletGenerator("haar", 1, 0, 0.0, _haar_father, _haar_mother),
    # Holder exponent of the db2 scaling function is about 0.55
    "db2": WaveletGenerator("db2", 3, 2, 0.55, _db2_father, _db2_mother),
}


# ------------------------------------------------------------ basis


@dataclass(frozen=True)
class WaveletBasisSpec:
    J: int
    d: int
    generator: str = "haar"
    lo: float = -1.0
    hi: float = 2.0

    def __post_init__(self):
        if int(self.J) < 0:
            raise ValueError(f"J must be >= 0, got {self.J}")
        if int(self.d) < 1:
            raise ValueError("d must be >= 1")
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}; choose from {sorted(GENERATORS)}")
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    @property
    def gen(self) -> WaveletGenerator:
        return GENERATORS[self.generator]

    def translates(self, scale: int) -> range:
        """Shifts ``k`` whose support ``[k, k + S] / 2^scale`` fits in the unit interval."""
        return range(0, max(0, 2**scale - self.gen.support + 1))

    @cached_property
    def entries(self) -> list:
        """``(level, type, scale, k)`` for every basis function, in coefficient order."""
        gen = self.gen
        out = []
        ks = self.translates(gen.base_level)
        for k in itertools.product(ks, repeat=self.d):
            out.append((0, (0,) * self.d, gen.base_level, k))
        for level in range(1, int(self.J) + 1):
            scale = gen.base_level + level - 1
            ks = self.translates(scale)
            for g in itertools.product((0, 1), repeat=self.d):
                if not any(g):
                    continue
                for k in itertools.product(ks, repeat=self.d):
                    out.append((level, g, scale, k))
        return out

    @property
    def dimension(self) -> int:
        return len(self.entries)

    @property
    def volume(self) -> float:
        return (self.hi - self.lo) ** self.d

    def design_matrix(self, points) -> np.ndarray:
        """Basis functions evaluated at ``points`` (``(P, d)``), shape ``(P, dim)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        L = self.hi - self.lo
        t = (pts - self.lo) / L
        inside = np.all((t >= 0) & (t <= 1), axis=1)
        # the closed right face belongs to the last cell
        t = np.minimum(t, 1.0 - 1e-12)
        gen = self.gen
        norm = L ** (-0.5)
        cache = {}

        def col(kind, scale, k, a):
            key = (kind, scale, k, a)
            if key not in cache:
                fn = gen.mother if kind else gen.father
                cache[key] = norm * 2 ** (scale / 2) * fn(2**scale * t[:, a] - k)
            return cache[key]

        Phi = np.empty((pts.shape[0], self.dimension))
        for e, (_, g, scale, k) in enumerate(self.entries):
            v = np.ones(pts.shape[0])
            for a in range(self.d):
                v = v * col(g[a], scale, k[a], a)
            Phi[:, e] = v
        Phi[~inside] = 0.0
        return Phi


def basis_dimension(J: int, d: int, generator: str = "haar") -> int:
    return WaveletBasisSpec(J, d, generator).dimension


def dimension_constant(d: int, generator: str = "haar") -> float:
    """Recorded ``c`` with ``dim(V_J) <= c 2^{Jd}`` for every ``J``.

    Level ``l`` has at most ``(2^d - 1) 2^{(j0 + l - 1) d}`` functions, so the
    total telescopes to at most ``2^{j0 d} 2^{Jd}``.
    """
    return float(2 ** (GENERATORS[generator].base_level * d))


def synthesize(coeffs, basis: WaveletBasisSpec, grid: GridSpec) -> GridPotential:
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    if coeffs.size != basis.dimension:
        raise ValueError(f"expected {basis.dimension} coefficients, got {coeffs.size}")
    if grid.d != basis.d:
        raise ValueError("grid and basis dimensions differ")
    return GridPotential(grid, basis.design_matrix(grid.points) @ coeffs)


def midpoint_cells(basis: WaveletBasisSpec, per_axis: int) -> tuple[np.ndarray, float]:
    """Cell midpoints of a uniform partition of the box, and the cell volume."""
    L = basis.hi - basis.lo
    t = basis.lo + (np.arange(per_axis) + 0.5) * L / per_axis
    mesh = np.meshgrid(*([t] * basis.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), (L / per_axis) ** basis.d


def norm_constants(d: int, J: int, generator: str = "haar") -> dict:
    """Recorded constants for ``||g||_2 <= c1 ||f||_inf`` and ``||f||_inf <= c2 2^{Jd/2} ||g||_inf``.

    ``c1`` is ``sqrt(vol)`` from Parseval. ``c2`` bounds the number of basis
    functions overlapping any point, weighted by their peak values, and is
    reported as its supremum over ``J``.
    """
    basis = WaveletBasisSpec(J, d, generator)
    gen = basis.gen
    L = basis.hi - basis.lo
    x, fa, mo = _peak_table(generator)
    peak = max(fa, mo) * L ** (-0.5)
    per_level_overlap = gen.support**d
    total = per_level_overlap * (peak**d) * 2 ** (gen.base_level * d / 2)
    # levels l >= 1: (2^d - 1) types, each overlapping support^d translates
    geom = sum(2 ** ((gen.base_level + j) * d / 2) for j in range(J))
    total += (2**d - 1) * per_level_overlap * (peak**d) * geom
    sup_ratio = (1 + (2**d - 1) / (2 ** (d / 2) - 1)) * per_level_overlap * peak**d * 2 ** (gen.base_level * d / 2)
    return {"c1": math.sqrt(basis.volume), "c2": sup_ratio, "c2_at_J": total / 2 ** (J * d / 2)}


@lru_cache(maxsize=None)
def _peak_table(generator: str):
    gen = GENERATORS[generator]
    t = np.linspace(0, gen.support, 20001)
    return t, float(np.max(np.abs(gen.father(t)))), float(np.max(np.abs(gen.mother(t))))


# ------------------------------------------------------------ covering


def covering_axis(delta: float, bound: float) -> np.ndarray:
    """Per-coordinate centres: ``ceil(2B/delta)`` points spaced ``delta`` apart covering ``[-B, B]``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not bound > 0:
        raise ValueError("amplitude bound must be positive")
    K = max(1, math.ceil(2 * bound / delta - 1e-12))
    return np.minimum(-bound + delta * (np.arange(K) + 0.5), bound)


def covering_size(dim: int, delta: float, bound: float) -> int:
    return covering_axis(delta, bound).size ** int(dim)


def delta_grid_covering(J: int, delta: float, bound: float, basis: WaveletBasisSpec | None = None,
                        d: int = 1, cap: int = 10**6):
    """Lazily enumerate the coefficient grid in odometer order (last coordinate fastest)."""
    basis = WaveletBasisSpec(J, d) if basis is None else basis
    axis = covering_axis(delta, bound)
    dim = basis.dimension
    total = axis.size**dim
    if total > cap:
        raise CoveringTooLarge(f"covering has {total} elements, cap is {cap}")
    for combo in itertools.product(axis, repeat=dim):
        yield np.array(combo)


def nearest_cover_element(gamma, delta: float, bound: float) -> np.ndarray:
    """Closest grid element to ``gamma`` in coefficient sup norm (coordinate-wise rounding)."""
    axis = covering_axis(delta, bound)
    gamma = np.asarray(gamma, dtype=np.float64)
    idx = np.abs(gamma[..., None] - axis).argmin(axis=-1)
    return axis[idx]


# ------------------------------------------------------------ admissibility


@dataclass(frozen=True)
class AdmissibilityParams:
    M: float
    R: float
    alpha: float
    d: int

    def __post_init__(self):
        if not self.M > 2:
            raise ValueError("M must exceed 2")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        ident = identity_holder_norm(self.d)
        if not self.R > ident:
            raise ValueError(f"R must exceed the Holder norm of the identity ({ident})")


def identity_holder_norm(d: int, lo: float = -1.0, hi: float = 2.0) -> float:
    """``C^alpha`` norm of the identity on ``[lo, hi]^d`` for any ``alpha >= 1``.

    Each coordinate contributes its sup norm plus the unit first derivative;
    higher derivatives and Holder quotients vanish.
    """
    return d * (max(abs(lo), abs(hi)) + 1.0)


@dataclass
class AdmissibilityResult:
    passed: bool
    violations: list
    min_eig: float
    max_eig: float
    max_abs: float
    max_grad: float


def grid_hessian(f: GridPotential) -> tuple[np.ndarray, np.ndarray]:
    """Second-order finite-difference gradient ``(G, d)`` and symmetrised Hessian ``(G, d, d)``."""
    spec = f.spec
    T = f.tensor()
    grads = np.gradient(T, *spec.steps, edge_order=2)
    if spec.d == 1:
        grads = [grads]
    H = np.empty((spec.size, spec.d, spec.d))
    for i, gi in enumerate(grads):
        second = np.gradient(gi, *spec.steps, edge_order=2)
        if spec.d == 1:
            second = [second]
        for k in range(spec.d):
            H[:, i, k] = second[k].ravel()
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    return np.stack([g.ravel() for g in grads], axis=1), H


def admissibility_check(f: GridPotential, params: AdmissibilityParams) -> AdmissibilityResult:
    """Check value, gradient and Hessian bounds at every grid point.

    Returns the first violating grid point for each failed condition.
    """
    spec = f.spec
    if spec.m < 5:
        raise ValueError("need at least 5 points per axis for finite-difference Hessians")
    if spec.d != params.d:
        raise ValueError("potential and parameter dimensions differ")
    M = params.M
    grad, H = grid_hessian(f)
    eig = np.linalg.eigvalsh(H)
    gnorm = np.linalg.norm(grad, axis=1)
    checks = [
        ("value", np.abs(f.values) > 2 * M**2, np.abs(f.values)),
        ("gradient", gnorm > M, gnorm),
        ("hessian_lower", eig[:, 0] < 1.0 / M, eig[:, 0]),
        ("hessian_upper", eig[:, -1] > M, eig[:, -1]),
    ]
    violations = []
    for name, bad, val in checks:
        hits = np.flatnonzero(bad)
        if hits.size:
            i = int(hits[0])
            violations.append({"condition": name, "index": i,
                               "point": spec.points[i].tolist(), "value": float(val[i])})
    return AdmissibilityResult(not violations, violations, float(eig[:, 0].min()),
                               float(eig[:, -1].max()), float(np.abs(f.values).max()), float(gnorm.max()))


def screen_covering(J: int, delta: float, params: AdmissibilityParams, grid: GridSpec,
                    basis: WaveletBasisSpec | None = None, bound: float | None = None,
                    offset: str = "none", cap: int = 10**6) -> dict:
    """Enumerate the covering, synthesise each element and report the admissible fraction.

    ``offset='quadratic'`` screens ``|x|^2/2`` plus each element instead of the
    bare expansion.
    """
    basis = WaveletBasisSpec(J, params.d) if basis is None else basis
    bound = 2 * params.M**2 if bound is None else bound
    Phi = basis.design_matrix(grid.points)
    base = 0.5 * np.sum(grid.points**2, axis=1) if offset == "quadratic" else 0.0
    total = accepted = 0
    for gamma in delta_grid_covering(J, delta, bound, basis, cap=cap):
        total += 1
        if admissibility_check(GridPotential(grid, base + Phi @ gamma), params).passed:
            accepted += 1
    return {"total": total, "accepted": accepted, "acceptance_rate": accepted / total if total else 0.0}


@dataclass
class CoveringCardinality:
    dim: int
    per_axis: int
    log_exact: float
    log_bound: float
    c: float
    c_prime: float


def covering_log_cardinality(J: int, delta: float, params: AdmissibilityParams,
                             basis: WaveletBasisSpec | None = None) -> CoveringCardinality:
    """Exact ``dim(V_J) ln ceil(4 M^2 / delta)`` and the ``c 2^{Jd} ln(c' 2^{Jd/2}/delta + 1)`` envelope.

    ``c`` is the recorded dimension constant of the basis and ``c' = 4 M^2``,
    which dominates because ``ceil(x) <= x + 1``.
    """
    basis = WaveletBasisSpec(J, params.d) if basis is None else basis
    bound = 2 * params.M**2
    K = covering_axis(delta, bound).size
    dim = basis.dimension
    exact = dim * math.log(K)
    c = dimension_constant(params.d, basis.generator)
    c_prime = 4 * params.M**2
    env = c * 2 ** (J * params.d) * math.log(c_prime * 2 ** (J * params.d / 2) / delta + 1)
    if exact > env * (1 + 1e-12):
        raise AssertionError(f"log-cardinality {exact} exceeds envelope {env}")
    return CoveringCardinality(dim, K, exact, env, c, c_prime)


# ------------------------------------------------------------ resolution


def rate_bound(J: int, n: int, epsilon: float, R: float, alpha: float, d: int) -> float:
    """Utility bound with unit constants: bias, statistical, ``1/n`` and privacy terms."""
    return (R**2 * 2.0 ** (-2 * J * alpha)
            + J * 2.0 ** (J * (d - 2)) * math.log(n) / n
            + 1.0 / n
            + 2.0 ** (J * d) * math.log(n * epsilon) / (n * epsilon))


def select_resolution(n: int, budget: PrivacyBudget, params: AdmissibilityParams, J_max: int = 30) -> int:
    """Integer ``J`` in ``[1, J_max]`` minimising :func:`rate_bound`."""
    if int(n) < 2:
        raise ValueError("need n >= 2")
    if not budget.private:
        raise ValueError("resolution selection needs a finite epsilon")
    if n * budget.epsilon < 2:
        raise ValueError("need n * epsilon >= 2")
    vals = [rate_bound(J, n, budget.epsilon, params.R, params.alpha, params.d) for J in range(1, J_max + 1)]
    return int(np.argmin(vals)) + 1
