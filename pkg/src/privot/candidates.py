"""Finite families of candidate potentials.

The main family is the Gaussian attraction/repulsion model: a quadratic
potential perturbed by one positive and one negative Gaussian bump, with
random bump locations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dp import SeededRng
from .grid import GridPotential, GridSpec


@dataclass(frozen=True)
class AttractionRepulsionParams:
    alpha1: float
    alpha2: float
    mu1: tuple
    mu2: tuple
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("amplitudes must be non-negative")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("bump widths must be positive")
        mu1 = tuple(float(v) for v in np.ravel(self.mu1))
        mu2 = tuple(float(v) for v in np.ravel(self.mu2))
        if len(mu1) != len(mu2):
            raise ValueError("bump locations must have the same dimension")
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)

    @property
    def d(self) -> int:
        return len(self.mu1)

    def to_dict(self) -> dict:
        return asdict(self) | {"mu1": list(self.mu1), "mu2": list(self.mu2)}

    @classmethod
    def from_dict(cls, data: dict) -> "AttractionRepulsionParams":
        return cls(**{k: data[k] for k in ("alpha1", "alpha2", "mu1", "mu2", "sigma1", "sigma2")})


@dataclass(frozen=True)
class PotentialPrior:
    """Distribution of random attraction/repulsion potentials.

    Locations are drawn as ``N(0, sigma^2 I_d)``; amplitudes and widths are fixed.
    """

    alpha1: float = 0.005
    alpha2: float = 0.005
    sigma: float = 0.1
    sigma1: float = 0.1
    sigma2: float = 0.1
    d: int = 2


def gaussian_bump(x, mu, sigma: float):
    """``exp(-|x - mu|^2 / (2 sigma^2))``, vectorised over leading axes of ``x``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    diff = np.asarray(x, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    return np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * sigma * sigma))


def attraction_repulsion_potential(x, p: AttractionRepulsionParams):
    x = np.asarray(x, dtype=np.float64)
    return (0.5 * np.sum(x * x, axis=-1)
            + p.alpha1 * gaussian_bump(x, p.mu1, p.sigma1)
            - p.alpha2 * gaussian_bump(x, p.mu2, p.sigma2))


def attraction_repulsion_gradient(x, p: AttractionRepulsionParams):
    x = np.asarray(x, dtype=np.float64)
    mu1 = np.asarray(p.mu1)
    mu2 = np.asarray(p.mu2)
    w1 = p.alpha1 / p.sigma1**2 * gaussian_bump(x, mu1, p.sigma1)
    w2 = p.alpha2 / p.sigma2**2 * gaussian_bump(x, mu2, p.sigma2)
    return x - w1[..., None] * (x - mu1) + w2[..., None] * (x - mu2)


def attraction_repulsion_hessian(x, p: AttractionRepulsionParams):
    """Analytic Hessian, shape ``x.shape + (d,)``."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    eye = np.eye(d)

    def bump_hessian(mu, sigma):
        diff = x - np.asarray(mu)
        g = gaussian_bump(x, mu, sigma)[..., None, None]
        outer = diff[..., :, None] * diff[..., None, :]
        return g * (outer / sigma**4 - eye / sigma**2)

    return eye + p.alpha1 * bump_hessian(p.mu1, p.sigma1) - p.alpha2 * bump_hessian(p.mu2, p.sigma2)


def sample_random_params(rng: SeededRng, sigma: float, alpha1: float, alpha2: float,
                         sigma1: float, sigma2: float, d: int = 2) -> AttractionRepulsionParams:
    """Draw two independent bump locations from ``N(0, sigma^2 I_d)``."""
    if sigma < 0:
        raise ValueError("location scale must be non-negative")
    z = rng.generator().standard_normal((2, d))
    mu = sigma * z
    return AttractionRepulsionParams(alpha1, alpha2, tuple(mu[0]), tuple(mu[1]), sigma1, sigma2)


def sample_from_prior(rng: SeededRng, prior: PotentialPrior) -> AttractionRepulsionParams:
    return sample_random_params(rng, prior.sigma, prior.alpha1, prior.alpha2,
                                prior.sigma1, prior.sigma2, prior.d)


def discretize(fn, spec: GridSpec) -> GridPotential:
    """Sample ``fn`` at every grid point; ``fn`` takes a ``(G, d)`` array and returns ``(G,)``."""
    values = np.asarray(fn(spec.points), dtype=np.float64)
    if values.shape == ():
        values = np.full(spec.size, float(values))
    return GridPotential(spec, values)


@dataclass(eq=False)
class CandidateFamily:
    """Candidate potentials sharing one grid, stored as a ``(T, G)`` value matrix."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.array(np.atleast_2d(self.values), dtype=np.float64, order="C")
        if self.values.shape[0] < 1:
            raise ValueError("candidate family must be nonempty")
        if self.values.shape[1] != self.spec.size:
            raise ValueError("candidate values do not match the grid size")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("candidate values must be finite")
        self.values.setflags(write=False)
        if not self.labels:
            self.labels = [{"member": i} for i in range(len(self))]
        if len(self.labels) != len(self):
            raise ValueError("one label per member is required")

    def __len__(self) -> int:
        return self.values.shape[0]

    def transforms(self, threads: int = 1) -> np.ndarray:
        """Grid Fenchel transforms of every member, computed once and cached."""
        cached = getattr(self, "_fstar", None)
        if cached is None:
            from .semidual import fenchel_batch

            cached = fenchel_batch(self.values, self.spec, threads=threads)
            cached.setflags(write=False)
            self._fstar = cached
        return cached

    def member(self, i: int) -> GridPotential:
        return GridPotential(self.spec, self.values[i])

    @property
    def members(self) -> list:
        return [self.member(i) for i in range(len(self))]

    @classmethod
    def from_potentials(cls, members, labels=None) -> "CandidateFamily":
        members = list(members)
        if not members:
            raise ValueError("candidate family must be nonempty")
        spec = members[0].spec
        if any(f.spec != spec for f in members):
            raise ValueError("all members must share one grid")
        return cls(spec, np.stack([f.values for f in members]), list(labels or []))


def generate_family(rng: SeededRng, T: int, prior: PotentialPrior, spec: GridSpec,
                    true_params: AttractionRepulsionParams | None = None) -> CandidateFamily:
    """``T`` discretised random potentials; member ``i`` draws from ``rng.child(i)``.

    When ``true_params`` is given it occupies member 0 and ``T - 1`` random
    decoys follow.
    """
    if int(T) < 1:
        raise ValueError(f"family size must be >= 1, got {T}")
    if prior.d != spec.d:
        raise ValueError("prior and grid dimensions differ")
    params, labels = [], []
    if true_params is not None:
        params.append(true_params)
        labels.append({"member": 0, "source": "true", "params": true_params.to_dict()})
    for i in range(len(params), int(T)):
        p = sample_from_prior(rng.child(i), prior)
        params.append(p)
        labels.append({"member": i, "source": "random", "params": p.to_dict()})
    pts = spec.points
    values = np.stack([attraction_repulsion_potential(pts, p) for p in params])
    return CandidateFamily(spec, values, labels)


def family_params(family: CandidateFamily) -> list:
    return [AttractionRepulsionParams.from_dict(lab["params"]) for lab in family.labels]


def save_family(family: CandidateFamily, path) -> None:
    """Write parameters and grid metadata; values are regenerated on load."""
    if not all("params" in lab for lab in family.labels):
        raise ValueError("only parametric families can be serialised")
    doc = {"grid": family.spec.to_dict(), "members": family.labels}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_family(path) -> CandidateFamily:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    spec = GridSpec.from_dict(doc["grid"])
    labels = doc["members"]
    pts = spec.points
    values = np.stack([attraction_repulsion_potential(pts, AttractionRepulsionParams.from_dict(lab["params"]))
                       for lab in labels])
    return CandidateFamily(spec, values, labels)
