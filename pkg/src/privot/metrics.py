"""Map error, kernel density estimates on grids, and the (n, epsilon) sweep harness."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .candidates import PotentialPrior, generate_family, sample_from_prior
from .dp import PrivacyBudget, SeededRng
from .estimator import FitConfig, fit_nonprivate, fit_private
from .grid import GridPotential, GridSpec, GridVectorField
from .models import ExperimentModel, generate_dataset
from .semidual import ClipConfig


def interpolate_field(T_hat: GridVectorField, x) -> np.ndarray:
    """Multilinear interpolation of a grid vector field; points are clamped into the box."""
    spec = T_hat.spec
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x = np.clip(x, spec.lo, spec.hi)
    vals = T_hat.vectors.reshape(spec.shape + (spec.d,))
    interp = RegularGridInterpolator(tuple(spec.axes), vals, method="linear")
    return interp(x)


def uniform_sampler(lo, hi):
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)

    def sample(gen: np.random.Generator, n: int) -> np.ndarray:
        return lo + (hi - lo) * gen.random((n, lo.size))

    return sample


def l2_error(T_hat: GridVectorField, T_true, n_mc: int, rng: SeededRng, sampler=None) -> tuple[float, float]:
    """Monte-Carlo estimate of the integral of ``|T_hat - T_true|^2`` under ``P`` and its standard error.

    ``sampler(generator, n)`` draws from ``P``; by default ``P`` is uniform on the grid box.
    """
    if int(n_mc) < 1:
        raise ValueError("n_mc must be >= 1")
    spec = T_hat.spec
    sampler = sampler or uniform_sampler(spec.lo, spec.hi)
    x = sampler(rng.generator(), int(n_mc))
    sq = np.sum((interpolate_field(T_hat, x) - np.asarray(T_true(x))) ** 2, axis=1)
    se = float(sq.std(ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else float("nan")
    return float(sq.mean()), se


def scott_bandwidth(n: int, d: int, spread: float) -> float:
    return float(spread * n ** (-1.0 / (d + 4)))


def kde_grid(points, spec: GridSpec, bandwidth: float | None = None, chunk: int = 8192) -> GridPotential:
    """Gaussian kernel density estimate evaluated at the grid points.

    The isotropic kernel factorises over axes, so each chunk of samples
    contributes an outer product of per-axis kernel matrices. The default
    bandwidth is Scott's rule applied to the mean per-axis standard deviation.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = pts.shape
    if d != spec.d:
        raise ValueError("points and grid dimensions differ")
    if n < 1:
        raise ValueError("need at least one point")
    if bandwidth is None:
        spread = float(pts.std(axis=0).mean()) if n > 1 else 1.0
        bandwidth = scott_bandwidth(n, d, spread if spread > 0 else 1.0)
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    norm = (2 * np.pi * bandwidth**2) ** (-d / 2) / n
    letters = "abcdefgh"[:d]
    expr = ",".join(f"{c}z" for c in letters) + "->" + letters
    dens = np.zeros(spec.shape)
    for s in range(0, n, chunk):
        block = pts[s:s + chunk]
        mats = [np.exp(-0.5 * ((spec.axes[a][:, None] - block[None, :, a]) / bandwidth) ** 2) for a in range(d)]
        dens += np.einsum(expr, *mats, optimize=True)
    return GridPotential(spec, norm * dens.ravel())


def grid_integral(f: GridPotential) -> float:
    """Trapezoid-weighted sum of grid values over the box."""
    spec = f.spec
    w = np.ones(spec.shape)
    for a in range(spec.d):
        wa = np.full(spec.m, spec.steps[a])
        wa[[0, -1]] *= 0.5
        shape = [1] * spec.d
        shape[a] = spec.m
        w = w * wa.reshape(shape)
    return float(np.sum(w * f.tensor()))


# ------------------------------------------------------------ sweeps


@dataclass
class SweepRow:
    n: int
    epsilon: float
    seed: int
    error_private: float
    error_nonprivate: float
    chosen_rank: int
    runtime: float

    def __post_init__(self):
        if self.error_private < 0 or self.error_nonprivate < 0:
            raise ValueError("errors must be non-negative")


def prior_model(prior: PotentialPrior, lo: float = -0.5, hi: float = 0.5):
    """Seed-to-model map drawing the true potential from ``prior`` with stream ``(seed, 0)``."""

    def model_for(seed: int) -> ExperimentModel:
        return ExperimentModel(sample_from_prior(SeededRng(seed).child(0), prior), lo, hi, 1, seed)

    return model_for


@dataclass(frozen=True)
class SweepConfig:
    grid: GridSpec
    prior: PotentialPrior
    T: int = 200
    include_true: bool = True
    C: float = 0.25
    n_mc: int = 20000
    threads: int = 1


def _eps_tag(eps: float) -> int:
    return int(round(eps * 1e6))


def run_cell(n: int, epsilon: float, seed: int, model: ExperimentModel, config: SweepConfig,
             family=None) -> SweepRow:
    """One sweep cell. Streams are keyed by purpose and by ``(n, epsilon)`` so cells never share draws."""
    t0 = time.perf_counter()
    root = SeededRng(seed)
    if family is None:
        family = generate_family(root.child(1), config.T, config.prior, config.grid,
                                 model.true_params if config.include_true else None)
    data_model = ExperimentModel(model.true_params, model.lo, model.hi, int(n), seed)
    data = generate_dataset(data_model, root.child(2, int(n)), config.grid)
    noise_seed = int(np.random.SeedSequence([int(seed), 3, int(n), _eps_tag(epsilon)]).generate_state(1, np.uint64)[0])
    clip = ClipConfig(config.C)
    priv = fit_private(data, family, FitConfig(PrivacyBudget(epsilon), clip, config.grid, noise_seed, config.threads))
    nonp = fit_nonprivate(data, family, FitConfig(PrivacyBudget.non_private(), clip, config.grid, noise_seed,
                                                  config.threads))
    mc = root.child(4)
    e_priv, _ = l2_error(priv.chosen_map, model.true_map, config.n_mc, mc)
    e_nonp, _ = l2_error(nonp.chosen_map, model.true_map, config.n_mc, mc)
    rank = int(np.sum(priv.raw_scores < priv.raw_scores[priv.chosen_index]))
    return SweepRow(int(n), float(epsilon), int(seed), e_priv, e_nonp, rank, time.perf_counter() - t0)


def run_sweep(n_values, epsilon_values, seeds, model, config: SweepConfig, sink=None) -> list:
    """Every ``(n, epsilon, seed)`` cell in nested order; rows are also written to ``sink`` as NDJSON.

    ``model`` is an :class:`ExperimentModel` or a callable mapping a seed to
    one. The candidate family depends only on the seed and is reused across
    cells.
    """
    model_of = model if callable(model) else (lambda seed: model)
    n_values, epsilon_values, seeds = list(n_values), list(epsilon_values), list(seeds)
    if not (n_values and epsilon_values and seeds):
        raise ValueError("sweep ranges must be nonempty")
    families = {}
    rows = []
    for n in n_values:
        for eps in epsilon_values:
            for seed in seeds:
                mdl = model_of(seed)
                if seed not in families:
                    families[seed] = generate_family(SeededRng(seed).child(1), config.T, config.prior, config.grid,
                                                     mdl.true_params if config.include_true else None)
                row = run_cell(n, eps, seed, mdl, config, families[seed])
                rows.append(row)
                if sink is not None:
                    sink.write(json.dumps(asdict(row)) + "\n")
                    sink.flush()
    return rows


def median_by(rows, key: str, value: str) -> dict:
    groups = {}
    for r in rows:
        groups.setdefault(getattr(r, key), []).append(getattr(r, value))
    return {k: float(np.median(v)) for k, v in sorted(groups.items())}
