"""Laplace noise, report-noisy-argmin and empirical privacy checks.

Randomness comes from :class:`SeededRng`, a counter-based Philox stream keyed
by ``(seed, stream)``. Draw ``i`` of a stream is a pure function of the key
and ``i``, so the noise attached to candidate ``i`` does not depend on how
scoring work was scheduled.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

_TWO53 = 2.0**-53


@dataclass(frozen=True)
class PrivacyBudget:
    """Pure epsilon-DP budget. ``epsilon=None`` is the explicit non-private mode."""

    epsilon: float | None

    def __post_init__(self):
        if self.epsilon is not None and not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")

    @classmethod
    def non_private(cls) -> "PrivacyBudget":
        return cls(None)

    @property
    def private(self) -> bool:
        return self.epsilon is not None


class SeededRng:
    """Counter-based random stream identified by ``(seed, stream)``.

    ``stream`` may be an int or a tuple of ints; :meth:`child` extends it.
    Sequential helpers consume draws from an internal cursor, while
    :meth:`uniforms_at` addresses draws by absolute position.
    """

    def __init__(self, seed: int, stream=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = tuple(int(s) for s in np.atleast_1d(stream)) if stream != () else ()
        self._pos = 0
        words = [self.seed & 0xFFFFFFFF, self.seed >> 32, *self.stream]
        self._key = np.random.SeedSequence(words).generate_state(2, np.uint64)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream})"

    def child(self, *sub) -> "SeededRng":
        return SeededRng(self.seed, self.stream + tuple(int(s) for s in sub))

    def _raw(self, start: int, count: int) -> np.ndarray:
        bg = np.random.Philox(key=self._key)
        blocks, offset = divmod(int(start), 4)
        if blocks:
            bg.advance(blocks)
        raw = bg.random_raw(offset + int(count))
        return raw[offset:]

    def uniforms_at(self, start: int, count: int) -> np.ndarray:
        """Draws ``start .. start+count-1`` as doubles in the open interval (0, 1)."""
        raw = self._raw(start, count)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO53

    def uniforms(self, count: int) -> np.ndarray:
        out = self.uniforms_at(self._pos, count)
        self._pos += int(count)
        return out

    def generator(self) -> np.random.Generator:
        """Independent numpy Generator for bulk sampling (data, parameters)."""
        return np.random.Generator(np.random.Philox(key=self._key ^ np.uint64(0x9E3779B97F4A7C15)))


def laplace_from_uniform(u) -> np.ndarray:
    """Inverse CDF of the standard Laplace distribution."""
    c = np.asarray(u, dtype=np.float64) - 0.5
    return -np.sign(c) * np.log1p(-2.0 * np.abs(c))


def sample_laplace(rng: SeededRng, scale: float) -> float:
    """One draw of ``scale`` times a standard Laplace variable."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return float(scale * laplace_from_uniform(rng.uniforms(1))[0])


def laplace_noise(rng: SeededRng, count: int, start: int = 0) -> np.ndarray:
    """Standard Laplace draws; entry ``i`` is draw ``start + i`` of the stream."""
    return laplace_from_uniform(rng.uniforms_at(start, count))


def _noise_scale(delta: float, budget: PrivacyBudget, multiplier: float = 1.0) -> float:
    if delta < 0:
        raise ValueError(f"sensitivity must be non-negative, got {delta}")
    if not budget.private:
        return 0.0
    return multiplier * 2.0 * delta / budget.epsilon


def _break_ties(noisy: np.ndarray, rng: SeededRng) -> np.ndarray:
    """Row-wise argmin with uniformly random choice among exact ties."""
    noisy = np.atleast_2d(noisy)
    winners = noisy.argmin(axis=1)
    tied = noisy == noisy.min(axis=1, keepdims=True)
    n_tied = tied.sum(axis=1)
    multi = np.flatnonzero(n_tied > 1)
    if multi.size:
        u = rng.child(0x71E).uniforms(multi.size)
        for r, ui in zip(multi, u):
            options = np.flatnonzero(tied[r])
            winners[r] = options[min(int(ui * options.size), options.size - 1)]
    return winners


def report_noisy_argmin(scores, delta: float, budget: PrivacyBudget, rng: SeededRng,
                        noise_multiplier: float = 1.0) -> int:
    """Index minimising ``score_i + (2 delta / epsilon) L_i`` with i.i.d. standard Laplace ``L_i``.

    Candidate ``i`` receives draw ``i`` of ``rng``. With ``delta == 0`` or a
    non-private budget the result is the exact argmin, ties broken uniformly.
    ``noise_multiplier`` rescales the noise and exists only for negative
    controls in privacy tests.
    """
    idx, _ = noisy_argmin_details(scores, delta, budget, rng, noise_multiplier)
    return idx


def noisy_argmin_details(scores, delta, budget, rng, noise_multiplier=1.0):
    """Like :func:`report_noisy_argmin` but also returns the noisy scores."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise ValueError("cannot select from an empty score list")
    scale = _noise_scale(delta, budget, noise_multiplier)
    noisy = scores + scale * laplace_noise(rng, scores.size) if scale > 0 else scores.copy()
    return int(_break_ties(noisy, rng)[0]), noisy


def selection_counts(scores, scale: float, rng: SeededRng, trials: int, chunk: int = 20000) -> np.ndarray:
    """How often each index wins over ``trials`` independent noisy-argmin runs.

    Trial ``t`` uses draws ``t*N .. t*N+N-1`` of ``rng``.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    N = scores.size
    counts = np.zeros(N, dtype=np.int64)
    for t0 in range(0, trials, chunk):
        t1 = min(trials, t0 + chunk)
        L = laplace_noise(rng, (t1 - t0) * N, start=t0 * N).reshape(t1 - t0, N)
        winners = _break_ties(scores + scale * L, rng.child(t0))
        counts += np.bincount(winners, minlength=N)
    return counts


def wilson_interval(count: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    p = count / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class RatioRecord:
    index: int
    count_D: int
    count_D_prime: int
    ratio: float
    bound: float
    passed: bool


@dataclass
class DPReport:
    epsilon: float
    trials: int
    z: float
    noise_scale: float
    records: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def max_ratio(self) -> float:
        return max(r.ratio for r in self.records)

    def to_ndjson(self) -> str:
        lines = []
        for r in self.records:
            row = asdict(r)
            row["pass"] = row.pop("passed")
            row["ratio"] = _json_float(row["ratio"])
            lines.append(json.dumps(row))
        return "\n".join(lines) + "\n"


def _json_float(x):
    return x if np.isfinite(x) else ("inf" if x > 0 else "-inf")


def verify_dp_ratio(score_fn, D, D_neighbor, budget: PrivacyBudget, trials: int, rng: SeededRng,
                    delta: float, noise_multiplier: float = 1.0, z: float = 3.0,
                    distance=None) -> DPReport:
    """Monte-Carlo check of the epsilon-DP inequality for report-noisy-argmin.

    ``score_fn`` maps a dataset to the candidate scores. The mechanism is run
    ``trials`` times on each dataset with independent streams. Index ``k``
    passes when neither empirical selection probability exceeds ``e^epsilon``
    times the other after widening both by ``z`` Wilson standard errors.
    ``distance`` defaults to :func:`privot.semidual.hamming`.
    """
    if not budget.private:
        raise ValueError("privacy verification needs a finite epsilon")
    if distance is None:
        from .semidual import hamming as distance
    if distance(D, D_neighbor) > 1:
        raise ValueError("datasets are not neighbours (Hamming distance > 1)")
    s0 = np.asarray(score_fn(D), dtype=np.float64)
    s1 = np.asarray(score_fn(D_neighbor), dtype=np.float64)
    scale = _noise_scale(delta, budget, noise_multiplier)
    c0 = selection_counts(s0, scale, rng.child(0), trials)
    c1 = selection_counts(s1, scale, rng.child(1), trials)
    bound = math.exp(budget.epsilon)
    records = []
    for k in range(s0.size):
        lo0, hi0 = wilson_interval(int(c0[k]), trials, z)
        lo1, hi1 = wilson_interval(int(c1[k]), trials, z)
        ok = lo0 <= bound * hi1 and lo1 <= bound * hi0
        if c0[k] == c1[k]:
            ratio = 1.0
        elif min(c0[k], c1[k]) == 0:
            ratio = math.inf
        else:
            ratio = max(c0[k] / c1[k], c1[k] / c0[k])
        records.append(RatioRecord(k, int(c0[k]), int(c1[k]), float(ratio), bound, bool(ok)))
    return DPReport(budget.epsilon, trials, z, scale, records)


def max_laplace_bound(N: int) -> float:
    """Upper bound ``1 + ln N`` on the expected maximum of ``N`` absolute standard Laplace draws."""
    if int(N) < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return 1.0 + math.log(int(N))
