"""Private and non-private selection of a transport map from a candidate family.

Only ``chosen_index`` and quantities computed from it (the chosen potential,
its label and its gradient map) are covered by the privacy guarantee. Raw
and noisy scores are kept on the result for diagnostics and are stripped
from serialized output unless explicitly requested.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateFamily
from .dp import PrivacyBudget, SeededRng, noisy_argmin_details
from .fileio import read_csv, write_csv, write_json
from .grid import GridSpec, GridVectorField, finite_diff_gradient
from .semidual import ClipConfig, Dataset, semidual_scores, clamp_saturation, sensitivity_clipped

MECHANISM_PRIVATE = "report-noisy-argmin/laplace"
MECHANISM_NONE = "argmin/non-private"

# stream tag that keeps selection noise apart from every other use of the seed
_NOISE_STREAM = 0x5E1EC7


@dataclass(frozen=True)
class FitConfig:
    budget: PrivacyBudget
    clip: ClipConfig
    grid: GridSpec
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if int(self.threads) < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class PrivacyCertificate:
    epsilon: float | None
    sensitivity: float
    mechanism: str

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "sensitivity": self.sensitivity, "mechanism": self.mechanism}


@dataclass(eq=False)
class FitResult:
    chosen_index: int
    chosen_map: GridVectorField = field(repr=False)
    chosen_label: dict
    noise_scale: float
    privacy_certificate: PrivacyCertificate
    raw_scores: np.ndarray = field(repr=False)
    noisy_scores: np.ndarray = field(repr=False)
    saturation: dict = field(default_factory=dict, repr=False)

    # fields that depend on the data beyond chosen_index
    NON_RELEASABLE = ("raw_scores", "noisy_scores", "saturation")


def _validate(data: Dataset, family: CandidateFamily, config: FitConfig):
    if len(family) < 1:
        raise ValueError("candidate family is empty")
    if data.n < 1:
        raise ValueError("dataset is empty")
    if family.spec != data.spec or config.grid != data.spec:
        raise ValueError("dataset, family and config must share one grid")


def _fit(data, family, config, budget):
    _validate(data, family, config)
    clip = config.clip
    delta = sensitivity_clipped(data.n, clip)
    Fstar = family.transforms(config.threads)
    raw = semidual_scores(family.values, Fstar, data, clip)
    rng = SeededRng(config.seed, (_NOISE_STREAM,))
    idx, noisy = noisy_argmin_details(raw, delta, budget, rng)
    if budget.private:
        noise_scale = 4.0 * clip.C / (data.n * budget.epsilon)
        assert math.isclose(delta, 2.0 * clip.C / data.n, rel_tol=1e-15)
        cert = PrivacyCertificate(budget.epsilon, delta, MECHANISM_PRIVATE)
    else:
        noise_scale = 0.0
        cert = PrivacyCertificate(None, delta, MECHANISM_NONE)
    sat = clamp_saturation(family.values, Fstar, data, clip)
    return FitResult(
        chosen_index=idx,
        chosen_map=finite_diff_gradient(family.member(idx)),
        chosen_label=dict(family.labels[idx]),
        noise_scale=noise_scale,
        privacy_certificate=cert,
        raw_scores=raw,
        noisy_scores=noisy,
        saturation={k: v.tolist() for k, v in sat.items()},
    )


def fit_private(data: Dataset, family: CandidateFamily, config: FitConfig) -> FitResult:
    """Select a candidate with report-noisy-argmin on the clipped semi-dual scores.

    The mechanism sees sensitivity ``2C/n``, so each score receives Laplace
    noise of scale ``4C/(n epsilon)``.
    """
    if not config.budget.private:
        raise ValueError("fit_private needs a finite epsilon; use fit_nonprivate")
    return _fit(data, family, config, config.budget)


def fit_nonprivate(data: Dataset, family: CandidateFamily, config: FitConfig) -> FitResult:
    """Exact argmin of the clipped scores (ties broken by the seeded stream)."""
    return _fit(data, family, config, PrivacyBudget.non_private())


def transport_map_of(result: FitResult) -> GridVectorField:
    return result.chosen_map


# ------------------------------------------------------------ serialization


def map_header(d: int) -> list:
    return [f"x{i + 1}" for i in range(d)] + [f"T{i + 1}" for i in range(d)]


def save_map_csv(field_: GridVectorField, path, config_echo: dict | None = None) -> None:
    """One row per grid point: coordinates followed by map components."""
    write_csv(path, map_header(field_.spec.d), np.hstack([field_.spec.points, field_.vectors]), config_echo)


def load_map_csv(path, spec: GridSpec) -> GridVectorField:
    header, body, _ = read_csv(path)
    if header != map_header(spec.d) or body.shape != (spec.size, 2 * spec.d):
        raise ValueError("map CSV does not match the grid")
    if not np.allclose(body[:, : spec.d], spec.points, rtol=0, atol=1e-12):
        raise ValueError("map CSV coordinates do not match the grid")
    return GridVectorField(spec, body[:, spec.d:])


def result_record(result: FitResult, config_echo: dict | None = None, unsafe_diagnostics: bool = False) -> dict:
    """JSON-ready record; diagnostic fields are redacted unless ``unsafe_diagnostics``."""
    rec = {
        "chosen_index": result.chosen_index,
        "chosen_label": result.chosen_label,
        "noise_scale": result.noise_scale,
        "privacy_certificate": result.privacy_certificate.to_dict(),
        "grid": result.chosen_map.spec.to_dict(),
        "config": config_echo or {},
    }
    if unsafe_diagnostics:
        rec["unsafe_diagnostics"] = {
            "raw_scores": result.raw_scores.tolist(),
            "noisy_scores": result.noisy_scores.tolist(),
            "saturation": result.saturation,
        }
    else:
        rec["redacted"] = list(FitResult.NON_RELEASABLE)
    return rec


def save_result(result: FitResult, json_path, csv_path, config_echo: dict | None = None,
                unsafe_diagnostics: bool = False) -> None:
    rec = result_record(result, config_echo, unsafe_diagnostics)
    rec["map_csv"] = str(csv_path)
    write_json(json_path, rec)
    save_map_csv(result.chosen_map, csv_path, config_echo)


def load_result(json_path, csv_path=None) -> FitResult:
    """Rebuild a result from its record; redacted fields come back empty."""
    with open(json_path, encoding="utf-8") as fh:
        rec = json.load(fh)
    spec = GridSpec.from_dict(rec["grid"])
    fmap = load_map_csv(csv_path or rec["map_csv"], spec)
    diag = rec.get("unsafe_diagnostics", {})
    cert = PrivacyCertificate(**rec["privacy_certificate"])
    return FitResult(rec["chosen_index"], fmap, rec["chosen_label"], rec["noise_scale"], cert,
                     np.asarray(diag.get("raw_scores", []), dtype=np.float64),
                     np.asarray(diag.get("noisy_scores", []), dtype=np.float64),
                     diag.get("saturation", {}))


# ------------------------------------------------------------ toy instances


def adversarial_toy_instance(n: int = 10, m: int = 8, C: float = 0.25):
    """Small dataset and three-candidate family on which the clipped scores move by the full sensitivity.

    Candidates are ``+3C`` / ``-3C`` on the two half-planes ``x1 > 0`` and
    ``x1 < 0`` (and the mirror image), plus the zero potential. Half of the
    source points sit on each side and every target point sits at the upper
    corner, so all three clipped scores start equal at ``C``. Moving one
    source point across ``x1 = 0`` shifts the two half-plane scores by
    ``+2C/n`` and ``-2C/n``.
    """
    from .grid import make_uniform_grid
    from .semidual import make_dataset

    spec = make_uniform_grid(-0.5, 0.5, m, 2)
    pts = spec.points
    step = np.where(pts[:, 0] > 0, 3 * C, -3 * C)
    family = CandidateFamily(spec, np.stack([step, -step, np.zeros(spec.size)]),
                             [{"member": 0, "source": "half-plane+"}, {"member": 1, "source": "half-plane-"},
                              {"member": 2, "source": "zero"}])
    left = np.array([-0.25, 0.0])
    right = np.array([0.25, 0.0])
    X = np.array([left if i % 2 == 0 else right for i in range(n)])
    Y = np.tile([0.5, 0.5], (n, 1))
    return make_dataset(X, Y, spec), family, ClipConfig(C)


def family_score_fn(family: CandidateFamily, clip: ClipConfig, threads: int = 1):
    """Map a dataset to the clipped semi-dual scores of every candidate."""
    Fstar = family.transforms(threads)

    def score(data: Dataset) -> np.ndarray:
        return semidual_scores(family.values, Fstar, data, clip)

    return score
