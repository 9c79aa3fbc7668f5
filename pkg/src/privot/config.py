"""Run configuration: JSON files, strict key checking and environment overrides.

Defaults mirror the full-scale attraction/repulsion experiment. Any key can
be overridden with an environment variable ``PRIVOT_<SECTION>__<KEY>``; the
value is parsed as JSON when possible and used as a string otherwise.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import MISSING, asdict, dataclass, field, fields

from .candidates import PotentialPrior
from .covering import AdmissibilityParams, WaveletBasisSpec
from .dp import PrivacyBudget
from .grid import GridSpec, make_uniform_grid
from .semidual import ClipConfig

ENV_PREFIX = "PRIVOT_"


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass
class GridSection:
    lo: float = -0.5
    hi: float = 0.5
    m: int = 64
    d: int = 2


@dataclass
class ModelSection:
    alpha1: float = 0.005
    alpha2: float = 0.005
    sigma: float = 0.1
    sigma1: float = 0.1
    sigma2: float = 0.1
    mu1: list | None = None
    mu2: list | None = None


@dataclass
class FamilySection:
    T: int = 2000
    mode: str = "include-true"


@dataclass
class PrivacySection:
    epsilon: float | None = 1.0
    C: float = 0.25


@dataclass
class DataSection:
    n: int = 200000
    seed: int = 0
    dir: str = "data"


@dataclass
class SweepSection:
    n_values: list = field(default_factory=lambda: [2000, 8000, 32000])
    epsilon_values: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    seeds: list = field(default_factory=lambda: list(range(20)))
    n_mc: int = 20000


@dataclass
class DPCheckSection:
    n: int = 10
    m: int = 8
    C: float = 0.25
    epsilon: float = 1.0
    trials: int = 100000
    pairs: int = 50
    noise_multiplier: float = 1.0
    z: float = 3.0


@dataclass
class PackingSection:
    hs: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    alpha: float = 2.0
    resolution_cells: int = 64
    a: float | None = None


@dataclass
class CoveringSection:
    J: int = 1
    d: int = 1
    delta: float = 0.1
    M: float = 3.0
    R: float = 10.0
    alpha: float = 2.0
    generator: str = "haar"
    screen_m: int = 8
    offset: str = "none"
    cap: int = 1000000
    screen: bool = True


@dataclass
class KDESection:
    bandwidth: float | None = None
    m: int = 64


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    model: ModelSection = field(default_factory=ModelSection)
    family: FamilySection = field(default_factory=FamilySection)
    privacy: PrivacySection = field(default_factory=PrivacySection)
    data: DataSection = field(default_factory=DataSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    dp_check: DPCheckSection = field(default_factory=DPCheckSection)
    packing: PackingSection = field(default_factory=PackingSection)
    covering: CoveringSection = field(default_factory=CoveringSection)
    kde: KDESection = field(default_factory=KDESection)

    def to_dict(self) -> dict:
        return asdict(self)

    # ---- derived objects; constructing them runs every module's validation

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return make_uniform_grid(g.lo, g.hi, g.m, g.d)

    def prior(self) -> PotentialPrior:
        mdl = self.model
        return PotentialPrior(mdl.alpha1, mdl.alpha2, mdl.sigma, mdl.sigma1, mdl.sigma2, self.grid.d)

    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.privacy.epsilon)

    def clip(self) -> ClipConfig:
        return ClipConfig(self.privacy.C)

    def admissibility(self) -> AdmissibilityParams:
        c = self.covering
        return AdmissibilityParams(c.M, c.R, c.alpha, c.d)

    def validate(self) -> "RunConfig":
        try:
            self.grid_spec()
            self.prior()
            self.budget()
            self.clip()
            self.admissibility()
            WaveletBasisSpec(self.covering.J, self.covering.d, self.covering.generator)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.family.mode not in ("include-true", "decoys-only"):
            raise ConfigError(f"family.mode must be include-true or decoys-only, got {self.family.mode!r}")
        if int(self.family.T) < 1:
            raise ConfigError("family.T must be >= 1")
        if int(self.data.n) < 1:
            raise ConfigError("data.n must be >= 1")
        for name, mu in (("mu1", self.model.mu1), ("mu2", self.model.mu2)):
            if mu is not None and len(mu) != self.grid.d:
                raise ConfigError(f"model.{name} must have {self.grid.d} entries")
        if (self.model.mu1 is None) != (self.model.mu2 is None):
            raise ConfigError("model.mu1 and model.mu2 must be given together")
        if not (self.sweep.n_values and self.sweep.epsilon_values and self.sweep.seeds):
            raise ConfigError("sweep ranges must be nonempty")
        if self.covering.offset not in ("none", "quadratic"):
            raise ConfigError("covering.offset must be none or quadratic")
        return self


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        factory = known[name].default_factory
        if factory is not MISSING and hasattr(factory, "__dataclass_fields__"):
            kwargs[name] = _build(factory, value, f"{path}.{name}" if path else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _resolve(parts):
    """Match upper-case environment key parts to field names, case-insensitively."""
    cls, out = RunConfig, []
    for p in parts:
        names = {f.name.lower(): f for f in fields(cls)} if cls is not None else {}
        f = names.get(p.lower())
        if f is None:
            out.append(p.lower())
            cls = None
            continue
        out.append(f.name)
        factory = f.default_factory
        cls = factory if factory is not MISSING and hasattr(factory, "__dataclass_fields__") else None
    return out


def env_overrides(environ=None) -> dict:
    """Nested dict built from ``PRIVOT_SECTION__KEY`` variables."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key:
            continue
        parts = _resolve(key[len(ENV_PREFIX):].split("__"))
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_dict(doc: dict, environ=None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    merged = _merge(doc, env_overrides(environ))
    return _build(RunConfig, merged, "").validate()


def load_config(path=None, environ=None) -> RunConfig:
    """Defaults, then the JSON file at ``path`` (if any), then environment overrides."""
    doc = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc, environ)
