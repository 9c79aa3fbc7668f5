"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 validation or
verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .candidates import AttractionRepulsionParams, generate_family, sample_from_prior
from .config import ConfigError, RunConfig, load_config
from .covering import (WaveletBasisSpec, covering_log_cardinality, norm_constants, screen_covering,
                       select_resolution)
from .dp import PrivacyBudget, SeededRng, verify_dp_ratio
from .estimator import (adversarial_toy_instance, family_score_fn, fit_nonprivate, fit_private, FitConfig,
                        save_result)
from .fileio import read_points_csv, write_json, write_ndjson, write_points_csv, write_csv
from .grid import GridSpec, make_uniform_grid
from .metrics import SweepConfig, kde_grid, prior_model, run_sweep
from .models import ExperimentModel, fit_loglog_slope, generate_samples, packing_report
from .semidual import make_dataset, sample_grid_replacements, sensitivity_clipped

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4


class VerificationFailed(RuntimeError):
    pass


class DataError(ValueError):
    """Inputs that load but are inconsistent with the configuration."""


def _true_params(cfg: RunConfig, seed: int) -> AttractionRepulsionParams:
    mdl = cfg.model
    if mdl.mu1 is not None:
        return AttractionRepulsionParams(mdl.alpha1, mdl.alpha2, tuple(mdl.mu1), tuple(mdl.mu2),
                                         mdl.sigma1, mdl.sigma2)
    return sample_from_prior(SeededRng(seed).child(0), cfg.prior())


def cmd_generate(cfg: RunConfig, args) -> int:
    seed = cfg.data.seed
    model = ExperimentModel(_true_params(cfg, seed), cfg.grid.lo, cfg.grid.hi, cfg.data.n, seed)
    X, Y = generate_samples(model, SeededRng(seed).child(2, cfg.data.n))
    echo = cfg.to_dict()
    out = Path(args.out)
    write_points_csv(out / "X.csv", X, echo)
    write_points_csv(out / "Y.csv", Y, echo)
    write_json(out / "meta.json", {"true_params": model.true_params.to_dict(), "seed": seed, "n": cfg.data.n,
                                   "grid": cfg.grid_spec().to_dict(), "config": echo})
    print(json.dumps({"written": [str(out / "X.csv"), str(out / "Y.csv"), str(out / "meta.json")], "n": cfg.data.n}))
    return EXIT_OK


def cmd_fit(cfg: RunConfig, args) -> int:
    data_dir = Path(args.data or cfg.data.dir)
    with open(data_dir / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    spec = cfg.grid_spec()
    if GridSpec.from_dict(meta["grid"]) != spec:
        raise DataError("dataset grid metadata does not match the configured grid")
    data = make_dataset(read_points_csv(data_dir / "X.csv"), read_points_csv(data_dir / "Y.csv"), spec)
    seed = cfg.data.seed
    true = AttractionRepulsionParams.from_dict(meta["true_params"]) if cfg.family.mode == "include-true" else None
    family = generate_family(SeededRng(seed).child(1), cfg.family.T, cfg.prior(), spec, true)
    fc = FitConfig(cfg.budget(), cfg.clip(), spec, seed, args.threads)
    result = fit_private(data, family, fc) if fc.budget.private else fit_nonprivate(data, family, fc)
    out = Path(args.out)
    save_result(result, out / "fit.json", out / "map.csv", cfg.to_dict(), args.unsafe_diagnostics)
    print(json.dumps({"chosen_index": result.chosen_index, "noise_scale": result.noise_scale,
                      "privacy_certificate": result.privacy_certificate.to_dict()}))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    spec = cfg.grid_spec()
    sc = SweepConfig(spec, cfg.prior(), cfg.family.T, cfg.family.mode == "include-true", cfg.privacy.C,
                     cfg.sweep.n_mc, args.threads)
    if cfg.model.mu1 is not None:
        model = ExperimentModel(_true_params(cfg, 0), cfg.grid.lo, cfg.grid.hi, 1)
    else:
        model = prior_model(cfg.prior(), cfg.grid.lo, cfg.grid.hi)
    path = Path(args.out) / "sweep.ndjson"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as sink:
        sink.write(json.dumps({"record": "config", "config": cfg.to_dict()}, sort_keys=True) + "\n")
        rows = run_sweep(cfg.sweep.n_values, cfg.sweep.epsilon_values, cfg.sweep.seeds, model, sc, sink)
    print(json.dumps({"rows": len(rows), "written": str(path)}))
    return EXIT_OK


def cmd_verify_dp(cfg: RunConfig, args) -> int:
    dc = cfg.dp_check
    D, family, clip = adversarial_toy_instance(dc.n, dc.m, dc.C)
    score = family_score_fn(family, clip, args.threads)
    delta = sensitivity_clipped(D.n, clip)
    budget = PrivacyBudget(dc.epsilon)
    root = SeededRng(cfg.data.seed)
    rows, failed = [], 0
    for j, (side, i, g, Dn) in enumerate(sample_grid_replacements(D, dc.pairs, root.child(5))):
        rep = verify_dp_ratio(score, D, Dn, budget, dc.trials, root.child(6, j), delta, dc.noise_multiplier, dc.z)
        failed += not rep.passed
        for r in rep.records:
            row = asdict(r)
            row["pass"] = row.pop("passed")
            row["ratio"] = row["ratio"] if math.isfinite(row["ratio"]) else "inf"
            rows.append({"pair": j, "side": side, "record": i, "grid_point": g, **row})
    path = Path(args.out) / "dp_report.ndjson"
    write_ndjson(path, rows, cfg.to_dict())
    print(json.dumps({"pairs": dc.pairs, "failed_pairs": failed, "written": str(path)}))
    if failed:
        raise VerificationFailed(f"{failed} neighbouring pair(s) violated the ratio bound")
    return EXIT_OK


def cmd_verify_packing(cfg: RunConfig, args) -> int:
    pc = cfg.packing
    rows = packing_report(pc.hs, pc.alpha, pc.resolution_cells, pc.a)
    hs = [r["h"] for r in rows]
    slope = fit_loglog_slope(hs, [r["distance"] for r in rows])
    tv_scaled = [r["tv_scaled"] for r in rows]
    target = 2 * pc.alpha + 1
    summary = {"summary": True, "distance_slope": slope, "expected_slope": target,
               "tv_slope": fit_loglog_slope(hs, [r["tv"] for r in rows]),
               "tv_scaled_variation": max(tv_scaled) / min(tv_scaled) - 1.0}
    path = Path(args.out) / "packing_report.ndjson"
    write_ndjson(path, rows + [summary], cfg.to_dict())
    print(json.dumps(summary))
    if abs(slope - target) > 0.1 or summary["tv_scaled_variation"] > 0.25:
        raise VerificationFailed("packing scaling outside tolerance")
    return EXIT_OK


def cmd_covering_stats(cfg: RunConfig, args) -> int:
    cc = cfg.covering
    params = cfg.admissibility()
    basis = WaveletBasisSpec(cc.J, cc.d, cc.generator)
    card = covering_log_cardinality(cc.J, cc.delta, params, basis)
    row = {"J": cc.J, "d": cc.d, "generator": cc.generator, "delta": cc.delta, "dimension": card.dim,
           "per_axis": card.per_axis, "log_cardinality": card.log_exact, "log_cardinality_bound": card.log_bound,
           "c": card.c, "c_prime": card.c_prime, **norm_constants(cc.d, cc.J, cc.generator)}
    if cfg.privacy.epsilon is not None and cfg.data.n * cfg.privacy.epsilon >= 2:
        row["selected_J"] = select_resolution(cfg.data.n, cfg.budget(), params)
    if cc.screen:
        grid = make_uniform_grid(-1.0, 2.0, cc.screen_m, cc.d)
        row.update(screen_covering(cc.J, cc.delta, params, grid, basis, offset=cc.offset, cap=cc.cap))
    path = Path(args.out) / "covering_stats.ndjson"
    write_ndjson(path, [row], cfg.to_dict())
    print(json.dumps(row))
    return EXIT_OK


def cmd_kde(cfg: RunConfig, args) -> int:
    pts = read_points_csv(args.input)
    g = cfg.grid
    spec = make_uniform_grid(g.lo, g.hi, cfg.kde.m, pts.shape[1])
    bw = args.bandwidth if args.bandwidth is not None else cfg.kde.bandwidth
    dens = kde_grid(pts, spec, bw)
    path = Path(args.out) / "density.csv"
    header = [f"x{i + 1}" for i in range(spec.d)] + ["density"]
    write_csv(path, header, np.hstack([spec.points, dens.values[:, None]]), cfg.to_dict())
    print(json.dumps({"written": str(path), "points": int(pts.shape[0])}))
    return EXIT_OK


COMMANDS = {
    "generate": (cmd_generate, "sample X and Y for the attraction/repulsion model"),
    "fit": (cmd_fit, "select a transport map privately from a generated dataset"),
    "sweep": (cmd_sweep, "private and non-private errors over an (n, epsilon, seed) grid"),
    "verify-dp": (cmd_verify_dp, "Monte-Carlo privacy ratio test on a toy instance"),
    "verify-packing": (cmd_verify_packing, "distance and TV scaling of the packing family"),
    "covering-stats": (cmd_covering_stats, "wavelet covering dimension, cardinality and screening"),
    "kde": (cmd_kde, "Gaussian KDE of a point CSV on the configured grid"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (defaults are used for missing keys)")
    common.add_argument("--seed", type=int, help="override data.seed")
    common.add_argument("--threads", type=int, default=1, help="worker cap for compiled kernels")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--unsafe-diagnostics", action="store_true",
                        help="include non-private scores in fit output")
    parser = argparse.ArgumentParser(prog="privot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"privot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, parents=[common])
        if name == "fit":
            p.add_argument("--data", help="directory written by 'generate' (default data.dir)")
        if name == "kde":
            p.add_argument("--input", required=True, help="CSV with header x1..xd")
            p.add_argument("--bandwidth", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.data.seed = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    handler = COMMANDS[args.command][0]
    try:
        return handler(cfg, args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
