"""Acceptance suite. Every check prints a single PASS/FAIL line with the measured value and its tolerance."""

import math
import time

import numpy as np
import pytest

from privot.candidates import (AttractionRepulsionParams, PotentialPrior, attraction_repulsion_gradient,
                               attraction_repulsion_potential)
from privot.covering import (AdmissibilityParams, WaveletBasisSpec, covering_log_cardinality, delta_grid_covering,
                             midpoint_cells, norm_constants)
from privot.dp import PrivacyBudget, SeededRng, laplace_noise, max_laplace_bound, verify_dp_ratio
from privot.estimator import adversarial_toy_instance, family_score_fn
from privot.grid import GridPotential, GridVectorField, finite_diff_gradient, make_uniform_grid
from privot.metrics import SweepConfig, l2_error, median_by, prior_model, run_sweep
from privot.models import PackingSpec, fit_loglog_slope, packing_pairwise_distance, packing_report
from privot.semidual import (fenchel_batch, iter_grid_replacements, make_dataset, sample_grid_replacements,
                             semidual_scores, sensitivity_clipped)

FIG2_PRIOR = PotentialPrior(alpha1=0.005, alpha2=0.005, sigma=0.1, sigma1=0.1, sigma2=0.1, d=2)
DESK_GRID = make_uniform_grid(-0.5, 0.5, 32, 2)
SEEDS = range(20)


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, measured, tolerance, seconds):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {measured} (tolerance {tolerance}, "
                  f"{seconds:.1f}s)")
        return ok

    return emit


def test_c01_mechanism_privacy(report):
    t0 = time.perf_counter()
    D, family, clip = adversarial_toy_instance(n=10, m=8, C=0.25)
    assert len(family) == 3
    score = family_score_fn(family, clip)
    delta = sensitivity_clipped(D.n, clip)
    budget = PrivacyBudget(1.0)
    root = SeededRng(2024)
    pairs = sample_grid_replacements(D, 50, root.child(0))

    def failures(multiplier, tag):
        bad, worst = 0, 0.0
        for j, (*_, Dn) in enumerate(pairs):
            rep = verify_dp_ratio(score, D, Dn, budget, 100_000, root.child(tag, j), delta, multiplier, 3.0)
            bad += not rep.passed
            worst = max(worst, rep.max_ratio)
        return bad, worst

    bad, worst = failures(1.0, 1)
    neg_bad, neg_worst = failures(0.5, 2)
    secs = time.perf_counter() - t0
    ok = bad == 0 and neg_bad >= 1 and secs <= 600
    report(1, "mechanism privacy", ok,
           f"{bad}/50 pairs fail at full noise (max ratio {worst:.3f}), {neg_bad}/50 fail at half noise "
           f"(max ratio {neg_worst:.3f})", "0 full-noise failures, >=1 half-noise failure, e^1 within 3 Wilson SE",
           secs)
    assert ok


def test_c02_sensitivity_exactness(report):
    t0 = time.perf_counter()
    C, n, m = 0.25, 8, 8
    D, family, clip = adversarial_toy_instance(n=n, m=m, C=C)
    rng = np.random.default_rng(7)
    extra = rng.uniform(-1.0, 1.0, (20, family.spec.size))
    F = np.vstack([family.values, extra])
    Fstar = fenchel_batch(F, family.spec)
    base = semidual_scores(F, Fstar, D, clip)
    worst = np.zeros(F.shape[0])
    for *_, Dn in iter_grid_replacements(D):
        worst = np.maximum(worst, np.abs(semidual_scores(F, Fstar, Dn, clip) - base))
    bound = sensitivity_clipped(n, clip)
    secs = time.perf_counter() - t0
    ok = bound == 0.0625 and worst.max() <= bound and worst[:3].max() >= 0.9 * bound and secs <= 60
    report(2, "sensitivity exactness", ok,
           f"max |dS| = {worst.max():.6g}, adversarial max = {worst[:3].max():.6g}",
           f"<= {bound} and adversarial >= {0.9 * bound:.6g}", secs)
    assert ok


def test_c03_semidual_lipschitz(report):
    t0 = time.perf_counter()
    spec = make_uniform_grid(-0.5, 0.5, 16, 2)
    rng = np.random.default_rng(11)
    violations, worst = 0, 0.0
    for _ in range(1000):
        F = rng.normal(scale=rng.uniform(0.01, 1.0), size=(2, spec.size))
        n = int(rng.integers(1, 50))
        data = make_dataset(rng.uniform(-0.6, 0.6, (n, 2)), rng.uniform(-0.6, 0.6, (n, 2)), spec)
        s = semidual_scores(F, fenchel_batch(F, spec), data)
        lhs, rhs = abs(s[0] - s[1]), 2 * np.abs(F[0] - F[1]).max()
        violations += not lhs <= rhs
        worst = max(worst, lhs / rhs)
    secs = time.perf_counter() - t0
    ok = violations == 0 and secs <= 60
    report(3, "semi-dual Lipschitzness", ok, f"{violations} violations in 1000, max |dS|/(2|df|) = {worst:.4f}",
           "|dS| <= 2 sup|df| exactly", secs)
    assert ok


def test_c04_max_laplace_bound(report):
    t0 = time.perf_counter()
    trials, z99 = 100_000, 2.3263478740408408
    parts, ok = [], True
    for N in (10, 100, 1000):
        rng = SeededRng(44, (N,))
        maxima = np.empty(trials)
        chunk = max(1, 10_000_000 // N)
        for s in range(0, trials, chunk):
            e = min(trials, s + chunk)
            maxima[s:e] = np.abs(laplace_noise(rng, (e - s) * N, start=s * N).reshape(e - s, N)).max(axis=1)
        upper = maxima.mean() + z99 * maxima.std(ddof=1) / math.sqrt(trials)
        ok &= upper <= max_laplace_bound(N)
        parts.append(f"N={N}: upper99 {upper:.4f} vs {max_laplace_bound(N):.4f}")
    secs = time.perf_counter() - t0
    ok &= secs <= 60
    report(4, "max-Laplace bound", ok, "; ".join(parts), "one-sided 99% upper limit <= 1 + ln N", secs)
    assert ok


def _sup_norm_exact(basis, coeffs, J):
    # the expansion is constant on dyadic cells, so cell midpoints at a finer resolution attain the sup
    pts, _ = midpoint_cells(basis, 2 ** (J + 3))
    return np.abs(basis.design_matrix(pts) @ coeffs.T).max(axis=0)


def test_c05_norm_comparison(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    ok, parts = True, []
    for d in (1, 2):
        c2_by_J, c1_by_J = [], []
        for J in (1, 2, 3):
            basis = WaveletBasisSpec(J, d)
            consts = norm_constants(d, J)
            c1, c2 = consts["c1"], consts["c2"]
            c1_by_J.append(c1)
            c2_by_J.append(consts["c2_at_J"])
            G = rng.uniform(-1, 1, (100, basis.dimension))
            f_sup = _sup_norm_exact(basis, G, J)
            g_inf, g_2 = np.abs(G).max(axis=1), np.linalg.norm(G, axis=1)
            ok &= bool(np.all(g_inf <= g_2))
            ok &= bool(np.all(g_2 <= c1 * f_sup * (1 + 1e-12)))
            ok &= bool(np.all(f_sup <= c2 * 2 ** (J * d / 2) * g_inf * (1 + 1e-12)))
        var = max(max(c2_by_J) / min(c2_by_J), max(c1_by_J) / min(c1_by_J))
        ok &= var <= 2.0
        parts.append(f"d={d}: c1={c1_by_J[0]:.4f} c2={c2:.4f}, c2 over J in [{min(c2_by_J):.4f}, "
                     f"{max(c2_by_J):.4f}] (variation {var:.3f}x)")
    secs = time.perf_counter() - t0
    ok &= secs <= 120
    report(5, "norm comparison", ok, "; ".join(parts), "all 600 inequalities hold, constants vary <= 2x", secs)
    assert ok


def test_c06_covering_correctness(report):
    t0 = time.perf_counter()
    params = AdmissibilityParams(M=3.0, R=10.0, alpha=2.0, d=1)
    J, delta, bound = 1, 0.1, 2 * params.M**2
    basis = WaveletBasisSpec(J, 1)
    cover = np.array(list(delta_grid_covering(J, delta, bound, basis)))
    card = covering_log_cardinality(J, delta, params, basis)
    rng = np.random.default_rng(6)
    gammas = rng.uniform(-bound, bound, (100, basis.dimension))
    dist = np.array([np.abs(cover - g).max(axis=1).min() for g in gammas])
    count_ok = cover.shape[0] == card.per_axis**card.dim and math.isclose(math.log(cover.shape[0]), card.log_exact,
                                                                          rel_tol=1e-15)
    secs = time.perf_counter() - t0
    ok = bool(np.all(dist <= delta)) and count_ok and secs <= 60
    report(6, "covering correctness", ok,
           f"max distance to cover {dist.max():.4f}, enumerated {cover.shape[0]} = exp({card.log_exact:.6f})",
           f"<= {delta} and exact count match", secs)
    assert ok


def test_c07_packing_distance_scaling(report):
    t0 = time.perf_counter()
    hs = [0.04, 0.02, 0.01]
    rows = packing_report(hs, alpha=2.0)
    slope = fit_loglog_slope(hs, [r["distance"] for r in rows])
    spec = PackingSpec(m=4, h=0.04, alpha=2, theta=[0] * 4)
    base = [0, 0, 0, 0]
    single = [packing_pairwise_distance(base, np.eye(4, dtype=int)[k], spec, 4000) for k in range(4)]
    worst_add = 0.0
    for theta in ([1, 1, 0, 0], [1, 0, 1, 1], [1, 1, 1, 1]):
        got = packing_pairwise_distance(base, theta, spec, 4000)
        want = sum(s for s, b in zip(single, theta) if b)
        worst_add = max(worst_add, abs(got - want) / want)
    secs = time.perf_counter() - t0
    ok = abs(slope - 5.0) <= 0.1 and worst_add <= 1e-12 and secs <= 120
    report(7, "packing distance scaling", ok, f"slope {slope:.6f}, additivity relative gap {worst_add:.2e}",
           "slope 5 +- 0.1, additivity to floating-point rounding (1e-12)", secs)
    assert ok


def test_c08_tv_scaling(report):
    t0 = time.perf_counter()
    rows = packing_report([0.02, 0.01, 0.005], alpha=2.0)
    scaled = [r["tv"] / r["h"] ** (2.0 - 1 + 1) for r in rows]
    variation = max(scaled) / min(scaled) - 1.0
    secs = time.perf_counter() - t0
    ok = variation <= 0.25 and secs <= 120
    report(8, "TV scaling", ok, f"TV/h^2 = {', '.join(f'{s:.6g}' for s in scaled)}, variation {variation:.2e}",
           "variation <= 25%", secs)
    assert ok


def _identity_error(seed, n_mc):
    model = prior_model(FIG2_PRIOR)(seed)
    return l2_error(GridVectorField(DESK_GRID, DESK_GRID.points), model.true_map, n_mc, SeededRng(seed).child(4))[0]


@pytest.mark.slow
def test_c09_end_to_end_utility(report):
    t0 = time.perf_counter()
    cfg = SweepConfig(DESK_GRID, FIG2_PRIOR, T=200, include_true=True, C=0.25)
    rows = run_sweep([20000], [1.0], SEEDS, prior_model(FIG2_PRIOR), cfg)
    priv = float(np.median([r.error_private for r in rows]))
    nonp = float(np.median([r.error_nonprivate for r in rows]))
    ident = float(np.median([_identity_error(s, cfg.n_mc) for s in SEEDS]))
    secs = time.perf_counter() - t0
    ok = priv <= 2 * nonp and priv <= ident and nonp <= ident and secs <= 1800
    report(9, "end-to-end utility", ok,
           f"median private {priv:.3e}, non-private {nonp:.3e} (ratio {priv / nonp:.2f}), identity {ident:.3e}",
           "private <= 2x non-private, both <= identity", secs)
    assert ok


@pytest.mark.slow
def test_c10_rate_trend(report):
    t0 = time.perf_counter()
    cfg = SweepConfig(DESK_GRID, FIG2_PRIOR, T=200, include_true=True, C=0.25)
    by_n = median_by(run_sweep([2000, 8000, 32000], [1.0], SEEDS, prior_model(FIG2_PRIOR), cfg), "n",
                     "error_private")
    by_eps = median_by(run_sweep([20000], [0.1, 1.0, 10.0], SEEDS, prior_model(FIG2_PRIOR), cfg), "epsilon",
                       "error_private")
    vn, ve = list(by_n.values()), list(by_eps.values())
    dec_n = all(a > b for a, b in zip(vn, vn[1:]))
    noninc_eps = all(a >= b for a, b in zip(ve, ve[1:]))
    secs = time.perf_counter() - t0
    ok = dec_n and noninc_eps and secs <= 2700
    report(10, "rate trend", ok,
           f"by n {', '.join(f'{k}: {v:.3e}' for k, v in by_n.items())}; "
           f"by eps {', '.join(f'{k}: {v:.3e}' for k, v in by_eps.items())}",
           "strictly decreasing in n, non-increasing in eps", secs)
    assert ok


def test_c11_gradient_checks(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    p = AttractionRepulsionParams(0.005, 0.005, (0.1, -0.05), (-0.15, 0.2), 0.1, 0.1)
    x = rng.uniform(-0.5, 0.5, (100, 2))
    h = 1e-5
    fd = np.stack([(attraction_repulsion_potential(x + h * e, p) - attraction_repulsion_potential(x - h * e, p))
                   / (2 * h) for e in np.eye(2)], axis=1)
    an = attraction_repulsion_gradient(x, p)
    rel = float((np.linalg.norm(fd - an, axis=1) / np.linalg.norm(an, axis=1)).max())
    spec = make_uniform_grid(-0.5, 0.5, 17, 2)
    A = np.array([[1.3, 0.4], [0.4, 0.7]])
    b = np.array([0.2, -0.1])
    pts = spec.points
    f = GridPotential(spec, 0.5 * np.einsum("ij,jk,ik->i", pts, A, pts) + pts @ b + 0.3)
    grad = finite_diff_gradient(f).vectors.reshape(spec.shape + (2,))[1:-1, 1:-1]
    exact = (pts @ A + b).reshape(spec.shape + (2,))[1:-1, 1:-1]
    quad_err = float(np.abs(grad - exact).max())
    secs = time.perf_counter() - t0
    ok = rel <= 1e-6 and quad_err <= 1e-10 and secs <= 10
    report(11, "gradient checks", ok, f"max relative error {rel:.2e}, quadratic interior error {quad_err:.2e}",
           "<= 1e-6 and <= 1e-10", secs)
    assert ok
