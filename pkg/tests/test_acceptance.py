"""Acceptance criteria 1-6 at grid 2^14 + 1, T = 1.

Each test records one PASS/FAIL line (shown in the terminal summary).
Frozen oracle values come from the scripts in tests/oracles/.
"""

import time

import numpy as np
import pytest

from pathint import (
    Partition,
    SamplePath,
    TimeGrid,
    controlled_from_c2,
    dyadic_sequence,
    follmer_ito_defect,
    gamma_riemann,
    gamma_riemann_tensor,
    gen_brownian,
    gen_deterministic,
    gen_ito_euler,
    invariance_experiment,
    levy_area_sum,
    p_variation,
    pathwise_integral,
    quadratic_variation,
    triadic_sequence,
    cauchy_report,
)
from pathint.rough_path import chen_defect, lift_from_partition
from pathint.roughness import dyadic_triadic_grid, levy_roughness_stat, quadratic_roughness_stat

from conftest import GAMMAS, record
from test_partitions import brute_pvar
from test_roughness import brute_levy, brute_quadratic

pytestmark = pytest.mark.acceptance

N = 14
GRID = TimeGrid.uniform(1.0, 2**N + 1)

# tests/oracles/stochastic_bands.py: 4 standard deviations of the n=14 discretization error,
# estimated from 4000 replicates on a 2^16 grid (theory: 0.044194 and 0.022097)
QV_BAND = 0.043904
ITO_BAND = 0.021952
# tests/oracles/invariance_seed42.py, plus 10%
SEED42_QV_AT_T = 0.0079874638 * 1.1
SEED42_LEVY12_AT_T = 0.0014754580 * 1.1


def _fixtures():
    paths = {f"bm{s}": gen_brownian(GRID, 2, seed=s) for s in range(1, 6)}
    paths["circle"] = gen_deterministic("circle", GRID)
    paths["zigzag"] = gen_deterministic("zigzag", GRID, dim=2, m=8)
    paths["linear"] = gen_deterministic("linear", GRID, dim=2)
    return paths


def _scale(*arrays) -> float:
    return 1e-12 * max(1.0, *(float(np.max(np.abs(a))) for a in arrays))


def test_criterion_1_exact_identities():
    start = time.perf_counter()
    seq = dyadic_sequence(GRID, N, 4)
    rng = np.random.default_rng(1)
    failures = []
    for name, x in _fixtures().items():
        for part in seq:
            ig = {g: gamma_riemann_tensor(x, x, part, g).values for g in GAMMAS}
            qv = quadratic_variation(x, part).values
            lv = levy_area_sum(x, part).values
            i0 = ig[0.0]
            tol = _scale(i0, qv, lv)
            at_t = lambda a: a[-1]
            if any(np.max(np.abs(at_t(ig[g]) - (at_t(i0) + g * at_t(qv)))) > tol for g in GAMMAS):
                failures.append(f"{name} (b) N={part.n_cells}")
            if np.max(np.abs(at_t(lv) - (2 * at_t(i0) + at_t(qv)))) > tol:
                failures.append(f"{name} (c) N={part.n_cells}")
            anti = [at_t(ig[g]) - at_t(ig[g]).T for g in GAMMAS]
            if any(np.max(np.abs(a - anti[0])) > tol for a in anti):
                failures.append(f"{name} (e) N={part.n_cells}")
            pts = part.indices
            for g in GAMMAS:
                if np.max(np.abs(ig[0.5][pts] - (ig[g][pts] + 0.5 * (1 - 2 * g) * qv[pts]))) > tol:
                    failures.append(f"{name} (g) gamma={g} N={part.n_cells}")
            for j in range(x.dim):
                xj = SamplePath(GRID, x.values[:, j])
                l1 = levy_area_sum(xj, part).value_at_T[0, 0]
                v = xj.values[:, 0]
                if abs(l1 - (v[-1] ** 2 - v[0] ** 2)) > _scale(v**2):
                    failures.append(f"{name} (d) N={part.n_cells}")
        lift = lift_from_partition(x, seq[-1], 0.5)
        worst = max(
            float(np.max(np.abs(chen_defect(lift, *np.sort(rng.integers(0, GRID.n_points, 3))))))
            for _ in range(1000)
        )
        if worst > _scale(lift.I.values, x.values**2):
            failures.append(f"{name} (a) chen {worst:.2e}")
        F = lambda v: np.array([v @ v])
        DF = lambda v: 2 * v[None]
        hess = 2 * np.eye(x.dim)[None]
        D2F = lambda v: hess
        for g in GAMMAS:
            res = follmer_ito_defect(F, DF, D2F, x, dyadic_sequence(GRID, N, 10), g)
            if max(res.sup_defects) > _scale(x.values**2):
                failures.append(f"{name} (f) gamma={g}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 10.0
    record(1, ok, f"identities (a)-(g) on 8 fixtures, {elapsed:.1f}s, failures={failures[:5]}")
    assert ok


def test_criterion_2_brute_force_oracles():
    rng = np.random.default_rng(2)
    worst_pvar = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 13))
        x = rng.standard_normal((n, int(rng.integers(1, 3))))
        p = float(rng.uniform(1.0, 3.5))
        b = brute_pvar(x, p)
        worst_pvar = max(worst_pvar, abs(p_variation(x, p) - b) / max(1.0, b))
    g = TimeGrid.uniform(1.0, 2**8 + 1)
    worst_stat = 0.0
    for case in range(50):
        x = gen_brownian(g, 2, seed=100 + case)
        k = int(rng.integers(1, 65))
        d_n = Partition(g, np.concatenate([[0], np.sort(rng.choice(np.arange(1, 256), k - 1, replace=False)), [256]]))
        m = int(rng.integers(1, 10))
        pi_n = Partition(g, np.concatenate([[0], np.sort(rng.choice(np.arange(1, 256), m - 1, replace=False)), [256]]))
        t = float(g.points[rng.integers(0, g.n_points)])
        for fast, slow in ((quadratic_roughness_stat, brute_quadratic), (levy_roughness_stat, brute_levy)):
            worst_stat = max(worst_stat, float(np.max(np.abs(fast(x, pi_n, d_n, t) - slow(x, pi_n, d_n, t)))))
    ok = worst_pvar <= 1e-12 and worst_stat <= 1e-12
    record(2, ok, f"p-variation worst rel err {worst_pvar:.1e} (100 cases), statistics worst {worst_stat:.1e} (50 cases)")
    assert ok


def test_criterion_3_stochastic_oracles():
    part = dyadic_sequence(GRID, N, N)[0]
    hits = {"qv": 0, "ito": 0, "strat": 0, "backward": 0}
    for seed in range(1, 21):
        x = gen_brownian(GRID, 1, seed=seed)
        bT = x.values[-1, 0]
        qv = quadratic_variation(x, part).value_at_T[0, 0]
        i = {g: gamma_riemann(x, x, part, g).value_at_T[0] for g in (0.0, 0.5, 1.0)}
        hits["qv"] += abs(qv - 1.0) <= QV_BAND
        hits["ito"] += abs(i[0.0] - (bT**2 - 1) / 2) <= ITO_BAND
        hits["strat"] += abs(i[0.5] - bT**2 / 2) <= 1e-12 * max(1.0, bT**2)
        hits["backward"] += abs(i[1.0] - (bT**2 + 1) / 2) <= ITO_BAND
    ok = all(v >= 19 for v in hits.values())
    record(3, ok, "seeds inside band out of 20: " + ", ".join(f"{k}={v}" for k, v in hits.items()))
    assert ok


def test_criterion_4_pathwise_vs_rough():
    start = time.perf_counter()
    seq = dyadic_sequence(GRID, N, 8)
    rows, n_pass, n_within = [], 0, 0
    for seed in range(1, 6):
        x = gen_brownian(GRID, 1, seed=seed)
        cp = controlled_from_c2(np.sin, lambda v: np.cos(v)[None, None], x)
        for g in (0.0, 0.5, 1.0):
            res = pathwise_integral(cp, x, seq, g, tol=1e-3)
            cc = res.cross_check
            n_pass += cc["passed"]
            n_within += cc["within_gaps"]
            if not cc["passed"]:
                rough = res.diagnostics["rough"].ladder
                rows.append(
                    f"s{seed}/g={g}: pathwise_gap={res.last_gap:.1e}(conv={res.ladder.converged}) "
                    f"rough_gap={rough.last_gap:.1e}(conv={rough.converged})"
                )
    elapsed = time.perf_counter() - start
    ok = n_pass == 15 and elapsed < 120
    record(
        4,
        ok,
        f"{n_pass}/15 cases passed, gap at T within 3x last gap in {n_within}/15, {elapsed:.0f}s; "
        f"failing: {'; '.join(rows)}",
    )
    assert ok


def test_criterion_5_invariance():
    g = dyadic_triadic_grid(1.0, N, 9)
    dyad, triad = dyadic_sequence(g, N, 8), triadic_sequence(g, 9, 4)
    # d = 1: the Lévy sum telescopes to X_T^2 - X_0^2 for every partition
    levy1 = max(
        invariance_experiment(gen_brownian(g, 1, seed=s), dyad, triad).discrepancies["levy_sup"] for s in (1, 2, 3)
    )
    # smooth path: QV discrepancy shrinks towards zero
    circle = gen_deterministic("circle", g)
    smooth = [
        invariance_experiment(circle, dyadic_sequence(g, n, n - 1), triadic_sequence(g, k, k - 1)).discrepancies["qv_sup"]
        for n, k in ((6, 4), (10, 6), (14, 9))
    ]
    rep = invariance_experiment(gen_brownian(g, 2, seed=42), dyad, triad)
    disc, slopes = rep.discrepancies, rep.slopes
    checks = {
        "levy_d1": levy1 <= 1e-12,
        "smooth_qv": smooth[0] > smooth[1] > smooth[2] and smooth[2] < 1e-4,
        "seed42_qv": disc["qv_at_T"] <= SEED42_QV_AT_T,
        "seed42_levy12": disc["levy12_at_T"] <= SEED42_LEVY12_AT_T,
        "slopes": slopes["quadratic"] < 0 and slopes["levy"] < 0,
    }
    ok = all(checks.values())
    record(
        5,
        ok,
        f"d=1 Lévy {levy1:.1e}; smooth QV {smooth[-1]:.1e}; seed 42 qv_T={disc['qv_at_T']:.5f} "
        f"levy12_T={disc['levy12_at_T']:.5f}; slopes q={slopes['quadratic']:.1f} l={slopes['levy']:.1f}; "
        f"degenerate levels={rep.degenerate}; failed={[k for k, v in checks.items() if not v]}",
    )
    assert ok


def _reference_ladder(x: SamplePath, w: SamplePath, seq, gamma: float):
    """Itô reference ``Σ X_{t_k}^2 ΔW`` per level; Stratonovich adds ``½ Σ X_{t_k}^2 Δt``."""
    y = SamplePath(x.grid, x.values**2)
    t = SamplePath(x.grid, x.grid.points)
    levels = []
    for part in seq:
        ref = gamma_riemann(y, w, part, 0.0)
        if gamma == 0.5:
            ref = ref + 0.5 * gamma_riemann(y, t, part, 0.0)
        ref.meta["N"] = part.n_cells
        levels.append(ref)
    return cauchy_report(levels, labels=seq.labels)


def test_criterion_6_ito_stratonovich_consistency():
    seq = dyadic_sequence(GRID, N, 8)
    rows, ok = [], True
    for seed in range(1, 6):
        x, w = gen_ito_euler(
            GRID, lambda t, v: np.zeros_like(v), lambda t, v: np.diag(v), x0=1.0, seed=seed, return_noise=True
        )
        cp = controlled_from_c2(lambda v: v, lambda v: np.ones((1, 1, 1)), x)
        for g in (0.0, 0.5):
            res = pathwise_integral(cp, x, seq, g, check=False)
            ref = _reference_ladder(x, w, seq, g)
            gap = abs(float(res.value_at_T[0]) - float(ref.last.value_at_T[0]))
            bound = 3.0 * (res.last_gap + ref.last_gap)
            ok &= gap <= bound
            rows.append(f"s{seed}/g={g}: {gap:.1e}<={bound:.1e}")
    record(6, ok, "; ".join(rows))
    assert ok
