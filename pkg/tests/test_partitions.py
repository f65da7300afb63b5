import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathint import (
    Partition,
    TimeGrid,
    ValidationError,
    control_from_pvar,
    dyadic_sequence,
    equidistant_partition,
    equidistant_sequence,
    gen_brownian,
    gen_deterministic,
    lebesgue_sequence,
    p_variation,
    reference_level,
)
from pathint.partitions import (
    HoelderControl,
    TableControl,
    audit_superadditivity,
    c_balanced_ratio,
    pvar_2param,
    pvar_dp,
    read_partition_csv,
    sub_super_sequence,
    write_partition_csv,
)


def brute_pvar(x: np.ndarray, p: float) -> float:
    """Exhaustive supremum over all subsets of interior points."""
    n = x.shape[0]
    best = 0.0
    for r in range(n - 1):
        for inner in itertools.combinations(range(1, n - 1), r):
            pts = (0, *inner, n - 1)
            s = sum(np.linalg.norm(x[b] - x[a]) ** p for a, b in zip(pts, pts[1:]))
            best = max(best, s)
    return best ** (1.0 / p)


def test_pvar_dp_matches_enumeration_100_cases():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(2, 13))
        d = int(rng.integers(1, 3))
        p = float(rng.uniform(1.0, 3.5))
        x = rng.standard_normal((n, d))
        assert abs(p_variation(x, p) - brute_pvar(x, p)) <= 1e-12 * max(1.0, brute_pvar(x, p))


def test_pvar_monotone_path_is_total_increment():
    x = np.linspace(0, 3, 20)[:, None]
    assert np.isclose(p_variation(x, 2.5), 3.0)


def test_pvar_window_and_errors():
    x = np.array([[0.0], [1.0], [0.0], [1.0]])
    assert np.isclose(p_variation(x, 1.0, window=(1, 3)), 2.0)
    with pytest.raises(ValidationError):
        pvar_dp(x, 0.5)
    with pytest.raises(ValidationError):
        p_variation(x, 2.0, window=(2, 1))


def test_pvar_2param_reduces_to_one_param_for_increments():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((15, 2))
    field = lambda ms, k: x[k] - x[ms]
    assert np.isclose(pvar_2param(field, 2.2, (0, 14)), p_variation(x, 2.2))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=30), st.floats(1.0, 4.0))
@settings(max_examples=60, deadline=None)
def test_pvar_dominates_total_increment_and_is_superadditive(vals, p):
    x = np.asarray(vals)[:, None]
    v = pvar_dp(x, p)
    assert v[-1] ** (1 / p) >= abs(x[-1, 0] - x[0, 0]) - 1e-12
    m = len(vals) // 2
    left = pvar_dp(x, p, (0, m))[-1]
    right = pvar_dp(x, p, (m, len(vals) - 1))[-1]
    assert left + right <= v[-1] + 1e-9 * max(1.0, v[-1])


def test_partition_validation():
    g = TimeGrid.uniform(1.0, 9)
    with pytest.raises(ValidationError):
        Partition(g, [0, 4])
    with pytest.raises(ValidationError):
        Partition(g, [0, 4, 4, 8])
    p = Partition(g, [0, 4, 8])
    assert p.n_cells == 2 and np.isclose(p.mesh, 0.5)


def test_dyadic_sequence_nested_and_counts():
    g = TimeGrid.uniform(1.0, 2**6 + 1)
    seq = dyadic_sequence(g, 6, 2)
    assert seq.counts == [4, 8, 16, 32, 64]
    assert seq.is_nested()
    with pytest.raises(ValidationError):
        dyadic_sequence(g, 7)


def test_equidistant_alignment_error():
    g = TimeGrid.uniform(1.0, 2**6 + 1)
    with pytest.raises(ValidationError) as exc:
        equidistant_partition(g, 3)
    assert exc.value.field == "counts"


def test_validate_reports_oscillation():
    g = TimeGrid.uniform(1.0, 2**10 + 1)
    x = gen_brownian(g, 1, seed=1)
    rep = dyadic_sequence(g, 10, 4).validate(x)
    assert rep["mesh_nonincreasing"] and rep["assumption_holds"]
    assert rep["oscillation"][-1] < rep["oscillation"][0]


def test_lebesgue_partition_threshold():
    g = TimeGrid.uniform(1.0, 2**12 + 1)
    x = gen_brownian(g, 1, seed=7)
    seq = lebesgue_sequence(x, [3, 5, 7])
    t, v = g.points, x.values[:, 0]
    for n, part in zip(seq.labels, seq.levels):
        idx = part.indices
        for a, b in zip(idx[:-2], idx[1:-1]):
            # each stop is the first grid time with score >= 2^-n
            score = (t[a + 1 : b + 1] - t[a]) + np.abs(v[a + 1 : b + 1] - v[a])
            assert score[-1] >= 2.0**-n and np.all(score[:-1] < 2.0**-n)
    assert seq.counts[0] < seq.counts[-1]


def test_lebesgue_on_linear_path_is_equidistant():
    g = TimeGrid.uniform(1.0, 2**8 + 1)
    x = gen_deterministic("linear", g)
    part = lebesgue_sequence(x, [4])[0]
    # score = 2(t - τ): stops every 1/32
    assert part.n_cells == 32


def test_reference_level_rules():
    assert reference_level(4, 2.5, 0.1, 1) == 6
    assert reference_level(4, 2.5, 0.1, 9) == 9
    assert reference_level(2**10, 2.0, 0.0, 3) == 20
    # without the l >= n clause the rule is ceil((p+ε) log2 N)
    assert reference_level(2, 2.5, 0.1, 8, at_least_n=False) == 3


def test_sub_super_sequences():
    g = TimeGrid.uniform(1.0, 2**8 + 1)
    seq = dyadic_sequence(g, 8, 0)
    sub = sub_super_sequence(seq, lambda n: min(8, 2 * n), "sub", labels=[1, 2, 3, 4])
    assert sub.counts == [4, 16, 64, 256] and sub.notes["r_unbounded"]
    sup = sub_super_sequence(seq, [1, 1, 2], "super", labels=[2, 3, 4])
    assert sup.counts == [2, 2, 4]
    with pytest.raises(ValidationError):
        sub_super_sequence(seq, lambda n: n - 1, "sub", labels=[2, 3])


def test_controls_superadditive():
    g = TimeGrid.uniform(1.0, 201)
    x = gen_brownian(g, 2, seed=3)
    assert audit_superadditivity(control_from_pvar(x, 2.5), 300) <= 1e-12
    assert audit_superadditivity(HoelderControl(g, 2.0, 1.5), 300) <= 1e-12
    sup = control_from_pvar(x, 2.5, support=np.arange(0, 201, 10))
    assert audit_superadditivity(sup, 300) <= 1e-12
    assert sup(0, 200) <= control_from_pvar(x, 2.5)(0, 200) + 1e-12
    with pytest.raises(ValidationError):
        sup(0, 5)
    with pytest.raises(ValidationError):
        HoelderControl(g, 1.0, 0.5)


def test_c_balanced_ratio_time_control():
    g = TimeGrid.uniform(1.0, 2**6 + 1)
    rep = c_balanced_ratio(dyadic_sequence(g, 6, 1), HoelderControl(g))
    assert np.allclose(rep["ratios"], 1.0)
    tc = TableControl(g, lambda s, t: (t - s) ** 2)
    assert np.isclose(tc(0, 64), 1.0)


def test_partition_csv_roundtrip(tmp_path):
    g = TimeGrid.uniform(1.0, 3**4 + 1)
    seq = equidistant_sequence(g, [3, 9, 27], labels=[1, 2, 3])
    f = tmp_path / "parts.csv"
    write_partition_csv(seq, f)
    back = read_partition_csv(f, g)
    assert back.labels == (1, 2, 3)
    assert all(a == b for a, b in zip(seq.levels, back.levels))
