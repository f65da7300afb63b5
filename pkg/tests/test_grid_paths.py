import io

import numpy as np
import pytest

from pathint import (
    NumericalError,
    SamplePath,
    TimeGrid,
    ValidationError,
    gen_brownian,
    gen_deterministic,
    gen_fbm,
    gen_ito_euler,
    read_path_csv,
    write_path_csv,
)
from pathint.grid_paths import fbm_covariance


def test_uniform_grid_basics():
    g = TimeGrid.uniform(2.0, 5)
    assert g.n_cells == 4 and g.t_max == 2.0 and g.is_uniform
    assert g.index_of(1.5) == 3
    with pytest.raises(ValidationError):
        g.index_of(1.3)


def test_grid_rejects_bad_points():
    with pytest.raises(ValidationError):
        TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValidationError):
        TimeGrid(np.array([0.1, 1.0]))


def test_union_grid_contains_both_families():
    g = TimeGrid.union(1.0, [2**14, 3**9])
    assert g.n_points == 36067
    assert not g.is_uniform
    g.indices_of(np.arange(2**14 + 1) / 2**14)
    g.indices_of(np.arange(3**9 + 1) / 3**9)


def test_brownian_is_reproducible_and_replicates_differ():
    g = TimeGrid.uniform(1.0, 1025)
    a = gen_brownian(g, 2, seed=3)
    b = gen_brownian(g, 2, seed=3)
    c = gen_brownian(g, 2, seed=3, replicate=1)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.all(a.values[0] == 0.0)


def test_brownian_increment_variance():
    g = TimeGrid.uniform(1.0, 2**16 + 1)
    x = gen_brownian(g, 1, seed=5).values[:, 0]
    qv = np.sum(np.diff(x) ** 2)
    assert abs(qv - 1.0) < 4 * np.sqrt(2 / 2**16)


def test_fbm_covariance_recovered_by_circulant():
    g = TimeGrid.uniform(1.0, 65)
    reps = np.array([gen_fbm(g, 0.3, seed=9, replicate=r).values[[16, 64], 0] for r in range(4000)])
    emp = reps.T @ reps / reps.shape[0]
    ref = fbm_covariance(g.points[[16, 64]], 0.3)
    assert np.max(np.abs(emp - ref)) < 0.06


def test_fbm_dense_path_on_nonuniform_grid():
    g = TimeGrid(np.concatenate([np.linspace(0, 0.5, 40, endpoint=False), np.linspace(0.5, 1, 31)]))
    x = gen_fbm(g, 0.7, seed=1, dim=2)
    assert x.values.shape == (g.n_points, 2)
    with pytest.raises(ValidationError):
        gen_fbm(g, 1.5)


def test_euler_zero_drift_identity_vol_is_brownian():
    g = TimeGrid.uniform(1.0, 513)
    x, w = gen_ito_euler(g, lambda t, x: 0 * x, lambda t, x: np.eye(2), x0=[0, 0], seed=4, return_noise=True)
    assert np.allclose(x.values, gen_brownian(g, 2, seed=4).values, atol=1e-13)
    assert np.allclose(w.values, x.values)


def test_euler_blowup_is_reported():
    g = TimeGrid.uniform(1.0, 65)
    with pytest.raises(NumericalError), np.errstate(over="ignore", invalid="ignore"):
        gen_ito_euler(g, lambda t, x: 1e200 * x**2, lambda t, x: np.zeros((1, 1)), x0=1.0)


@pytest.mark.parametrize("kind", ["linear", "circle", "monomial", "zigzag"])
def test_deterministic_paths_start_correctly(kind):
    g = TimeGrid.uniform(1.0, 101)
    x = gen_deterministic(kind, g, q=2.0, m=5)
    start = [1.0, 0.0] if kind == "circle" else [0.0]
    assert np.allclose(x.values[0], start)


def test_zigzag_peaks():
    g = TimeGrid.uniform(1.0, 41)
    z = gen_deterministic("zigzag", g, m=4)
    assert np.isclose(z.values.max(), 0.125)
    assert np.allclose(z.values[::10, 0], 0.0)


def test_csv_roundtrip_is_lossless(tmp_path):
    g = TimeGrid.uniform(1.0, 33)
    x = gen_brownian(g, 3, seed=2)
    f = tmp_path / "p.csv"
    write_path_csv(x, f)
    y = read_path_csv(f)
    assert np.array_equal(x.values, y.values) and np.array_equal(g.points, y.grid.points)
    buf = io.StringIO()
    write_path_csv(x, buf)
    assert buf.getvalue().splitlines()[0] == "t,x1,x2,x3"


def test_csv_rejects_garbage(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("t,x1\n0,0\n0.5,abc\n")
    with pytest.raises(ValidationError):
        read_path_csv(f)
    f.write_text("a,b\n0,1\n")
    with pytest.raises(ValidationError):
        read_path_csv(f)


def test_samplepath_rejects_nan():
    g = TimeGrid.uniform(1.0, 3)
    with pytest.raises((ValidationError, NumericalError)):
        SamplePath(g, np.array([[0.0], [np.nan], [1.0]]))
