"""Time grids, sampled paths and seeded path generators.

Every path lives on a fixed, finite :class:`TimeGrid`. A "continuous path"
is represented by its values at the grid points and all partitions used
elsewhere in the package are subsets of these grid points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatchError, NumericalError, ValidationError

DEFAULT_POINTS = 2**14 + 1


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times ``0 = points[0] < ... < points[-1] = t_max``."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise ValidationError("a grid needs at least two points", "points")
        if pts[0] != 0.0:
            raise ValidationError("grid must start at 0", "points")
        if not np.all(np.isfinite(pts)) or np.any(np.diff(pts) <= 0):
            raise ValidationError("grid points must be finite and strictly increasing", "points")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t_max: float = 1.0, n_points: int = DEFAULT_POINTS) -> "TimeGrid":
        if not t_max > 0:
            raise ValidationError("must be positive", "t_max")
        if n_points < 2:
            raise ValidationError("must be at least 2", "n_points")
        pts = np.arange(n_points, dtype=float) * (t_max / (n_points - 1))
        pts[-1] = t_max
        return cls(pts)

    @classmethod
    def union(cls, t_max: float, cell_counts: Sequence[int]) -> "TimeGrid":
        """Grid containing ``k * t_max / N`` for every ``N`` in ``cell_counts``.

        Used to put e.g. dyadic and triadic partitions on one common grid.
        Points closer than ``1e-12 * t_max`` are merged.
        """
        if not t_max > 0:
            raise ValidationError("must be positive", "t_max")
        pieces = []
        for n in cell_counts:
            if int(n) < 1:
                raise ValidationError("cell counts must be positive", "cell_counts")
            pieces.append(np.arange(int(n) + 1, dtype=float) * (t_max / int(n)))
        pts = np.unique(np.concatenate(pieces))
        keep = np.concatenate([[True], np.diff(pts) > 1e-12 * t_max])
        pts = pts[keep]
        pts[0] = 0.0
        pts[-1] = t_max
        return cls(pts)

    @property
    def t_max(self) -> float:
        return float(self.points[-1])

    @property
    def n_points(self) -> int:
        return int(self.points.size)

    @property
    def n_cells(self) -> int:
        return self.n_points - 1

    @property
    def is_uniform(self) -> bool:
        dt = np.diff(self.points)
        return bool(np.allclose(dt, dt[0], rtol=1e-9, atol=0.0))

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        """Grid index of time ``t``; raises if ``t`` is not a grid point."""
        idx = self.indices_of(np.asarray([t], dtype=float), tol)
        return int(idx[0])

    def indices_of(self, times: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        pts = self.points
        pos = np.clip(np.searchsorted(pts, times), 1, pts.size - 1)
        left, right = pts[pos - 1], pts[pos]
        pos = np.where(np.abs(times - left) <= np.abs(right - times), pos - 1, pos)
        if np.any(np.abs(pts[pos] - times) > tol * self.t_max):
            bad = times[np.abs(pts[pos] - times) > tol * self.t_max][0]
            raise ValidationError(f"time {bad!r} is not a grid point", "times")
        return pos

    def locate(self, t: float) -> int:
        """Largest grid index whose time is <= ``t`` (with round-off slack)."""
        if t < -1e-12 * self.t_max or t > self.t_max * (1 + 1e-12):
            raise ValidationError(f"time {t!r} outside [0, {self.t_max}]", "t")
        i = int(np.searchsorted(self.points, t + 1e-12 * self.t_max, side="right")) - 1
        return min(max(i, 0), self.n_cells)

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.points.shape == other.points.shape and np.array_equal(self.points, other.points)
        )


def check_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if not a.same_as(b):
        raise GridMismatchError("objects live on different time grids")


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Path values on a grid: ``values[k]`` is the value at ``grid.points[k]``.

    ``values`` has shape ``(n_points, d)`` for an R^d-valued path. Matrix
    valued integrands use ``(n_points, m, d)`` and Gubinelli derivatives
    ``(n_points, m, d, d)``; ``dim`` is always the trailing axis.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.grid.n_points:
            raise ValidationError(
                f"{vals.shape[0]} rows for a grid of {self.grid.n_points} points", "values"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.argwhere(~np.isfinite(vals.reshape(vals.shape[0], -1)))[0, 0])
            raise NumericalError("path has non-finite entries", bad)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return int(self.values.shape[-1])

    @property
    def value_shape(self) -> tuple:
        return tuple(self.values.shape[1:])

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    def __len__(self):
        return self.grid.n_points

    def sup_norm(self) -> float:
        flat = self.values.reshape(len(self), -1)
        return float(np.max(np.linalg.norm(flat, axis=1)))

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "SamplePath":
        """Apply ``f`` pointwise (``f`` maps one value to one value)."""
        return SamplePath(self.grid, np.stack([np.asarray(f(v), dtype=float) for v in self.values]))


def increment(path: SamplePath, i: int, j: int) -> np.ndarray:
    """``X_{t_i, t_j} = X_{t_j} - X_{t_i}``."""
    n = len(path)
    if not (0 <= i < n and 0 <= j < n):
        raise ValidationError(f"indices ({i}, {j}) out of range for {n} points", "index")
    if i > j:
        raise ValidationError("need i <= j", "index")
    return path.values[j] - path.values[i]


def tensor(u, v) -> np.ndarray:
    """Tensor product ``(u ⊗ v)[i, j] = u[i] v[j]``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValidationError(f"shape mismatch {u.shape} vs {v.shape}", "tensor")
    return np.outer(u, v)


# -- generators ---------------------------------------------------------------


def _rng(seed: int, replicate: int | None = None) -> np.random.Generator:
    if replicate is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(replicate),)))


def gen_brownian(grid: TimeGrid, dim: int = 1, seed: int = 0, replicate: int | None = None) -> SamplePath:
    """Standard Brownian motion started at 0, exact on any grid."""
    if dim < 1:
        raise ValidationError("must be positive", "dim")
    z = _rng(seed, replicate).standard_normal((grid.n_cells, dim))
    dx = z * np.sqrt(np.diff(grid.points))[:, None]
    vals = np.zeros((grid.n_points, dim))
    np.cumsum(dx, axis=0, out=vals[1:])
    return SamplePath(grid, vals)


def fbm_covariance(times: np.ndarray, hurst: float) -> np.ndarray:
    s = np.asarray(times, dtype=float)[:, None]
    t = np.asarray(times, dtype=float)[None, :]
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2)


def _fgn_circulant(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    # Davies-Harte: exact fractional Gaussian noise with unit-step covariance.
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    acov = 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)
    row = np.concatenate([acov, acov[-2:0:-1]])
    lam = np.fft.fft(row).real
    if np.min(lam) < -1e-10 * np.max(lam):
        raise NumericalError("circulant embedding is not positive semidefinite")
    lam = np.clip(lam, 0.0, None)
    m = row.size
    w = np.sqrt(lam / m) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return np.fft.fft(w)[:n].real


MAX_DENSE_FBM_POINTS = 2**12 + 1


def gen_fbm(
    grid: TimeGrid, hurst: float, seed: int = 0, dim: int = 1, replicate: int | None = None
) -> SamplePath:
    """Fractional Brownian motion with covariance ½(s^2H + t^2H - |t-s|^2H).

    Uniform grids use circulant embedding; non-uniform grids fall back to a
    Cholesky factorization of the covariance, limited to
    ``MAX_DENSE_FBM_POINTS`` points. Coordinates are independent.
    """
    if not 0.0 < hurst < 1.0:
        raise ValidationError(f"Hurst parameter {hurst} outside (0, 1)", "hurst")
    if dim < 1:
        raise ValidationError("must be positive", "dim")
    rng = _rng(seed, replicate)
    vals = np.zeros((grid.n_points, dim))
    if grid.is_uniform:
        dt = grid.t_max / grid.n_cells
        for j in range(dim):
            noise = _fgn_circulant(grid.n_cells, hurst, rng) * dt**hurst
            vals[1:, j] = np.cumsum(noise)
    else:
        if grid.n_points > MAX_DENSE_FBM_POINTS:
            raise ValidationError(
                f"dense fBm factorization limited to {MAX_DENSE_FBM_POINTS} points", "grid"
            )
        cov = fbm_covariance(grid.points[1:], hurst)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"fBm covariance factorization failed: {exc}") from exc
        vals[1:] = chol @ rng.standard_normal((grid.n_cells, dim))
    return SamplePath(grid, vals)


def gen_ito_euler(
    grid: TimeGrid,
    drift: Callable[[float, np.ndarray], np.ndarray],
    vol: Callable[[float, np.ndarray], np.ndarray],
    x0=0.0,
    seed: int = 0,
    replicate: int | None = None,
    return_noise: bool = False,
):
    """Euler-Maruyama scheme ``X_{k+1} = X_k + b(t_k, X_k) dt + σ(t_k, X_k) dW``.

    ``vol`` returns a ``d x m`` matrix; the noise is ``m``-dimensional and is
    drawn exactly as in :func:`gen_brownian`, so zero drift and identity
    volatility reproduce the Brownian path for the same seed. With
    ``return_noise`` the driving Brownian path is returned as well.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    d = x.size
    sig0 = np.atleast_2d(np.asarray(vol(0.0, x), dtype=float))
    if sig0.shape[0] != d:
        raise ValidationError(f"vol returned shape {sig0.shape}, expected ({d}, m)", "vol")
    m = sig0.shape[1]
    t = grid.points
    dt = np.diff(t)
    dw = _rng(seed, replicate).standard_normal((grid.n_cells, m)) * np.sqrt(dt)[:, None]
    vals = np.empty((grid.n_points, d))
    vals[0] = x
    for k in range(grid.n_cells):
        b = np.asarray(drift(t[k], x), dtype=float).reshape(d)
        s = np.asarray(vol(t[k], x), dtype=float).reshape(d, m)
        x = x + b * dt[k] + s @ dw[k]
        if not np.all(np.isfinite(x)):
            raise NumericalError("Euler scheme produced a non-finite value", k + 1)
        vals[k + 1] = x
    path = SamplePath(grid, vals)
    if return_noise:
        w = np.zeros((grid.n_points, m))
        np.cumsum(dw, axis=0, out=w[1:])
        return path, SamplePath(grid, w)
    return path


def gen_deterministic(
    kind: str,
    grid: TimeGrid,
    dim: int = 1,
    q: float = 1.0,
    m: int = 1,
    height: float | None = None,
) -> SamplePath:
    """Smooth and piecewise-linear test paths.

    ``linear``: every coordinate equals t. ``circle``: (cos t, sin t).
    ``monomial``: t**q. ``zigzag``: sawtooth with ``m`` teeth of peak
    ``height`` (default slope one, i.e. ``t_max / (2 m)``).
    """
    t = grid.points
    if kind == "linear":
        vals = np.repeat(t[:, None], dim, axis=1)
    elif kind == "circle":
        vals = np.column_stack([np.cos(t), np.sin(t)])
    elif kind == "monomial":
        if q < 1:
            raise ValidationError("must be >= 1", "q")
        vals = np.repeat((t**q)[:, None], dim, axis=1)
    elif kind == "zigzag":
        if m < 1:
            raise ValidationError("must be >= 1", "m")
        width = grid.t_max / m
        h = width / 2.0 if height is None else float(height)
        u = t / width
        u = np.where(np.abs(u - np.round(u)) < 1e-12, np.round(u), u)
        phase = u - np.floor(u)
        tri = np.where(phase <= 0.5, 2.0 * phase, 2.0 - 2.0 * phase) * h
        vals = np.repeat(tri[:, None], dim, axis=1)
    else:
        raise ValidationError(f"unknown kind {kind!r}", "kind")
    return SamplePath(grid, vals)


# -- CSV ------------------------------------------------------------------------


def write_path_csv(path: SamplePath, filename) -> None:
    """Write ``t,x1,...,xd`` with 17 significant digits (lossless for doubles).

    ``filename`` may also be an open text stream.
    """
    if path.values.ndim != 2:
        raise ValidationError("only vector-valued paths have a CSV form", "path")
    if hasattr(filename, "write"):
        _write_rows(path, filename)
        return
    with open(filename, "w", newline="") as fh:
        _write_rows(path, fh)


def _write_rows(path: SamplePath, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"x{j + 1}" for j in range(path.dim)])
    for t, row in zip(path.times, path.values):
        w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def read_path_csv(filename) -> SamplePath:
    with open(filename, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t" or len(rows[0]) < 2:
        raise ValidationError("expected header 't,x1,...,xd'", "csv")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"non-numeric entry: {exc}", "csv") from exc
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise ValidationError("ragged rows", "csv")
    return SamplePath(TimeGrid(data[:, 0]), data[:, 1:])
