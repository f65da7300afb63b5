"""Partitions of [0, T] on a time grid, p-variation and control functions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError
from .grid_paths import SamplePath, TimeGrid, check_same_grid


@dataclass(frozen=True, eq=False)
class Partition:
    """Grid indices ``0 = i_0 < i_1 < ... < i_N = last``."""

    grid: TimeGrid
    indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 2:
            raise ValidationError("a partition needs at least two points", "indices")
        if idx[0] != 0 or idx[-1] != self.grid.n_cells:
            raise ValidationError("partition must contain both endpoints of [0, T]", "indices")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError("partition indices must be strictly increasing", "indices")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def n_cells(self) -> int:
        """``N(π)``: the number of cells."""
        return int(self.indices.size - 1)

    @property
    def times(self) -> np.ndarray:
        return self.grid.points[self.indices]

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    def oscillation(self, path: SamplePath) -> float:
        """``max_k |X_{t_k, t_{k+1}}|``."""
        check_same_grid(self.grid, path.grid)
        inc = np.diff(path.values[self.indices], axis=0).reshape(self.n_cells, -1)
        return float(np.max(np.linalg.norm(inc, axis=1)))

    def contains(self, other: "Partition") -> bool:
        return bool(np.all(np.isin(other.indices, self.indices)))

    def __eq__(self, other):
        return (
            isinstance(other, Partition)
            and self.grid.same_as(other.grid)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PartitionSequence:
    """Finite family ``(π^n)`` of partitions; ``labels[i]`` is the level n of ``levels[i]``."""

    grid: TimeGrid
    levels: tuple
    labels: tuple = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ValidationError("empty partition sequence", "levels")
        for p in levels:
            check_same_grid(self.grid, p.grid)
        labels = tuple(range(len(levels))) if self.labels is None else tuple(int(n) for n in self.labels)
        if len(labels) != len(levels):
            raise ValidationError("one label per level required", "labels")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, i) -> Partition:
        return self.levels[i]

    def level(self, n: int) -> Partition:
        try:
            return self.levels[self.labels.index(n)]
        except ValueError:
            raise ValidationError(f"no level {n} in sequence", "level") from None

    @property
    def counts(self) -> list[int]:
        return [p.n_cells for p in self.levels]

    def is_nested(self) -> bool:
        return all(b.contains(a) for a, b in zip(self.levels, self.levels[1:]))

    def validate(self, path: SamplePath, tol: float | None = None) -> dict:
        """Check the oscillation-mesh assumption against a reference path.

        Reports ``max_k |X_{t_k,t_{k+1}}|`` and the time mesh per level. The
        default tolerance is ten times the largest one-cell oscillation of the
        path on the grid.
        """
        check_same_grid(self.grid, path.grid)
        cell_osc = float(np.max(np.linalg.norm(np.diff(path.values, axis=0).reshape(path.grid.n_cells, -1), axis=1)))
        tol = 10.0 * cell_osc if tol is None else float(tol)
        osc = [p.oscillation(path) for p in self.levels]
        mesh = [p.mesh for p in self.levels]
        osc_monotone = all(b <= a + 1e-15 for a, b in zip(osc, osc[1:]))
        mesh_monotone = all(b <= a + 1e-15 for a, b in zip(mesh, mesh[1:]))
        oscillation_ok = osc_monotone and osc[-1] <= tol
        return {
            "labels": list(self.labels),
            "oscillation": osc,
            "mesh": mesh,
            "tolerance": tol,
            "oscillation_nonincreasing": osc_monotone,
            "mesh_nonincreasing": mesh_monotone,
            "oscillation_vanishes": bool(oscillation_ok),
            "mesh_vanishes": bool(mesh_monotone and mesh[-1] <= 10.0 * float(np.max(np.diff(self.grid.points)))),
            "assumption_holds": bool(oscillation_ok),
        }


# -- constructors -----------------------------------------------------------------


def partition_from_times(grid: TimeGrid, times) -> Partition:
    return Partition(grid, grid.indices_of(np.asarray(times, dtype=float)))


def equidistant_partition(grid: TimeGrid, n_cells: int) -> Partition:
    if n_cells < 1:
        raise ValidationError("must be positive", "n_cells")
    times = np.arange(n_cells + 1) * (grid.t_max / n_cells)
    try:
        return partition_from_times(grid, times)
    except ValidationError:
        raise ValidationError(
            f"{n_cells} equal cells are not aligned with the grid ({grid.n_cells} cells)", "counts"
        ) from None


def dyadic_sequence(grid: TimeGrid, n_max: int, n_min: int = 0) -> PartitionSequence:
    """Dyadic partitions ``{k T 2^-n}`` for ``n_min <= n <= n_max``."""
    if n_max < n_min or n_min < 0:
        raise ValidationError("need 0 <= n_min <= n_max", "n_max")
    try:
        levels = [equidistant_partition(grid, 2**n) for n in range(n_min, n_max + 1)]
    except ValidationError:
        raise ValidationError(
            f"grid with {grid.n_cells} cells does not contain the dyadic points of level {n_max}", "grid"
        ) from None
    return PartitionSequence(grid, levels, range(n_min, n_max + 1), {"kind": "dyadic"})


def equidistant_sequence(grid: TimeGrid, counts: Sequence[int], labels=None) -> PartitionSequence:
    levels = [equidistant_partition(grid, int(n)) for n in counts]
    return PartitionSequence(grid, levels, labels, {"kind": "equidistant", "counts": [int(n) for n in counts]})


def lebesgue_partition(path: SamplePath, n: int) -> Partition:
    """Stopping-time partition ``τ_k = inf{t > τ_{k-1}: |t - τ| + |X_t - X_τ| >= 2^-n} ∧ T``.

    The infimum is taken over grid times, so each τ_k is the first grid
    point at which the condition holds.
    """
    grid = path.grid
    t = grid.points
    x = path.values.reshape(len(path), -1)
    thr = 2.0**-n
    last = grid.n_cells
    out = [0]
    cur = 0
    while cur < last:
        start = cur + 1
        width = 64
        hit = None
        while start <= last:
            stop = min(last + 1, start + width)
            score = (t[start:stop] - t[cur]) + np.linalg.norm(x[start:stop] - x[cur], axis=1)
            found = np.nonzero(score >= thr)[0]
            if found.size:
                hit = start + int(found[0])
                break
            start = stop
            width *= 2
        cur = last if hit is None else hit
        out.append(cur)
    return Partition(grid, out)


def lebesgue_sequence(path: SamplePath, levels: Sequence[int]) -> PartitionSequence:
    return PartitionSequence(
        path.grid, [lebesgue_partition(path, n) for n in levels], levels, {"kind": "lebesgue"}
    )


def reference_level(n_cells: int, p: float, epsilon: float, n: int, at_least_n: bool = True) -> int:
    """``l_n = inf{l >= n : N^(p+ε) <= 2^l}`` (drop ``l >= n`` with ``at_least_n=False``)."""
    need = (p + epsilon) * math.log2(n_cells) if n_cells > 1 else 0.0
    lvl = max(0, math.ceil(need - 1e-9))
    return max(lvl, n) if at_least_n else lvl


def sub_super_sequence(
    seq: PartitionSequence,
    r: Callable[[int], int] | Sequence[int],
    kind: str,
    labels: Sequence[int] | None = None,
) -> PartitionSequence:
    """Re-index ``σ^n = π^{r(n)}``; ``kind`` is ``"sub"`` (n <= r(n)) or ``"super"`` (n >= r(n)).

    ``labels`` are the output levels n (default: the input labels). The
    finite-sample surrogate of ``r(n) -> ∞`` is recorded in
    ``notes["r_unbounded"]``: false when r is constant over the last levels.
    """
    if kind not in ("sub", "super"):
        raise ValidationError("must be 'sub' or 'super'", "kind")
    labels = list(seq.labels if labels is None else labels)
    if callable(r):
        rn = [int(r(n)) for n in labels]
    else:
        rn = [int(v) for v in r]
        if len(rn) != len(labels):
            raise ValidationError("one r value per output level required", "r")
    if any(b < a for a, b in zip(rn, rn[1:])):
        raise ValidationError("r must be non-decreasing", "r")
    for n, m in zip(labels, rn):
        if kind == "sub" and m < n:
            raise ValidationError(f"sub-sequence needs n <= r(n), got r({n}) = {m}", "r")
        if kind == "super" and m > n:
            raise ValidationError(f"super-sequence needs n >= r(n), got r({n}) = {m}", "r")
    levels = [seq.level(m) for m in rn]
    unbounded = len(rn) < 2 or rn[-1] > rn[-2]
    notes = {"kind": kind, "r": rn, "r_unbounded": bool(unbounded), "source": dict(seq.notes)}
    return PartitionSequence(seq.grid, levels, labels, notes)


# -- p-variation --------------------------------------------------------------------


def _as_rows(values) -> np.ndarray:
    v = np.asarray(values.values if isinstance(values, SamplePath) else values, dtype=float)
    return v.reshape(v.shape[0], -1)


def _window(n_points: int, window) -> tuple[int, int]:
    i, j = (0, n_points - 1) if window is None else (int(window[0]), int(window[1]))
    if not (0 <= i <= j < n_points):
        raise ValidationError(f"window ({i}, {j}) invalid for {n_points} points", "window")
    return i, j


def pvar_dp(values, p: float, window=None) -> np.ndarray:
    """Running p-variation to the power p from the window start.

    ``V[k] = max_{i <= m < k} V[m] + |X_k - X_m|^p`` with ``V[i] = 0``, so
    ``V[k - i]`` is the supremum of ``Σ |X_v - X_u|^p`` over all grid
    partitions of ``[t_i, t_k]``. O(L^2) for a window of L points.
    """
    if p < 1:
        raise ValidationError(f"p = {p} < 1", "p")
    x = _as_rows(values)
    i, j = _window(x.shape[0], window)
    xs = x[i : j + 1]
    v = np.zeros(xs.shape[0])
    for k in range(1, xs.shape[0]):
        dist = np.sqrt(np.sum((xs[k] - xs[:k]) ** 2, axis=1))
        v[k] = np.max(v[:k] + dist**p)
    return v


def p_variation(path, p: float, window=None) -> float:
    """``||X||_{p,[t_i,t_j]}``, exact over partitions made of grid points."""
    v = pvar_dp(path, p, window)
    return float(v[-1] ** (1.0 / p))


def pvar_2param(field, r: float, window: tuple[int, int]) -> float:
    """``(sup_P Σ_{[u,v]∈P} |F_{u,v}|^r)^(1/r)`` over grid partitions of a window.

    ``field(ms, k)`` returns the values ``F_{m,k}`` for an index array ``ms``
    (leading axis), evaluated lazily; norms are Euclidean over the trailing
    axes. Same recurrence as :func:`pvar_dp`, with no Chen-type reduction.
    """
    if r < 1:
        raise ValidationError(f"r = {r} < 1", "r")
    i, j = int(window[0]), int(window[1])
    if i > j:
        raise ValidationError("need i <= j", "window")
    v = np.zeros(j - i + 1)
    for k in range(i + 1, j + 1):
        ms = np.arange(i, k)
        vals = np.asarray(field(ms, k), dtype=float).reshape(ms.size, -1)
        norms = np.sqrt(np.sum(vals**2, axis=1))
        v[k - i] = np.max(v[: k - i] + norms**r)
    return float(v[-1] ** (1.0 / r))


# -- control functions ---------------------------------------------------------------


class ControlFunction:
    """Superadditive ``c(s, t)`` on pairs of grid indices ``s <= t``."""

    def __init__(self, grid: TimeGrid, kind: str, params: dict | None = None):
        self.grid = grid
        self.kind = kind
        self.params = dict(params or {})

    def __call__(self, s: int, t: int) -> float:
        return float(self.row(s, np.asarray([t]))[0])

    def row(self, s: int, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params}


class HoelderControl(ControlFunction):
    """``c(s, t) = K |t - s|^a``; superadditive for ``a >= 1``."""

    def __init__(self, grid: TimeGrid, K: float = 1.0, exponent: float = 1.0):
        if exponent < 1:
            raise ValidationError("exponent < 1 is not superadditive", "exponent")
        if K <= 0:
            raise ValidationError("must be positive", "K")
        super().__init__(grid, "hoelder", {"K": float(K), "exponent": float(exponent)})
        self.K = float(K)
        self.exponent = float(exponent)

    def row(self, s, ts):
        t = self.grid.points
        return self.K * np.abs(t[np.asarray(ts)] - t[s]) ** self.exponent


def time_control(grid: TimeGrid) -> HoelderControl:
    return HoelderControl(grid, 1.0, 1.0)


class PVarControl(ControlFunction):
    """``c(s, t) = ||X||^p_{p,[s,t]}``; dominates ``|X_{s,t}|^p`` with ratio <= 1.

    With ``support`` (sorted grid indices) the supremum runs over partitions
    made of support points only and ``c`` is defined on support pairs. That
    is still a control there and lower-bounds the full-grid one.
    """

    def __init__(self, path: SamplePath, p: float, support=None):
        if p < 1:
            raise ValidationError(f"p = {p} < 1", "p")
        params = {"p": float(p)}
        x = _as_rows(path)
        if support is not None:
            support = np.unique(np.asarray(support, dtype=np.int64))
            if support[0] < 0 or support[-1] >= x.shape[0]:
                raise ValidationError("support outside the grid", "support")
            x = x[support]
            params["support_points"] = int(support.size)
        super().__init__(path.grid, "pvar", params)
        self.path = path
        self.p = float(p)
        self.support = support
        self._x = x
        self._cache: dict[int, np.ndarray] = {}

    def _pos(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self.support is None:
            return idx
        pos = np.searchsorted(self.support, idx)
        pos = np.minimum(pos, self.support.size - 1)
        if np.any(self.support[pos] != idx):
            raise ValidationError("index not in the control's support", "control")
        return pos

    def _dp_from(self, s: int, t_end: int) -> np.ndarray:
        cached = self._cache.get(s)
        if cached is None or s + cached.size - 1 < t_end:
            cached = pvar_dp(self._x, self.p, (s, t_end))
            self._cache[s] = cached
        return cached

    def row(self, s, ts):
        ts = self._pos(ts)
        s = int(self._pos([s])[0])
        if ts.size == 0:
            return np.zeros(0)
        if np.any(ts < s):
            raise ValidationError("need s <= t", "control")
        v = self._dp_from(s, int(ts.max()))
        return v[ts - s]


class TableControl(ControlFunction):
    """Control given by a callable on times, e.g. ``lambda s, t: (t - s) ** 2``."""

    def __init__(self, grid: TimeGrid, fn: Callable[[float, np.ndarray], np.ndarray], name: str = "custom"):
        super().__init__(grid, "custom", {"name": name})
        self.fn = fn

    def row(self, s, ts):
        t = self.grid.points
        return np.asarray(self.fn(t[s], t[np.asarray(ts)]), dtype=float)


def control_from_pvar(path: SamplePath, p: float, support=None) -> PVarControl:
    return PVarControl(path, p, support)


def audit_superadditivity(c: ControlFunction, n_triples: int = 1000, seed: int = 0, window=None) -> float:
    """Largest ``c(s,u) + c(u,t) - c(s,t)`` over random grid triples (<= 0 if superadditive)."""
    rng = np.random.default_rng(seed)
    lo, hi = _window(c.grid.n_points, window)
    pool = getattr(c, "support", None)
    pool = np.arange(lo, hi + 1) if pool is None else pool[(pool >= lo) & (pool <= hi)]
    worst = -np.inf
    for _ in range(n_triples):
        s, u, t = np.sort(rng.choice(pool, size=3))
        worst = max(worst, c(s, u) + c(u, t) - c(s, t))
    return float(worst)


def c_balanced_ratio(seq: PartitionSequence, c: ControlFunction) -> dict:
    """Per level ``max_i c(t_i, t_{i+1}) / min_i c(t_i, t_{i+1})``; ``inf`` when a cell has c = 0."""
    ratios = []
    for part in seq.levels:
        vals = np.array([c(int(a), int(b)) for a, b in zip(part.indices[:-1], part.indices[1:])])
        lo, hi = float(np.min(vals)), float(np.max(vals))
        ratios.append(math.inf if lo <= 0 else hi / lo)
    return {"labels": list(seq.labels), "ratios": ratios, "sup": max(ratios), "control": c.describe()}


# -- CSV ---------------------------------------------------------------------------------


def write_partition_csv(seq: PartitionSequence, filename) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "k", "t"])
        for n, part in sorted(zip(seq.labels, seq.levels), key=lambda x: x[0]):
            for k, t in enumerate(part.times):
                w.writerow([n, k, f"{t:.17g}"])


def read_partition_csv(filename, grid: TimeGrid) -> PartitionSequence:
    by_level: dict[int, list[tuple[int, float]]] = {}
    with open(filename, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["level", "k", "t"]:
            raise ValidationError("expected header 'level,k,t'", "csv")
        for row in reader:
            by_level.setdefault(int(row["level"]), []).append((int(row["k"]), float(row["t"])))
    labels = sorted(by_level)
    levels = [partition_from_times(grid, [t for _, t in sorted(by_level[n])]) for n in labels]
    return PartitionSequence(grid, levels, labels)
