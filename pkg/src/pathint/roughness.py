"""Quadratic and Lévy roughness statistics and partition-invariance experiments.

Notation: ``pi_n`` is the candidate partition with points ``t_k`` and
``d_n`` the reference (dyadic) partition with points ``s_i``. Buckets are
half-open, ``s_i`` belongs to bucket k iff ``t_k < s_i <= t_{k+1}``.
Points are compared through grid indices, so no rounding is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grid_paths import SamplePath, TimeGrid, check_same_grid
from .partitions import (
    ControlFunction,
    Partition,
    PartitionSequence,
    c_balanced_ratio,
    equidistant_partition,
    reference_level,
    time_control,
)
from .riemann import SCHEMA_VERSION, levy_area_sum, quadratic_variation
from .rough_path import check_p

DEFAULT_EPSILON = 0.1


def _time_index(grid: TimeGrid, t) -> int:
    if t is None:
        return grid.n_points - 1
    t = float(t)
    if not 0.0 <= t <= grid.t_max * (1 + 1e-12):
        raise ValidationError(f"t = {t} outside [0, {grid.t_max}]", "t")
    return grid.locate(min(t, grid.t_max))


def _clamped_values(X: SamplePath, d_n: Partition, g: int) -> np.ndarray:
    """``X_{s_i ∧ t}`` for i = 0..N and a repeated last row standing in for ``s_{N+1}``."""
    xs = X.values[np.minimum(d_n.indices, g)]
    return np.vstack([xs, xs[-1:]])


def _bucket_bounds(pi_n: Partition, d_n: Partition) -> tuple[np.ndarray, np.ndarray]:
    """``m_k = min{i : s_i > t_k}`` and ``M_k = min{i : s_i > t_{k+1}}``; bucket k is ``[m_k, M_k)``."""
    check_same_grid(pi_n.grid, d_n.grid)
    first = np.searchsorted(d_n.indices, pi_n.indices, side="right")
    return first[:-1], first[1:]


def _outer_prefix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + 1, a.shape[1], b.shape[1]))
    np.cumsum(np.einsum("ki,kj->kij", a, b), axis=0, out=out[1:])
    return out


def _prefix(a: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + 1,) + a.shape[1:])
    np.cumsum(a, axis=0, out=out[1:])
    return out


def quadratic_roughness_stat(X: SamplePath, pi_n: Partition, d_n: Partition, t=None) -> np.ndarray:
    """``Σ_k Σ_{i≠i' in bucket k} Δ_i ⊗ Δ_{i'}`` with ``Δ_i = X_{s_i∧t, s_{i+1}∧t}``.

    Uses ``(ΣΔ)⊗(ΣΔ) - ΣΔ⊗Δ`` per bucket, O(N(dⁿ)). The increment after
    the last point ``s_N = T`` is zero.
    """
    check_same_grid(X.grid, d_n.grid)
    g = _time_index(X.grid, t)
    xs = _clamped_values(X, d_n, g)
    delta = np.diff(xs, axis=0)  # Δ_0..Δ_N, Δ_N = 0
    lo, hi = _bucket_bounds(pi_n, d_n)
    pd = _prefix(delta)
    pdd = _outer_prefix(delta, delta)
    sums = pd[hi] - pd[lo]
    return np.einsum("ki,kj->ij", sums, sums) - (pdd[hi] - pdd[lo]).sum(axis=0)


def levy_ranges(pi_n: Partition, d_n: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Inner index ranges ``[m_k, e_k)``; an even bucket count drops its last index."""
    lo, hi = _bucket_bounds(pi_n, d_n)
    count = hi - lo
    e = np.where(count % 2 == 0, hi - 1, hi)
    return lo, np.maximum(e, lo)


def levy_roughness_stat(X: SamplePath, pi_n: Partition, d_n: Partition, t=None) -> np.ndarray:
    """``Σ_k [Σ_{i,i'} (-1)^{i-m_k} A_i ⊗ Δ_{i'} - Σ_i A_i ⊗ Δ_i]`` over the truncated ranges,
    with ``A_i = X_{s_{i+1}∧t} + X_{s_i∧t}`` (``s_{N+1} := T``)."""
    check_same_grid(X.grid, d_n.grid)
    g = _time_index(X.grid, t)
    xs = _clamped_values(X, d_n, g)
    delta = np.diff(xs, axis=0)
    a = xs[1:] + xs[:-1]
    lo, e = levy_ranges(pi_n, d_n)
    sign = np.where(np.arange(a.shape[0]) % 2 == 0, 1.0, -1.0)
    pa = _prefix(sign[:, None] * a)
    pd = _prefix(delta)
    pad = _outer_prefix(a, delta)
    alt = (pa[e] - pa[lo]) * np.where(lo % 2 == 0, 1.0, -1.0)[:, None]
    dsum = pd[e] - pd[lo]
    diag = pad[e] - pad[lo]
    return np.einsum("ki,kj->ij", alt, dsum) - diag.sum(axis=0)


# -- alignment --------------------------------------------------------------------------


def max_dyadic_level(grid: TimeGrid) -> int:
    """Largest l such that the grid contains the dyadic partition with 2^l cells."""
    l = 0
    while 2 ** (l + 1) <= grid.n_cells:
        try:
            equidistant_partition(grid, 2 ** (l + 1))
        except ValidationError:
            break
        l += 1
    return l


@dataclass
class AlignedReference:
    labels: list
    requested_levels: list
    levels: list  # achieved dyadic level per candidate level
    partitions: list
    truncated: list
    cond_i_ratios: list

    @property
    def any_truncated(self) -> bool:
        return any(self.truncated)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "requested_levels": self.requested_levels,
            "levels": self.levels,
            "truncated": self.truncated,
            "cond_i_ratios": self.cond_i_ratios,
        }


@dataclass
class RoughnessConfig:
    p: float
    candidate: PartitionSequence
    epsilon: float = DEFAULT_EPSILON
    control: ControlFunction | None = None
    at_least_n: bool = True
    max_level: int | None = None

    def __post_init__(self):
        self.p = check_p(self.p)
        if not self.epsilon > 0:
            raise ValidationError("must be positive", "epsilon")


def align_reference(cfg: RoughnessConfig) -> AlignedReference:
    """``dⁿ = 𝕋^{l_n}`` with ``l_n = inf{l >= n : N(πⁿ)^{p+ε} <= 2^l}``, truncated at the grid's finest dyadic level."""
    grid = cfg.candidate.grid
    top = max_dyadic_level(grid) if cfg.max_level is None else cfg.max_level
    req, got, parts, trunc, ratios = [], [], [], [], []
    for n, part in zip(cfg.candidate.labels, cfg.candidate.levels):
        l = reference_level(part.n_cells, cfg.p, cfg.epsilon, int(n), cfg.at_least_n)
        req.append(l)
        trunc.append(l > top)
        l = min(l, top)
        got.append(l)
        parts.append(equidistant_partition(grid, 2**l))
        ratios.append(part.n_cells**cfg.p / 2**l)
    return AlignedReference(list(cfg.candidate.labels), req, got, parts, trunc, ratios)


# -- reports ----------------------------------------------------------------------------


def decay_slope(values, labels) -> float:
    """Least-squares slope of ``log |value|`` against the level label."""
    v = np.maximum(np.asarray(values, dtype=float), 1e-300)
    x = np.asarray(labels, dtype=float)
    if v.size < 2:
        return float("nan")
    return float(np.polyfit(x, np.log(v), 1)[0])


@dataclass
class RoughnessReport:
    p: float
    epsilon: float
    aligned: AlignedReference
    c_balanced: dict
    times: list
    quadratic: list  # per level: list of tensors per time
    levy: list
    slope_window: int
    tol: float
    discrepancies: dict = field(default_factory=dict)
    bucket_max: list = field(default_factory=list)  # most reference points in one bucket, per level

    @property
    def degenerate(self) -> list[bool]:
        """Levels where no bucket holds two reference points, so the quadratic statistic vanishes identically."""
        return [m <= 1 for m in self.bucket_max]

    def norms(self, which: str) -> list[float]:
        stats = self.quadratic if which == "quadratic" else self.levy
        return [max(float(np.linalg.norm(s)) for s in per_t) for per_t in stats]

    @property
    def slopes(self) -> dict:
        w = self.slope_window
        labels = self.aligned.labels[-w:]
        return {k: decay_slope(self.norms(k)[-w:], labels) for k in ("quadratic", "levy")}

    @property
    def verdicts(self) -> dict:
        out = {}
        for k, s in self.slopes.items():
            last = self.norms(k)[-1]
            out[k] = {
                "slope_negative": bool(s < 0),
                "final_below_tol": bool(last < self.tol),
                "trending_to_zero": bool(s < 0 and last < self.tol),
                "final_norm": last,
            }
        return out

    def to_dict(self) -> dict:
        stats = []
        for lbl, q_t, l_t in zip(self.aligned.labels, self.quadratic, self.levy):
            for t, q, lv in zip(self.times, q_t, l_t):
                stats.append(
                    {"level": lbl, "t": t, "quadratic": np.asarray(q).tolist(), "levy": np.asarray(lv).tolist()}
                )
        sl = self.slopes
        return {
            "schema_version": SCHEMA_VERSION,
            "p": self.p,
            "epsilon": self.epsilon,
            "cond_i_ratios": self.aligned.cond_i_ratios,
            "alignment": self.aligned.to_dict(),
            "c_balanced_ratio": self.c_balanced,
            "stats": stats,
            "norms": {"quadratic": self.norms("quadratic"), "levy": self.norms("levy")},
            "slopes": [sl["quadratic"], sl["levy"]],
            "slope_window": self.slope_window,
            "verdicts": self.verdicts,
            "bucket_max": self.bucket_max,
            "degenerate": self.degenerate,
            "discrepancies": self.discrepancies,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)


def roughness_report(
    X: SamplePath,
    cfg: RoughnessConfig,
    times=None,
    slope_window: int = 3,
    tol: float = 1e-1,
) -> RoughnessReport:
    """Both statistics for every candidate level against its aligned dyadic reference."""
    check_same_grid(X.grid, cfg.candidate.grid)
    times = [X.grid.t_max] if times is None else [float(t) for t in times]
    aligned = align_reference(cfg)
    control = cfg.control if cfg.control is not None else time_control(X.grid)
    ref_seq = PartitionSequence(X.grid, aligned.partitions, list(aligned.labels))
    quad, levy, bmax = [], [], []
    for pi_n, d_n in zip(cfg.candidate.levels, aligned.partitions):
        lo, hi = _bucket_bounds(pi_n, d_n)
        bmax.append(int(np.max(hi - lo)))
        quad.append([quadratic_roughness_stat(X, pi_n, d_n, t) for t in times])
        levy.append([levy_roughness_stat(X, pi_n, d_n, t) for t in times])
    cb = c_balanced_ratio(ref_seq, control)
    return RoughnessReport(cfg.p, cfg.epsilon, aligned, cb, times, quad, levy, slope_window, tol, {}, bmax)


def invariance_experiment(
    X: SamplePath,
    seq_a: PartitionSequence,
    seq_b: PartitionSequence,
    p: float = 2.5,
    epsilon: float = DEFAULT_EPSILON,
    times=None,
    slope_window: int = 3,
    tol: float = 1e-1,
    at_least_n: bool = True,
) -> RoughnessReport:
    """Compares brackets and areas at the top levels of two sequences next to the roughness statistics of ``seq_b``.

    Discrepancies are sup-in-t distances of the running quantities; the
    Lévy (1,2) entry is reported separately for d >= 2.
    """
    check_same_grid(seq_a.grid, seq_b.grid)
    check_same_grid(X.grid, seq_a.grid)
    qa, qb = quadratic_variation(X, seq_a.levels[-1]), quadratic_variation(X, seq_b.levels[-1])
    la, lb = levy_area_sum(X, seq_a.levels[-1]), levy_area_sum(X, seq_b.levels[-1])
    dq = np.abs(qa.values - qb.values)
    dl = np.abs(la.values - lb.values)
    disc = {
        "levels": [seq_a.labels[-1], seq_b.labels[-1]],
        "qv_sup": float(dq.max()),
        "qv_at_T": float(dq[-1].max()),
        "levy_sup": float(dl.max()),
        "levy_at_T": float(dl[-1].max()),
    }
    if X.dim >= 2:
        disc["levy12_sup"] = float(dl[:, 0, 1].max())
        disc["levy12_at_T"] = float(dl[-1, 0, 1])
        disc["qv12_at_T"] = float(dq[-1, 0, 1])
    validation = {"a": seq_a.validate(X)["assumption_holds"], "b": seq_b.validate(X)["assumption_holds"]}
    cfg = RoughnessConfig(p, seq_b, epsilon, at_least_n=at_least_n)
    rep = roughness_report(X, cfg, times, slope_window, tol)
    rep.discrepancies = {**disc, "assumption_holds": validation}
    return rep


def triadic_sequence(grid: TimeGrid, k_max: int, k_min: int = 1) -> PartitionSequence:
    """Equidistant partitions with 3^k cells, labelled by k."""
    ks = list(range(k_min, k_max + 1))
    return PartitionSequence(grid, [equidistant_partition(grid, 3**k) for k in ks], ks, {"kind": "triadic"})


def dyadic_triadic_grid(t_max: float, n_dyadic: int, k_triadic: int) -> TimeGrid:
    """Union of the dyadic and triadic equidistant grids (a common refinement)."""
    return TimeGrid.union(t_max, [2**n_dyadic, 3**k_triadic])


__all__ = [
    "AlignedReference",
    "RoughnessConfig",
    "RoughnessReport",
    "align_reference",
    "decay_slope",
    "dyadic_triadic_grid",
    "invariance_experiment",
    "levy_ranges",
    "levy_roughness_stat",
    "max_dyadic_level",
    "quadratic_roughness_stat",
    "roughness_report",
    "triadic_sequence",
]
