"""Controlled paths, compensated rough integrals, γ-Riemann pathwise integrals and Föllmer–Itô checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalError, ValidationError
from .grid_paths import SamplePath, check_same_grid
from .partitions import Partition, PartitionSequence, _window, p_variation, pvar_2param
from .riemann import (
    SCHEMA_VERSION,
    ConvergenceReport,
    RunningIntegral,
    _assemble,
    _cells,
    cauchy_report,
    check_gamma,
    gamma_riemann,
    quadratic_variation,
)
from .rough_path import RoughPathLift, lift_from_partition

FD_REL_STEP = 1e-5


def _eval_on_path(f: Callable, X: SamplePath, shape: tuple, name: str) -> np.ndarray:
    out = np.empty((len(X),) + shape)
    size = math.prod(shape)
    for k, x in enumerate(X.values):
        v = np.asarray(f(x), dtype=float)
        if v.size != size:
            raise ValidationError(f"{name} returned shape {v.shape}, expected {shape}", name)
        out[k] = v.reshape(shape)
    bad = np.flatnonzero(~np.all(np.isfinite(out.reshape(len(X), -1)), axis=1))
    if bad.size:
        raise NumericalError(f"{name} is not finite on the path", int(bad[0]))
    return out


def _fd_derivative(f: Callable, shape: tuple, d: int, scale: float) -> Callable:
    """Central differences with step ``FD_REL_STEP * scale``; derivative index last."""
    h = FD_REL_STEP * max(scale, 1.0)

    def df(x):
        x = np.asarray(x, dtype=float)
        cols = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            hi = np.asarray(f(x + e), dtype=float).reshape(shape)
            lo = np.asarray(f(x - e), dtype=float).reshape(shape)
            cols.append((hi - lo) / (2 * h))
        return np.stack(cols, axis=-1)

    return df


@dataclass(frozen=True, eq=False)
class ControlledPath:
    """``(Y, Y')`` with ``Y`` of shape ``(n, m, d)`` and ``Y'`` of shape ``(n, m, d, d)``.

    ``Y'[t, i, j, k]`` is the derivative of ``Y[i, j]`` in the direction
    ``e_k``, so ``R_{s,t} = Y_{s,t} - Y'_s X_{s,t}`` contracts the last axis.
    """

    Y: SamplePath
    Yp: SamplePath
    base: SamplePath

    def __post_init__(self):
        check_same_grid(self.Y.grid, self.base.grid)
        check_same_grid(self.Yp.grid, self.base.grid)
        d = self.base.dim
        y, yp = self.Y.values, self.Yp.values
        if y.ndim != 3 or y.shape[2] != d:
            raise ValidationError(f"Y must have shape (n, m, {d})", "Y")
        if yp.shape[1:] != y.shape[1:] + (d,):
            raise ValidationError(f"Y' must have shape (n, m, {d}, {d})", "Yp")

    @property
    def m(self) -> int:
        return self.Y.values.shape[1]

    def remainder(self, s: int, t: int) -> np.ndarray:
        y, yp, x = self.Y.values, self.Yp.values, self.base.values
        return y[t] - y[s] - yp[s] @ (x[t] - x[s])

    def remainder_field(self, ms, k: int) -> np.ndarray:
        ms = np.asarray(ms)
        y, yp, x = self.Y.values, self.Yp.values, self.base.values
        return y[k] - y[ms] - np.einsum("aijk,ak->aij", yp[ms], x[k] - x[ms])

    def norms(self, p: float, q: float | None = None, r: float | None = None, window=None) -> dict:
        """``||Y'||_q`` and ``||R||_r`` on a window; defaults ``q = p``, ``r = p/2``."""
        q = p if q is None else q
        r = p / 2.0 if r is None else r
        i, j = _window(len(self.base), window)
        return {
            "q": q,
            "r": r,
            "Yp_q": p_variation(self.Yp, q, (i, j)),
            "R_r": pvar_2param(self.remainder_field, r, (i, j)),
        }


def controlled_from_c2(
    f: Callable, df: Callable | None, X: SamplePath, m: int | None = None
) -> ControlledPath:
    """``Y = f(X)``, ``Y' = df(X)``; ``df`` falls back to central differences when None.

    ``f`` maps R^d to m x d matrices (a scalar or length-d vector is read as
    a single row). ``df(x)`` has shape ``(m, d, d)``.
    """
    d = X.dim
    probe = np.asarray(f(X.values[0]), dtype=float)
    if m is None:
        m = max(probe.size // d, 1)
    shape = (m, d)
    if probe.size != m * d:
        raise ValidationError(f"f returned {probe.size} entries, expected {m} x {d}", "f")
    y = _eval_on_path(f, X, shape, "f")
    if df is None:
        df = _fd_derivative(f, shape, d, X.sup_norm())
    yp = _eval_on_path(df, X, shape + (d,), "df")
    return ControlledPath(SamplePath(X.grid, y), SamplePath(X.grid, yp), X)


def controlled_young(Y: SamplePath, X: SamplePath) -> ControlledPath:
    """``Y' = 0``, so ``R = Y_{s,t}``; the rough integral is then the Young integral."""
    d = X.dim
    y = Y.values
    if y.ndim == 2:
        if y.shape[1] != d:
            raise ValidationError(f"Y must act on R^{d}", "Y")
        y = y[:, None, :]
    return ControlledPath(SamplePath(X.grid, y), SamplePath(X.grid, np.zeros(y.shape + (d,))), X)


@dataclass
class IntegralResult:
    value: RunningIntegral
    method: str
    gamma: float | None = None
    ladder: ConvergenceReport | None = None
    cross_check: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    levels: list = field(default_factory=list, repr=False)

    @property
    def value_at_T(self) -> np.ndarray:
        return self.value.value_at_T

    @property
    def last_gap(self) -> float | None:
        return None if self.ladder is None else self.ladder.last_gap

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "value_at_T": np.asarray(self.value_at_T).ravel().tolist(),
        }
        if self.gamma is not None:
            out["gamma"] = self.gamma
        if self.ladder is not None:
            out["ladder"] = [
                {"level": lbl, "N": n, "sup_diff_prev": dist}
                for lbl, n, dist in zip(self.ladder.labels, self.ladder.counts, self.ladder.distances)
            ]
            out["converged"] = self.ladder.converged
        if self.cross_check is not None:
            out["cross_check"] = self.cross_check
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=float)


def _compensated(cp: ControlledPath, lift: RoughPathLift, part: Partition) -> RunningIntegral:
    """``t -> Σ Y_u X_{u∧t,v∧t} + Y'_u 𝕏_{u∧t,v∧t}`` on the fine grid."""
    y, yp, x = cp.Y.values, cp.Yp.values, lift.X.values
    idx = part.indices
    u, v = idx[:-1], idx[1:]

    def term(us, ws):
        dx = x[ws] - x[us]
        xx = lift.I.values[ws] - lift.I.values[us] - np.einsum("ai,aj->aij", x[us], dx)
        return np.einsum("aij,aj->ai", y[us], dx) + np.einsum("aijk,akj->ai", yp[us], xx)

    k, uk = _cells(part)
    vals = _assemble(part, term(u, v), term(uk, np.arange(len(x))), k)
    return RunningIntegral(lift.grid, vals, {"kind": "rough_compensated", "N": part.n_cells})


def sewing_constant(cp: ControlledPath, lift: RoughPathLift, value: RunningIntegral, windows) -> dict:
    """Smallest C with ``|∫_s^t - Y_s X_{s,t} - Y'_s 𝕏_{s,t}| <= C (||R||_r ||X||_p + ||Y'||_q ||𝕏||_{p/2})``
    on the given windows (q = p, r = p/2)."""
    p = lift.p
    y, yp, x = cp.Y.values, cp.Yp.values, lift.X.values
    rows = []
    for s, t in windows:
        local = value.values[t] - value.values[s] - y[s] @ (x[t] - x[s]) - np.einsum("ijk,kj->i", yp[s], lift.XX(s, t))
        lhs = float(np.linalg.norm(local))
        nx, nxx = p_variation(lift.X, p, (s, t)), pvar_2param(lift.field, p / 2.0, (s, t))
        nrm = cp.norms(p, window=(s, t))
        rhs = nrm["R_r"] * nx + nrm["Yp_q"] * nxx
        rows.append({"window": [int(s), int(t)], "lhs": lhs, "bound": rhs, "C": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))})
    return {"C": max((r["C"] for r in rows), default=0.0), "windows": rows}


def default_windows(n_points: int, count: int = 4, max_len: int = 1024) -> list[tuple[int, int]]:
    """``count`` disjoint windows of at most ``max_len`` cells spread over the grid."""
    n_cells = n_points - 1
    if count <= 0 or n_cells < 1:
        return []
    length = max(1, min(max_len, n_cells // count))
    starts = np.linspace(0, n_cells - length, count).astype(int)
    return [(int(a), int(a + length)) for a in starts]


def rough_integral(
    cp: ControlledPath,
    lift: RoughPathLift,
    mesh_ladder: PartitionSequence,
    tol: float = 1e-3,
    sewing_windows: int = 0,
) -> IntegralResult:
    """Compensated Riemann sums along ``mesh_ladder`` with Cauchy diagnostics.

    ``sewing_windows > 0`` also estimates the constant of the local sewing
    estimate on that many windows (cost O(L^2) per window).
    """
    if cp.base is not lift.X and not np.array_equal(cp.base.values, lift.X.values):
        raise ValidationError("controlled path and lift have different base paths", "base")
    check_same_grid(lift.grid, mesh_ladder.grid)
    levels = [_compensated(cp, lift, part) for part in mesh_ladder]
    ladder = cauchy_report(levels, tol=tol, labels=mesh_ladder.labels) if len(levels) > 1 else None
    diag = {"lift_gamma": lift.gamma, "p": lift.p}
    if sewing_windows:
        diag["sewing"] = sewing_constant(cp, lift, levels[-1], default_windows(len(lift.X), sewing_windows))
    return IntegralResult(levels[-1], "rough_compensated", lift.gamma, ladder, None, diag, levels)


def gap_between(a: IntegralResult, b: IntegralResult) -> float:
    return float(np.max(np.abs(np.asarray(a.value_at_T) - np.asarray(b.value_at_T))))


def cross_check(a: IntegralResult, b: IntegralResult, factor: float = 3.0) -> dict:
    """Pass iff both ladders converged and the gap at T is at most ``factor`` times the larger last gap."""
    gap = gap_between(a, b)
    ga, gb = a.last_gap or 0.0, b.last_gap or 0.0
    both = bool(a.ladder and a.ladder.converged and b.ladder and b.ladder.converged)
    within = gap <= factor * max(ga, gb)
    return {
        "gap_at_T": gap,
        "last_gaps": [ga, gb],
        "factor": factor,
        "within_gaps": bool(within),
        "both_converged": both,
        "passed": bool(both and within),
    }


def pathwise_integral(
    cp: ControlledPath,
    X: SamplePath,
    seq: PartitionSequence,
    gamma: float,
    tol: float = 1e-3,
    check: bool = True,
    p: float = 2.5,
) -> IntegralResult:
    """γ-Riemann sums ``∫ Y d^{γ,πⁿ} X`` per level, cross-checked against the rough integral
    for the lift built from the same sequence."""
    gamma = check_gamma(gamma)
    check_same_grid(X.grid, seq.grid)
    levels = [gamma_riemann(cp.Y, X, part, gamma) for part in seq]
    ladder = cauchy_report(levels, tol=tol, labels=seq.labels) if len(levels) > 1 else None
    res = IntegralResult(levels[-1], "gamma_riemann", gamma, ladder, None, {}, levels)
    if check:
        lift = lift_from_partition(X, seq.levels[-1], gamma, p)
        rough = rough_integral(cp, lift, seq, tol=tol)
        res.cross_check = cross_check(res, rough)
        res.cross_check["rough_value_at_T"] = np.asarray(rough.value_at_T).ravel().tolist()
        res.diagnostics["rough"] = rough
    return res


def stieltjes_qv(integrand: SamplePath, bracket: RunningIntegral) -> IntegralResult:
    """``t -> Σ_{t_k < t} H_{t_k} (B_{t_{k+1}} - B_{t_k})`` over fine-grid cells.

    The trailing axes of ``H`` matching the bracket's value shape are
    contracted; a scalar ``H`` multiplies the bracket increments.
    """
    check_same_grid(integrand.grid, bracket.grid)
    b = bracket.values
    db = np.diff(b, axis=0)
    h = integrand.values
    bshape = b.shape[1:]
    n = len(integrand)
    if integrand.value_shape == (1,):
        terms = h[:-1, 0].reshape((n - 1,) + (1,) * len(bshape)) * db
    elif h.shape[h.ndim - len(bshape) :] == bshape:
        axes = "".join("ijkl"[: len(bshape)])
        terms = np.einsum(f"n...{axes},n{axes}->n...", h[:-1], db)
    else:
        raise ValidationError(f"integrand shape {integrand.value_shape} incompatible with bracket {bshape}", "integrand")
    vals = np.zeros((n,) + terms.shape[1:])
    np.cumsum(terms, axis=0, out=vals[1:])
    return IntegralResult(RunningIntegral(bracket.grid, vals, {"kind": "stieltjes"}), "stieltjes")


@dataclass
class FollmerItoResult:
    labels: list
    defects: list  # RunningIntegral per level
    gamma: float

    @property
    def sup_defects(self) -> list[float]:
        return [d.sup_norm() for d in self.defects]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "gamma": self.gamma,
            "levels": [{"level": n, "sup_defect": s} for n, s in zip(self.labels, self.sup_defects)],
        }


def follmer_ito_defect(
    F: Callable, DF: Callable, D2F: Callable, X: SamplePath, seq: PartitionSequence, gamma: float
) -> FollmerItoResult:
    """Per level ``F(X_t) - F(X_0) - ∫ DF d^{γ,π}X - (½ - γ) ∫ D²F d[X]^π``.

    ``F`` maps R^d to R^m, ``DF`` to ``(m, d)`` and ``D2F`` to ``(m, d, d)``.
    """
    gamma = check_gamma(gamma)
    d = X.dim
    m = np.asarray(F(X.values[0]), dtype=float).size
    fx = _eval_on_path(F, X, (m,), "F")
    y = SamplePath(X.grid, _eval_on_path(DF, X, (m, d), "DF"))
    h = SamplePath(X.grid, _eval_on_path(D2F, X, (m, d, d), "D2F"))
    out = []
    for part in seq:
        ito = gamma_riemann(y, X, part, gamma).values
        corr = stieltjes_qv(h, quadratic_variation(X, part)).value.values
        out.append(RunningIntegral(X.grid, fx - fx[0] - ito - (0.5 - gamma) * corr, {"N": part.n_cells}))
    return FollmerItoResult(list(seq.labels), out, gamma)
