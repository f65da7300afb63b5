"""γ-Riemann sums, quadratic variation and Lévy area along a partition.

All running quantities are materialized on the full fine grid. For a grid
time t inside the cell [u, v] of the partition, the cell contributes with
both endpoints clamped to t, e.g. ``(Y_u + γ (Y_t - Y_u)) (X_t - X_u)``.
At partition points (and at T) this is the plain Riemann sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .grid_paths import SamplePath, TimeGrid, check_same_grid
from .partitions import Partition

SCHEMA_VERSION = "1"


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"gamma = {gamma} outside [0, 1]", "gamma")
    return gamma


@dataclass(frozen=True, eq=False)
class RunningIntegral:
    """Vector- or tensor-valued function of t on a grid; ``values[0]`` is the value at 0."""

    grid: TimeGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != self.grid.n_points:
            raise ValidationError("one value per grid point required", "values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def value_at_T(self) -> np.ndarray:
        return self.values[-1]

    def at(self, i: int) -> np.ndarray:
        return self.values[i]

    def increment(self, i: int, j: int) -> np.ndarray:
        return self.values[j] - self.values[i]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        if isinstance(other, RunningIntegral):
            check_same_grid(self.grid, other.grid)
            return RunningIntegral(self.grid, self.values + other.values)
        return RunningIntegral(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, RunningIntegral):
            check_same_grid(self.grid, other.grid)
            return RunningIntegral(self.grid, self.values - other.values)
        return RunningIntegral(self.grid, self.values - other)

    def __mul__(self, a):
        return RunningIntegral(self.grid, self.values * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return RunningIntegral(self.grid, -self.values)

    def to_csv(self, filename) -> None:
        """``t,c1,...`` (vectors) or ``t,c11,c12,...`` (tensors, row-major)."""
        flat = self.values.reshape(self.grid.n_points, -1)
        shape = self.values.shape[1:]
        names = ["c" + "".join(str(i + 1) for i in idx) for idx in np.ndindex(*shape)] if shape else ["c1"]
        with open(filename, "w") as fh:
            fh.write(",".join(["t"] + names) + "\n")
            for t, row in zip(self.grid.points, flat):
                fh.write(",".join([f"{t:.17g}"] + [f"{v:.17g}" for v in row]) + "\n")


def _cells(part: Partition) -> tuple[np.ndarray, np.ndarray]:
    """For each grid index g: the cell k with ``u_k <= g`` (last cell for g = T) and ``u_k``."""
    n = part.grid.n_points
    g = np.arange(n)
    k = np.searchsorted(part.indices, g, side="right") - 1
    k = np.minimum(k, part.n_cells - 1)
    return k, part.indices[k]


def _assemble(part: Partition, full: np.ndarray, partial: np.ndarray, k: np.ndarray) -> np.ndarray:
    cum = np.zeros((part.n_cells + 1,) + full.shape[1:])
    np.cumsum(full, axis=0, out=cum[1:])
    return cum[k] + partial


def _check(Y: SamplePath, X: SamplePath, part: Partition) -> None:
    check_same_grid(Y.grid, X.grid)
    check_same_grid(X.grid, part.grid)


def _integrand(y: np.ndarray, u: np.ndarray, w: np.ndarray, gamma: float) -> np.ndarray:
    return y[u] + gamma * (y[w] - y[u])


def gamma_riemann(Y: SamplePath, X: SamplePath, part: Partition, gamma: float, clamp: bool = True) -> RunningIntegral:
    """``t -> Σ_{[u,v]} (Y_u + γ (Y_v - Y_u)) (X_{v∧t} - X_{u∧t})``.

    ``Y`` is matrix valued (``(n, m, d)``, acting on X increments) or a row
    vector ``(n, d)`` giving a scalar integral. With ``clamp=False`` the
    integrand of the cell containing t uses ``Y_v`` rather than ``Y_t``.
    """
    _check(Y, X, part)
    gamma = check_gamma(gamma)
    d = X.dim
    y = Y.values
    if y.ndim == 2:
        y = y[:, None, :]
    if y.ndim != 3 or y.shape[2] != d:
        raise ValidationError(f"integrand shape {Y.value_shape} does not act on R^{d}", "Y")
    x = X.values
    idx = part.indices
    u, v = idx[:-1], idx[1:]
    full = np.einsum("kmd,kd->km", _integrand(y, u, v, gamma), x[v] - x[u])
    k, uk = _cells(part)
    g = np.arange(len(X))
    w = g if clamp else idx[k + 1]
    partial = np.einsum("kmd,kd->km", _integrand(y, uk, w, gamma), x - x[uk])
    vals = _assemble(part, full, partial, k)
    return RunningIntegral(X.grid, vals, {"kind": "gamma_riemann", "gamma": gamma, "N": part.n_cells})


def gamma_riemann_tensor(
    Y: SamplePath, X: SamplePath, part: Partition, gamma: float, clamp: bool = True
) -> RunningIntegral:
    """``t -> Σ (Y_u + γ Y_{u,v}) ⊗ X_{u∧t, v∧t}``; with ``Y = X`` this is ``∫ X ⊗ d^{γ,π} X``."""
    _check(Y, X, part)
    gamma = check_gamma(gamma)
    y = Y.values.reshape(len(Y), -1)
    x = X.values
    idx = part.indices
    u, v = idx[:-1], idx[1:]
    full = np.einsum("ke,kd->ked", _integrand(y, u, v, gamma), x[v] - x[u])
    k, uk = _cells(part)
    g = np.arange(len(X))
    w = g if clamp else idx[k + 1]
    partial = np.einsum("ke,kd->ked", _integrand(y, uk, w, gamma), x - x[uk])
    vals = _assemble(part, full, partial, k)
    return RunningIntegral(X.grid, vals, {"kind": "gamma_riemann_tensor", "gamma": gamma, "N": part.n_cells})


def quadratic_variation(X: SamplePath, part: Partition) -> RunningIntegral:
    """``[X]^π_t = Σ X_{u∧t, v∧t} ⊗ X_{u∧t, v∧t}``."""
    check_same_grid(X.grid, part.grid)
    x = X.values
    idx = part.indices
    dx = x[idx[1:]] - x[idx[:-1]]
    full = np.einsum("ki,kj->kij", dx, dx)
    k, uk = _cells(part)
    dp = x - x[uk]
    partial = np.einsum("ki,kj->kij", dp, dp)
    vals = _assemble(part, full, partial, k)
    return RunningIntegral(X.grid, vals, {"kind": "quadratic_variation", "N": part.n_cells})


def gamma_quadratic_variation(X: SamplePath, part: Partition, gamma: float) -> RunningIntegral:
    """``[X]^{γ,π} = (1 - 2γ) [X]^π`` (identically zero for γ = ½)."""
    gamma = check_gamma(gamma)
    qv = quadratic_variation(X, part)
    return RunningIntegral(X.grid, (1.0 - 2.0 * gamma) * qv.values, {**qv.meta, "gamma": gamma})


def levy_area_sum(X: SamplePath, part: Partition) -> RunningIntegral:
    """``ℒ^π_t(X) = Σ (X_{u∧t} + X_{v∧t}) ⊗ X_{u∧t, v∧t}``."""
    check_same_grid(X.grid, part.grid)
    x = X.values
    idx = part.indices
    u, v = idx[:-1], idx[1:]
    full = np.einsum("ki,kj->kij", x[u] + x[v], x[v] - x[u])
    k, uk = _cells(part)
    partial = np.einsum("ki,kj->kij", x[uk] + x, x - x[uk])
    vals = _assemble(part, full, partial, k)
    return RunningIntegral(X.grid, vals, {"kind": "levy_area", "N": part.n_cells})


class SymAntisym:
    """Symmetric and antisymmetric two-parameter fields of the γ-lift along one partition.

    ``S(s, t) = X_{s,t} ⊗ X_{s,t} - [X]^{γ,π}_{s,t}`` and
    ``A(s, t) = ℒ^π_{s,t} - (X_s + X_t) ⊗ X_{s,t}``, so that the iterated
    integral is ``½ S + ½ A`` at partition points.
    """

    def __init__(self, X: SamplePath, part: Partition, gamma: float):
        self.X = X
        self.part = part
        self.gamma = check_gamma(gamma)
        self._bracket = gamma_quadratic_variation(X, part, gamma).values
        self._levy = levy_area_sum(X, part).values

    def S(self, s: int, t: int) -> np.ndarray:
        dx = self.X.values[t] - self.X.values[s]
        return np.outer(dx, dx) - (self._bracket[t] - self._bracket[s])

    def A(self, s: int, t: int) -> np.ndarray:
        x = self.X.values
        return (self._levy[t] - self._levy[s]) - np.outer(x[s] + x[t], x[t] - x[s])


def sym_antisym(X: SamplePath, part: Partition, gamma: float) -> SymAntisym:
    return SymAntisym(X, part, gamma)


def uniform_distance(f: RunningIntegral, g: RunningIntegral) -> float:
    """``max_t max_entries |f_t - g_t|``."""
    check_same_grid(f.grid, g.grid)
    if f.values.shape != g.values.shape:
        raise ValidationError(f"shape mismatch {f.values.shape} vs {g.values.shape}", "values")
    return float(np.max(np.abs(f.values - g.values)))


@dataclass
class ConvergenceReport:
    """Cauchy diagnostics of a ladder of running integrals."""

    labels: list
    counts: list
    distances: list  # sup distance to the previous level; None for the first
    values_at_T: list
    tol: float
    relative: bool
    tol_abs: float
    nonincreasing_tail: bool
    monotone: bool
    converged: bool
    last: RunningIntegral = field(repr=False, default=None)

    @property
    def last_gap(self) -> float:
        return float(self.distances[-1])

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tol": self.tol,
            "relative": self.relative,
            "tol_abs": self.tol_abs,
            "converged": self.converged,
            "monotone": self.monotone,
            "nonincreasing_tail": self.nonincreasing_tail,
            "levels": [
                {
                    "level": lbl,
                    "N": n,
                    "sup_diff_prev": dist,
                    "value_at_T": np.asarray(val).ravel().tolist(),
                }
                for lbl, n, dist, val in zip(self.labels, self.counts, self.distances, self.values_at_T)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


DEFAULT_TOL = 1e-3
ROUNDING_SLACK = 1e-12


def cauchy_report(levels, tol: float = DEFAULT_TOL, relative: bool = False, labels=None) -> ConvergenceReport:
    """Sup distances between consecutive levels.

    Converged iff the last distance is below ``tol`` and the last two
    distances do not increase. With ``relative`` the threshold is ``tol``
    times the sup norm of the last level.
    """
    levels = list(levels)
    if len(levels) < 2:
        raise ValidationError("need at least two levels", "levels")
    labels = list(range(len(levels))) if labels is None else list(labels)
    dists = [None] + [uniform_distance(a, b) for a, b in zip(levels, levels[1:])]
    tail = dists[1:]
    # rounding-level distances do not count as an increase
    slack = ROUNDING_SLACK * max(levels[-1].sup_norm(), 1.0)
    nonincreasing_tail = len(tail) < 2 or tail[-1] <= tail[-2] + slack
    monotone = all(b <= a + slack for a, b in zip(tail, tail[1:]))
    scale = levels[-1].sup_norm() if relative else 1.0
    tol_abs = tol * scale
    converged = (tail[-1] < tol_abs or tail[-1] == 0.0) and nonincreasing_tail
    return ConvergenceReport(
        labels=labels,
        counts=[lv.meta.get("N") for lv in levels],
        distances=dists,
        values_at_T=[np.array(lv.value_at_T) for lv in levels],
        tol=float(tol),
        relative=relative,
        tol_abs=float(tol_abs),
        nonincreasing_tail=bool(nonincreasing_tail),
        monotone=bool(monotone),
        converged=bool(converged),
        last=levels[-1],
    )
