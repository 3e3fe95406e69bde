"""Fixed points, merit functions, ergodic averages, and rate diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import GossipMatrix
from .losses import centralized_solve

__all__ = [
    "ErgodicAverage",
    "FixedPoint",
    "MetricsError",
    "fixed_point",
    "linear_rate_fit",
    "merit_cvx",
    "merit_sc",
]


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class FixedPoint:
    """Consensual optimum: X* stacks x* on every row, Y* = -grad F(X*).

    The dual rows sum to ~0 across agents (x* zeroes the aggregate gradient),
    which places Y* in the range of I - W.
    """

    x_star: np.ndarray
    X_star: np.ndarray
    Y_star: np.ndarray


def fixed_point(family, tol: float = 1e-8) -> FixedPoint:
    """Centralized anchor for the merit functions; validates the dual row sums."""
    x_star = centralized_solve(family, tol=tol)
    X_star = np.tile(x_star, (family.m, 1))
    Y_star = -family.gradients(X_star)
    drift = float(np.linalg.norm(Y_star.sum(axis=0)))
    if drift > family.m * tol:
        raise MetricsError(f"fixed point inconsistent: ||sum of dual rows|| = {drift:.3e}")
    return FixedPoint(x_star=x_star, X_star=X_star, Y_star=Y_star)


def merit_sc(
    X: np.ndarray,
    Y: np.ndarray,
    theta_min_prev: float,
    fp: FixedPoint,
    M: np.ndarray,
) -> float:
    """Strongly convex merit: ||X - X*||^2 + theta^2 ||Y - Y*||^2_M.

    The dual difference is projected onto the complement of the all-ones
    direction before the M-form: M is indefinite along it, and the theory
    confines the duals to range(I - W). The quadratic forms are floored at
    zero against roundoff.
    """
    dX = X - fp.X_star
    dY = Y - fp.Y_star
    dY = dY - dY.mean(axis=0, keepdims=True)
    m_form = max(float(np.sum(dY * (M @ dY))), 0.0)
    return float(np.sum(dX * dX)) + theta_min_prev**2 * m_form


def merit_cvx(X: np.ndarray, fp: FixedPoint, family, gm: GossipMatrix, delta: float) -> float:
    """Convex merit: max of the consensus form and the Lagrangian gap.

    max( delta <(I-W) X, X>,  F(X) - F(X*) + <Y*, X> ) with unscaled
    F(X) = sum_i f_i(x_i); zero exactly at consensual optimal points.
    """
    IW = np.eye(gm.graph.m) - gm.W
    consensus = max(delta * float(np.sum(X * (IW @ X))), 0.0)
    gap = float(family.values(X).sum() - family.values(fp.X_star).sum() + np.sum(fp.Y_star * X))
    return max(consensus, gap)


class ErgodicAverage:
    """Running mean of the iterates X^1..X^k, updated in O(md) per step."""

    def __init__(self, shape: tuple[int, ...]):
        self._sum = np.zeros(shape)
        self.count = 0

    def update(self, X: np.ndarray) -> None:
        self._sum += X
        self.count += 1

    @property
    def value(self) -> np.ndarray:
        if self.count == 0:
            raise MetricsError("ergodic average of an empty sequence")
        return self._sum / self.count


def linear_rate_fit(ks, values) -> float:
    """Least-squares slope of log(V) over the last half of a trace.

    Rows with non-positive V are skipped; a clearly negative slope certifies
    geometric decay.
    """
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if ks.shape != values.shape or ks.ndim != 1:
        raise MetricsError("need matching 1-d iteration and merit arrays")
    start = len(ks) // 2
    ks, values = ks[start:], values[start:]
    keep = values > 0.0
    ks, values = ks[keep], values[keep]
    if len(ks) < 10:
        raise MetricsError(f"need at least 10 positive rows in the fit window, got {len(ks)}")
    return float(np.polyfit(ks, np.log(values), 1)[0])
