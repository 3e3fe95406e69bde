"""Per-agent differentiable losses, data generation, and the exact-solution oracle.

Losses are held in "stacked" form: the m agents' variables are the rows of an
(m, d) matrix X, and ``gradients(X)`` stacks the per-agent gradients row-wise
with no 1/m scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

__all__ = [
    "LossError",
    "QuadraticFamily",
    "LogisticFamily",
    "AgentLoss",
    "generate_quadratic",
    "parse_libsvm",
    "partition_logistic",
    "centralized_solve",
    "quadratic_condition_numbers",
]


class LossError(ValueError):
    """Malformed loss data, dimension mismatch, or oracle failure."""


@dataclass(frozen=True)
class AgentLoss:
    """Single agent's loss as a (value, gradient) handle for line searches."""

    family: "QuadraticFamily | LogisticFamily"
    agent: int

    def value(self, x: np.ndarray) -> float:
        return self.family.value(self.agent, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.family.gradient(self.agent, x)


class _FamilyBase:
    m: int
    dim: int

    def _check_vector(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise LossError(f"expected vector of dimension {self.dim}, got shape {x.shape}")
        return x

    def _check_stack(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != (self.m, self.dim):
            raise LossError(f"expected stacked iterate {(self.m, self.dim)}, got {X.shape}")
        return X

    def agent_loss(self, i: int) -> AgentLoss:
        return AgentLoss(self, i)

    def total_value(self, x: np.ndarray) -> float:
        X = np.broadcast_to(x, (self.m, self.dim))
        return float(self.values(X).sum())

    def total_gradient(self, x: np.ndarray) -> np.ndarray:
        X = np.broadcast_to(x, (self.m, self.dim))
        return self.gradients(X).sum(axis=0)


class QuadraticFamily(_FamilyBase):
    """f_i(x) = ||A_i x - b_i||^2 + (ridge/2) ||x||^2 per agent."""

    def __init__(self, A: np.ndarray, b: np.ndarray, ridge: float = 0.0):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 3 or b.shape != A.shape[:2]:
            raise LossError(f"need A of shape (m, h, n) and matching b, got {A.shape}, {b.shape}")
        if ridge < 0.0:
            raise LossError(f"ridge coefficient must be >= 0, got {ridge}")
        self.A = A
        self.b = b
        self.ridge = float(ridge)
        self.m = A.shape[0]
        self.dim = A.shape[2]

    def value(self, i: int, x: np.ndarray) -> float:
        x = self._check_vector(x)
        r = self.A[i] @ x - self.b[i]
        return float(r @ r + 0.5 * self.ridge * (x @ x))

    def gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        x = self._check_vector(x)
        return 2.0 * (self.A[i].T @ (self.A[i] @ x - self.b[i])) + self.ridge * x

    def values(self, X: np.ndarray) -> np.ndarray:
        X = self._check_stack(X)
        r = np.einsum("ahn,an->ah", self.A, X) - self.b
        return np.einsum("ah,ah->a", r, r) + 0.5 * self.ridge * np.einsum("an,an->a", X, X)

    def gradients(self, X: np.ndarray) -> np.ndarray:
        X = self._check_stack(X)
        r = np.einsum("ahn,an->ah", self.A, X) - self.b
        return 2.0 * np.einsum("ah,ahn->an", r, self.A) + self.ridge * X


class LogisticFamily(_FamilyBase):
    """f_i(x) = (1/h_i) sum_j log(1 + exp(-b_ij <x, a_ij>)) per agent."""

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 3 or labels.shape != features.shape[:2]:
            raise LossError(
                f"need features (m, h, d) and matching labels, got {features.shape}, {labels.shape}"
            )
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise LossError("labels must be -1 or +1")
        self.features = features
        self.labels = labels
        self.m = features.shape[0]
        self.dim = features.shape[2]
        self._h = features.shape[1]

    def value(self, i: int, x: np.ndarray) -> float:
        x = self._check_vector(x)
        z = self.labels[i] * (self.features[i] @ x)
        return float(np.logaddexp(0.0, -z).mean())

    def gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        x = self._check_vector(x)
        z = self.labels[i] * (self.features[i] @ x)
        w = self.labels[i] * expit(-z)
        return -(self.features[i].T @ w) / self._h

    def values(self, X: np.ndarray) -> np.ndarray:
        X = self._check_stack(X)
        z = self.labels * np.einsum("ahd,ad->ah", self.features, X)
        return np.logaddexp(0.0, -z).mean(axis=1)

    def gradients(self, X: np.ndarray) -> np.ndarray:
        X = self._check_stack(X)
        z = self.labels * np.einsum("ahd,ad->ah", self.features, X)
        w = self.labels * expit(-z)
        return -np.einsum("ah,ahd->ad", w, self.features) / self._h


def generate_quadratic(m: int, h: int, n: int, ridge: float, seed: int) -> QuadraticFamily:
    """Standard-normal A_i and b_i, independent across agents, seeded."""
    if min(m, h, n) < 1:
        raise LossError(f"m, h, n must be >= 1, got {(m, h, n)}")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, h, n))
    b = rng.standard_normal((m, h))
    return QuadraticFamily(A, b, ridge)


def parse_libsvm(path) -> tuple[np.ndarray, np.ndarray, int]:
    """Read a libsvm text file: ``<label> <idx>:<val> ...`` with 1-based indices.

    Returns (labels in {-1,+1}, dense feature rows, feature count). Rows are
    densified to the maximum index seen anywhere in the file.
    """
    labels: list[float] = []
    rows: list[dict[int, float]] = []
    n_features = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                raw = float(tokens[0])
                entries = {}
                for tok in tokens[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError(f"index {idx} is not 1-based")
                    entries[idx] = float(val_s)
            except ValueError as exc:
                raise LossError(f"{path}: malformed libsvm line {lineno}: {exc}") from exc
            labels.append(1.0 if raw > 0 else -1.0)
            rows.append(entries)
            if entries:
                n_features = max(n_features, max(entries))
    if not rows:
        raise LossError(f"{path}: empty libsvm file")
    features = np.zeros((len(rows), n_features))
    for r, entries in enumerate(rows):
        for idx, val in entries.items():
            features[r, idx - 1] = val
    return np.array(labels), features, n_features


def partition_logistic(
    labels: np.ndarray, features: np.ndarray, m: int, samples_per_agent: int, seed: int
) -> LogisticFamily:
    """Seeded shuffle, then contiguous equal blocks per agent; leftovers dropped."""
    n = len(labels)
    need = m * samples_per_agent
    if need > n:
        raise LossError(f"need {need} samples for m={m}, h={samples_per_agent}; have {n}")
    order = np.random.default_rng(seed).permutation(n)[:need]
    shape = (m, samples_per_agent)
    return LogisticFamily(features[order].reshape(*shape, -1), labels[order].reshape(shape))


def centralized_solve(family, tol: float = 1e-8, max_iter: int = 50_000) -> np.ndarray:
    """Exact-solution oracle: x with || sum_i grad f_i(x) || <= tol.

    Quadratics go through the (pseudo)solved normal equations with one
    refinement pass; rank-deficient sums yield the minimum-norm solution.
    Logistic losses are minimized numerically and the gradient-norm contract
    is verified before returning.
    """
    if tol <= 0.0:
        raise LossError(f"tolerance must be positive, got {tol}")
    if isinstance(family, QuadraticFamily):
        H = 2.0 * np.einsum("ahn,ahk->nk", family.A, family.A)
        H += family.m * family.ridge * np.eye(family.dim)
        rhs = 2.0 * np.einsum("ahn,ah->n", family.A, family.b)
        x = np.linalg.lstsq(H, rhs, rcond=None)[0]
        x += np.linalg.lstsq(H, rhs - H @ x, rcond=None)[0]
    elif isinstance(family, LogisticFamily):
        res = minimize(
            family.total_value,
            np.zeros(family.dim),
            jac=family.total_gradient,
            method="L-BFGS-B",
            options={"maxiter": max_iter, "gtol": tol / (10.0 * np.sqrt(family.dim)), "ftol": 0.0},
        )
        x = _newton_polish(family, res.x, tol)
    else:
        raise LossError(f"no centralized oracle for {type(family).__name__}")
    residual = float(np.linalg.norm(family.total_gradient(x)))
    if residual > tol:
        raise LossError(f"centralized oracle stalled: ||sum grad|| = {residual:.3e} > tol {tol:.1e}")
    return x


def _newton_polish(family: LogisticFamily, x: np.ndarray, tol: float, rounds: int = 30) -> np.ndarray:
    """Damped Newton steps driving the aggregate gradient to tolerance."""
    for _ in range(rounds):
        g = family.total_gradient(x)
        if np.linalg.norm(g) <= 0.1 * tol:
            break
        z = family.labels * np.einsum("ahd,ad->ah", family.features, np.broadcast_to(x, (family.m, family.dim)))
        s = expit(z) * expit(-z) / family._h
        H = np.einsum("ah,ahd,ahe->de", s, family.features, family.features)
        H += 1e-12 * np.eye(family.dim)
        step = np.linalg.solve(H, g)
        t, f0 = 1.0, family.total_value(x)
        while t > 1e-12 and family.total_value(x - t * step) > f0:
            t *= 0.5
        x = x - t * step
    return x


def quadratic_condition_numbers(family: QuadraticFamily) -> np.ndarray:
    """Per-agent condition numbers of the Hessians 2 A_i^T A_i + ridge I."""
    out = np.empty(family.m)
    for i in range(family.m):
        ev = np.linalg.eigvalsh(2.0 * family.A[i].T @ family.A[i] + family.ridge * np.eye(family.dim))
        out[i] = np.inf if ev[0] <= 0.0 else ev[-1] / ev[0]
    return out
