"""Decentralized optimization over a locality-enforcing neighbor-exchange layer.

Three methods share the layer:

* ``AdaptiveAlgorithm`` - the fully decentralized adaptive primal-dual method:
  gossip on primal/dual rows, per-agent backtracked primal stepsizes merged by
  one-hop min-consensus, separately tracked consensual dual stepsizes, and an
  online doubling estimator of the effective graph diameter.
* ``BaselineAlgorithm`` - the prior adaptive scheme with a single stepsize
  diagonal, in ``global`` (network-wide min, charged a flood) or ``local``
  (one-hop min) synchronization mode.
* ``ExtraAlgorithm`` - EXTRA with a fixed, externally tuned stepsize.

All exchanges cross graph edges; the layer counts vector gossip rounds and
scalar consensus rounds separately and can record every message for audits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backtracking import backtrack_batch
from .graphs import Graph, GossipMatrix, diameter

__all__ = [
    "AdaptiveAlgorithm",
    "AdaptiveState",
    "BaselineAlgorithm",
    "BaselineState",
    "DivergenceError",
    "ExtraAlgorithm",
    "GammaSchedule",
    "LocalityError",
    "NeighborExchange",
    "adaptive_step",
    "baseline_adaptive_step",
    "gamma_schedule",
    "local_max_consensus",
    "local_min_consensus",
    "safeguard_update",
]

# Iterates larger than this abort the run: the stepsize is unstable.
DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    """Iterate norm exploded; for EXTRA this signals alpha is too large."""


class LocalityError(RuntimeError):
    """A payload would cross a non-edge of the communication graph."""


def local_min_consensus(v: np.ndarray, g: Graph) -> np.ndarray:
    """One round of neighborhood minima: out_i = min_{j in N_i} v_j."""
    v = np.asarray(v)
    return np.array([v.take(nbrs).min() for nbrs in g.neighbors])


def local_max_consensus(v: np.ndarray, g: Graph) -> np.ndarray:
    """One round of neighborhood maxima: out_i = max_{j in N_i} v_j."""
    v = np.asarray(v)
    return np.array([v.take(nbrs).max() for nbrs in g.neighbors])


def gamma_schedule(k: int, beta1: float = 2.0, beta2: float = 1.0) -> float:
    """Growth factor ((k + beta1)/(k + 1))**beta2; decays to 1 from beta1**beta2."""
    if beta1 < 1.0 or beta2 <= 0.0:
        raise ValueError(f"need beta1 >= 1 and beta2 > 0, got {(beta1, beta2)}")
    return float(((k + beta1) / (k + 1.0)) ** beta2)


@dataclass(frozen=True)
class GammaSchedule:
    beta1: float = 2.0
    beta2: float = 1.0

    def __post_init__(self):
        gamma_schedule(0, self.beta1, self.beta2)  # validate parameters

    def __call__(self, k: int) -> float:
        return gamma_schedule(k, self.beta1, self.beta2)


class NeighborExchange:
    """Locality-enforcing message layer with communication accounting.

    ``gossip_rows`` multiplies by W and charges one vector round (one
    d-dimensional payload per edge direction plus self-loops);
    ``neighbor_min``/``neighbor_max`` charge one scalar round unless they
    piggyback on an exchange already charged this iteration. With
    ``record=True`` every (sender, receiver, scalars) triple is kept.
    """

    def __init__(self, gm: GossipMatrix, record: bool = False):
        off_pattern = gm.W.copy()
        np.fill_diagonal(off_pattern, 0.0)
        off_pattern[gm.graph.adjacency() != 0.0] = 0.0
        if np.any(off_pattern != 0.0):
            raise LocalityError("gossip matrix has weight on a non-edge")
        self.graph = gm.graph
        self.W = gm.W
        self.vector_rounds = 0
        self.scalar_rounds = 0
        self.messages: list[tuple[int, int, int]] | None = [] if record else None

    def _log_round(self, payload: int) -> None:
        if self.messages is None:
            return
        for i in range(self.graph.m):
            for j in self.graph.neighbors[i]:
                self.messages.append((j, i, payload))

    def gossip_rows(self, V: np.ndarray) -> np.ndarray:
        self.vector_rounds += 1
        self._log_round(V.shape[1])
        return self.W @ V

    def neighbor_min(self, v: np.ndarray, charge: bool = True) -> np.ndarray:
        if charge:
            self.scalar_rounds += 1
            self._log_round(1)
        return local_min_consensus(v, self.graph)

    def neighbor_max(self, v: np.ndarray, charge: bool = True) -> np.ndarray:
        if charge:
            self.scalar_rounds += 1
            self._log_round(1)
        return local_max_consensus(v, self.graph)

    def charge_flood(self) -> None:
        """Cost of one network-wide min: diameter-many scalar rounds."""
        for _ in range(self._diameter()):
            self.scalar_rounds += 1
            self._log_round(1)

    def _diameter(self) -> int:
        if not hasattr(self, "_diam_cache"):
            self._diam_cache = diameter(self.graph)
        return self._diam_cache

    def audit_locality(self) -> None:
        """Hard check that every recorded message crossed an edge or self-loop."""
        if self.messages is None:
            raise LocalityError("exchange was not recording messages")
        for src, dst, _ in self.messages:
            if src != dst and (min(src, dst), max(src, dst)) not in self.graph.edges:
                raise LocalityError(f"message {src}->{dst} crosses a non-edge")


@dataclass
class AdaptiveState:
    """Full per-iteration state of the adaptive primal-dual method.

    ``theta``, ``theta_tracker`` and ``pi`` hold the values produced by the
    previous iteration (the -1 initializations before the first step).
    ``diam`` is each agent's current effective-diameter estimate, ``bounded``
    the safeguard bits, and ``double_count`` accumulates per-agent doubling
    events of the estimator.
    """

    X: np.ndarray
    Y: np.ndarray
    theta: np.ndarray
    theta_tracker: np.ndarray
    pi: np.ndarray
    diam: np.ndarray
    bounded: np.ndarray
    k: int = 0
    X0: np.ndarray | None = None
    Y0: np.ndarray | None = None
    double_count: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def initial(cls, X0: np.ndarray, theta0: float = 1.0, d0: int = 1) -> "AdaptiveState":
        X0 = np.asarray(X0, dtype=float)
        m = X0.shape[0]
        if theta0 <= 0.0 or d0 < 1:
            raise ValueError(f"need theta0 > 0 and d0 >= 1, got {(theta0, d0)}")
        return cls(
            X=X0.copy(),
            Y=np.zeros_like(X0),
            theta=np.full(m, float(theta0)),
            theta_tracker=np.full(m, float(theta0)),
            pi=np.full(m, float(theta0)),
            diam=np.full(m, int(d0), dtype=int),
            bounded=np.ones(m, dtype=int),
            k=0,
            X0=X0.copy(),
            Y0=np.zeros_like(X0),
            double_count=np.zeros(m, dtype=int),
        )


def safeguard_update(state: AdaptiveState, exchange: NeighborExchange, radius: float) -> np.ndarray:
    """Boundedness bits: 0 once the iterate leaves the radius, min-spread after.

    An agent whose primal drift, or dual drift scaled by its stepsize, reaches
    the radius sets its bit to zero; everyone else takes the neighborhood
    minimum of the previous bits, so zeros are absorbing and spread one hop
    per iteration.
    """
    drift_x = np.linalg.norm(state.X - state.X0, axis=1)
    drift_y = state.theta * np.linalg.norm(state.Y - state.Y0, axis=1)
    outside = np.maximum(drift_x, drift_y) >= radius
    return np.where(outside, 0, exchange.neighbor_min(state.bounded))


def adaptive_step(
    state: AdaptiveState,
    exchange: NeighborExchange,
    family,
    gamma_prev: float,
    delta: float,
    safeguard_radius: float | None = None,
    force_theta: float | None = None,
    global_uniform: bool = False,
) -> AdaptiveState:
    """Advance the adaptive method by one synchronous iteration (in place).

    ``gamma_prev`` is the growth factor paired with this iteration's
    backtracking; the stepsize trackers grow by the same factor so that the
    network-min stepsize is recovered exactly over quiet windows.
    ``force_theta`` bypasses the stepsize machinery with a uniform constant;
    ``global_uniform`` replaces the one-hop minima with the network-wide min
    (oracle used by equivalence tests).
    """
    k = state.k

    gamma_bt: float | np.ndarray = gamma_prev
    if safeguard_radius is not None:
        h_prev = state.bounded.copy()
        state.bounded = safeguard_update(state, exchange, safeguard_radius)
        # 1 + h*(gamma-1), written so the h=1 branch is bit-exact gamma
        gamma_bt = np.where(h_prev == 1, gamma_prev, 1.0)

    # gossip the primal rows, then the gradient-tracking dual rows
    X_half = exchange.gossip_rows(state.X)
    G_half = family.gradients(X_half)
    Y_half = exchange.gossip_rows(state.Y + G_half)

    if force_theta is None:
        # per-agent line search along the negated dual direction, then a
        # one-hop min merges the trial stepsizes
        theta_bar, _ = backtrack_batch(state.theta, family, X_half, -Y_half, gamma_bt, delta)
        if global_uniform:
            exchange.charge_flood()
            theta_new = np.full(state.X.shape[0], theta_bar.min())
            tracker_new = theta_new.copy()
            pi_new = theta_new.copy()
            diam_new = state.diam
        else:
            theta_new = exchange.neighbor_min(theta_bar)

            # tracker: reseed from the fresh stepsizes every d_i-th iteration,
            # otherwise keep a gamma-grown neighborhood minimum; the paired
            # values travel in one scalar round
            grown = gamma_prev * state.theta_tracker
            reseed = (k % state.diam) == (1 % state.diam)
            reseed_min = exchange.neighbor_min(theta_new)
            grown_min = exchange.neighbor_min(grown, charge=False)
            tracker_new = np.where(reseed, reseed_min, grown_min)

            # dual stepsizes adopt the tracker at horizon multiples and grow
            # by the same factor in between
            at_horizon = (k % state.diam) == 0
            pi_new = np.where(at_horizon, tracker_new, gamma_prev * state.pi)

            # diameter estimate: if the tracker is not locally consensual at a
            # horizon multiple, the horizon was too short - double it; either
            # way sync estimates by a one-hop max
            tracker_min = exchange.neighbor_min(tracker_new, charge=False)
            failed = at_horizon & (tracker_new != tracker_min)
            d_max = exchange.neighbor_max(state.diam)
            diam_new = np.where(failed, 2 * d_max, d_max)
            state.double_count += failed
    else:
        m = state.X.shape[0]
        theta_new = np.full(m, float(force_theta))
        tracker_new = state.theta_tracker
        pi_new = np.full(m, float(force_theta))
        diam_new = state.diam

    # primal descent plus the dual correction built from the pi-scaled gossip;
    # the scaled difference is grouped first so its large terms cancel cleanly
    X_new = X_half - theta_new[:, None] * Y_half
    X_scaled = state.X / pi_new[:, None]
    Y_new = Y_half + (X_scaled - exchange.gossip_rows(X_scaled)) - G_half

    if not np.isfinite(X_new).all() or np.linalg.norm(X_new) > DIVERGENCE_NORM:
        raise DivergenceError(f"adaptive iterate diverged at k={k}")

    state.X = X_new
    state.Y = Y_new
    state.theta = theta_new
    state.theta_tracker = tracker_new
    state.pi = pi_new
    state.diam = diam_new
    state.k = k + 1
    return state


@dataclass
class BaselineState:
    """Iterate and single stepsize diagonal of the prior adaptive scheme."""

    X: np.ndarray
    Y: np.ndarray
    theta: np.ndarray
    k: int = 0

    @classmethod
    def initial(cls, X0: np.ndarray, theta0: float = 1.0) -> "BaselineState":
        X0 = np.asarray(X0, dtype=float)
        return cls(X=X0.copy(), Y=np.zeros_like(X0), theta=np.full(X0.shape[0], float(theta0)))


def baseline_adaptive_step(
    state: BaselineState,
    exchange: NeighborExchange,
    family,
    gamma_prev: float,
    delta: float,
    mode: str,
    force_theta: float | None = None,
) -> BaselineState:
    """One iteration of the prior adaptive scheme with the chosen consensus.

    ``global`` mode takes the true network-wide minimum of the trial
    stepsizes (simulated as an oracle, charged as a diameter-long flood of
    scalar rounds); ``local`` takes the one-hop minimum.
    """
    if mode not in ("global", "local"):
        raise ValueError(f"mode must be 'global' or 'local', got {mode!r}")
    X_half = exchange.gossip_rows(state.X)
    G_half = family.gradients(X_half)
    Y_half = exchange.gossip_rows(state.Y + G_half)

    if force_theta is None:
        theta_bar, _ = backtrack_batch(state.theta, family, X_half, -Y_half, gamma_prev, delta)
        if mode == "global":
            exchange.charge_flood()
            theta_new = np.full(state.X.shape[0], theta_bar.min())
        else:
            theta_new = exchange.neighbor_min(theta_bar)
    else:
        theta_new = np.full(state.X.shape[0], float(force_theta))

    X_new = X_half - theta_new[:, None] * Y_half
    X_scaled = state.X / theta_new[:, None]
    Y_new = Y_half + (X_scaled - exchange.gossip_rows(X_scaled)) - G_half

    if not np.isfinite(X_new).all() or np.linalg.norm(X_new) > DIVERGENCE_NORM:
        raise DivergenceError(f"baseline iterate diverged at k={state.k}")

    state.X = X_new
    state.Y = Y_new
    state.theta = theta_new
    state.k += 1
    return state


def _as_gamma_fn(gamma):
    if callable(gamma):
        return gamma
    value = float(gamma)
    if value < 1.0:
        raise ValueError(f"constant gamma must be >= 1, got {value}")
    return lambda k: value


class AdaptiveAlgorithm:
    """Driver owning the state, exchange, and gamma schedule of one run."""

    name = "adaptive"

    def __init__(
        self,
        gm: GossipMatrix,
        family,
        X0: np.ndarray,
        delta: float = 1.0,
        theta0: float = 1.0,
        d0: int = 1,
        gamma=GammaSchedule(),
        safeguard_radius: float | None = None,
        record: bool = False,
        global_uniform: bool = False,
    ):
        if not (0.0 < delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        self.exchange = NeighborExchange(gm, record=record)
        self.family = family
        self.state = AdaptiveState.initial(X0, theta0=theta0, d0=d0)
        self.delta = delta
        self.gamma = _as_gamma_fn(gamma)
        self.safeguard_radius = safeguard_radius
        self.global_uniform = global_uniform

    def _gamma_prev(self) -> float:
        # iteration k pairs with the k-1 growth factor; clamp the undefined
        # k=-1 slot to the schedule's first value
        return self.gamma(max(self.state.k - 1, 0))

    def step(self) -> None:
        adaptive_step(
            self.state,
            self.exchange,
            self.family,
            self._gamma_prev(),
            self.delta,
            safeguard_radius=self.safeguard_radius,
            global_uniform=self.global_uniform,
        )

    @property
    def X(self) -> np.ndarray:
        return self.state.X

    @property
    def Y(self) -> np.ndarray:
        return self.state.Y

    def stats(self) -> dict:
        s = self.state
        return {
            "theta_min": float(s.theta.min()),
            "theta_max": float(s.theta.max()),
            "pi_min": float(s.pi.min()),
            "pi_max": float(s.pi.max()),
            "d_max": int(s.diam.max()),
        }


class BaselineAlgorithm:
    """Driver for the prior adaptive scheme (global or local min-consensus)."""

    def __init__(
        self,
        gm: GossipMatrix,
        family,
        X0: np.ndarray,
        mode: str,
        delta: float = 1.0,
        theta0: float = 1.0,
        gamma=GammaSchedule(),
        record: bool = False,
    ):
        if not (0.0 < delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        if mode not in ("global", "local"):
            raise ValueError(f"mode must be 'global' or 'local', got {mode!r}")
        self.exchange = NeighborExchange(gm, record=record)
        self.family = family
        self.state = BaselineState.initial(X0, theta0=theta0)
        self.mode = mode
        self.delta = delta
        self.gamma = _as_gamma_fn(gamma)
        self.name = f"nips_{mode}"

    def _gamma_prev(self) -> float:
        return self.gamma(max(self.state.k - 1, 0))

    def step(self) -> None:
        baseline_adaptive_step(
            self.state, self.exchange, self.family, self._gamma_prev(), self.delta, self.mode
        )

    @property
    def X(self) -> np.ndarray:
        return self.state.X

    @property
    def Y(self) -> np.ndarray:
        return self.state.Y

    def stats(self) -> dict:
        s = self.state
        return {
            "theta_min": float(s.theta.min()),
            "theta_max": float(s.theta.max()),
            "pi_min": None,
            "pi_max": None,
            "d_max": None,
        }


class ExtraAlgorithm:
    """EXTRA with a fixed stepsize; one gossip round per iteration.

    First step: X^1 = W X^0 - alpha grad F(X^0). After that
    X^{k+2} = (I+W) X^{k+1} - (I+W)/2 X^k - alpha (grad F(X^{k+1}) - grad F(X^k)),
    with the previous gossip product cached so each iteration costs a single
    vector round.
    """

    name = "extra"

    def __init__(self, gm: GossipMatrix, family, X0: np.ndarray, alpha: float, record: bool = False):
        if alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.exchange = NeighborExchange(gm, record=record)
        self.family = family
        self.alpha = float(alpha)
        self.X = np.asarray(X0, dtype=float).copy()
        self.k = 0
        self._X_prev: np.ndarray | None = None
        self._WX_prev: np.ndarray | None = None
        self._G_prev: np.ndarray | None = None

    @property
    def Y(self) -> None:
        return None

    def step(self) -> None:
        WX = self.exchange.gossip_rows(self.X)
        G = self.family.gradients(self.X)
        if self.k == 0:
            X_new = WX - self.alpha * G
        else:
            X_new = (
                self.X
                + WX
                - 0.5 * (self._X_prev + self._WX_prev)
                - self.alpha * (G - self._G_prev)
            )
        if not np.isfinite(X_new).all() or np.linalg.norm(X_new) > DIVERGENCE_NORM:
            raise DivergenceError(f"EXTRA diverged at k={self.k} (alpha={self.alpha})")
        self._X_prev = self.X
        self._WX_prev = WX
        self._G_prev = G
        self.X = X_new
        self.k += 1

    def stats(self) -> dict:
        return {
            "theta_min": self.alpha,
            "theta_max": self.alpha,
            "pi_min": None,
            "pi_max": None,
            "d_max": None,
        }
