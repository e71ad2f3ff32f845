"""
Iterative (recursive) regularized CPA

Observations are consumed one at a time. The gain matrix P(T) tracks
(lambda I + sum_t phi(t)^T phi(t))^-1 through the matrix inversion lemma, so
each step only factors an N x N matrix:

    y_hat   = phi(T) Theta(T-1)
    P(T)    = P(T-1) - P(T-1) phi^T (I_N + phi P(T-1) phi^T)^-1 phi P(T-1)
    Theta(T) = Theta(T-1) + P(T) phi^T (y(T) - y_hat)

Starting from Theta(0) = 0 and P(0) = I / lambda, Theta(T) equals the batch
regularized solution. Cost per step is O(M^2 N).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from src.algorithms.cpa_solver import DEFAULT_LAMBDA, PresenceVector, projection_matrix
from src.errors import ArgumentError, NumericalError
from src.simulation.dictionary import Dictionary
from src.simulation.signal_model import ObservationSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """Symmetric M x M gain P"""

    matrix: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class IcpaState:
    """Theta(T), P(T) and the number of observations T folded in so far"""

    theta: PresenceVector
    gain: GainMatrix
    steps_processed: int = 0

    def __post_init__(self):
        m = self.theta.n_atoms
        if self.gain.matrix.shape != (m, m):
            raise ArgumentError(f"Gain must be {m}x{m}, got {self.gain.matrix.shape}")
        if self.steps_processed < 0:
            raise ArgumentError("steps_processed must be >= 0")


def init_state(n_atoms: int, lam: float = DEFAULT_LAMBDA) -> IcpaState:
    """Theta = 0, P = I / lambda"""
    if not lam > 0:
        raise ArgumentError(f"Regularization constant must be > 0, got {lam}")
    if n_atoms < 1:
        raise ArgumentError(f"n_atoms must be >= 1, got {n_atoms}")
    return IcpaState(
        theta=PresenceVector(np.zeros(n_atoms)),
        gain=GainMatrix(np.eye(n_atoms) / lam),
        steps_processed=0,
    )


def step(state: IcpaState, dictionary: Dictionary, y_t: np.ndarray) -> IcpaState:
    """Fold one observation into the state; returns a new state"""
    if state.theta.n_atoms != dictionary.n_atoms:
        raise ArgumentError(
            f"State has {state.theta.n_atoms} atoms but the dictionary has {dictionary.n_atoms}"
        )
    phi = projection_matrix(dictionary, y_t).matrix
    y_t = np.asarray(y_t, dtype=np.float64).reshape(-1)

    p_prev = state.gain.matrix
    theta_prev = state.theta.theta

    p_phi_t = p_prev @ phi.T                                   # M x N
    innovation = phi @ p_phi_t                                 # N x N
    innovation[np.diag_indices_from(innovation)] += 1.0
    try:
        factor = linalg.cho_factor(innovation, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Innovation matrix is not positive definite: {exc}") from exc
    gain_rows = linalg.cho_solve(factor, p_phi_t.T, check_finite=False)   # N x M

    p_new = p_prev - p_phi_t @ gain_rows
    p_new = 0.5 * (p_new + p_new.T)

    error = y_t - phi @ theta_prev
    theta_new = theta_prev + p_new @ (phi.T @ error)

    return IcpaState(
        theta=PresenceVector(theta_new),
        gain=GainMatrix(p_new),
        steps_processed=state.steps_processed + 1,
    )


def run(dictionary: Dictionary, obs: ObservationSet, lam: float = DEFAULT_LAMBDA) -> PresenceVector:
    """Fold every observation from init_state and report Theta after the last one"""
    state = init_state(dictionary.n_atoms, lam)
    for y_t in obs:
        state = step(state, dictionary, y_t)
    logger.debug("iCPA processed %d observations (M=%d, lambda=%g)", state.steps_processed, dictionary.n_atoms, lam)
    return state.theta


class StreamingCpa:
    """
    Real-time wrapper around the recursion

    Keeps one IcpaState per stream; Theta can be read after any prefix of the
    observations.
    """

    def __init__(self, dictionary: Dictionary, lam: float = DEFAULT_LAMBDA,
                 state: Optional[IcpaState] = None):
        self.dictionary = dictionary
        self.lam = lam
        self.state = state if state is not None else init_state(dictionary.n_atoms, lam)

    @property
    def theta(self) -> np.ndarray:
        return self.state.theta.theta

    @property
    def steps_processed(self) -> int:
        return self.state.steps_processed

    def update(self, y_t: np.ndarray) -> np.ndarray:
        """Consume one observation and return the updated presence parameters"""
        self.state = step(self.state, self.dictionary, y_t)
        return self.theta

    def update_batch(self, obs: ObservationSet) -> np.ndarray:
        for y_t in obs:
            self.update(y_t)
        return self.theta

    def snapshot(self) -> IcpaState:
        """Current state (immutable, safe to keep)"""
        return self.state

    def reset(self):
        self.state = init_state(self.dictionary.n_atoms, self.lam)
