"""
Corrected Projections Algorithm (CPA), batch form

Every atom's rough contribution estimate A_i(t) = B_i . y(t) is corrected by a
time-invariant presence parameter theta_i. The projection matrix phi(t) has
column i equal to A_i(t) B_i, and the presence vector solves the least-squares
problem Y ~ Phi Theta over the stacked observations, optionally with an L2
penalty lambda |Theta|^2.

Phi^T Phi is never built from the stacked (T*N x M) Phi. Since
phi(t) = B diag(A(t)),

    Phi^T Phi = (B^T B) * (R^T R)      (elementwise product)
    Phi^T Y   = sum_t A(t)^2            (elementwise square)

where R is the T x M matrix of rough estimates.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from src.errors import ArgumentError, NumericalError, SingularityError, UnderdeterminedError
from src.simulation.dictionary import Dictionary
from src.simulation.signal_model import ObservationSet, stack_observations

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.4  # 1 / 2.5
RCOND_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """phi(t): N x M, column i is B_i weighted by its rough estimate B_i . y(t)"""

    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class PresenceVector:
    """Presence parameters Theta, one per dictionary atom"""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64, copy=True)
        if theta.ndim != 1:
            raise ArgumentError(f"Presence vector must be 1-D, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ArgumentError("Presence parameters must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def n_atoms(self) -> int:
        return self.theta.shape[0]


def _check_dims(dictionary: Dictionary, n_dims: int):
    if n_dims != dictionary.n_dims:
        raise ArgumentError(f"Observation dimension {n_dims} does not match dictionary n_dims {dictionary.n_dims}")


def _check_lambda(lam: float):
    if not lam > 0:
        raise ArgumentError(f"Regularization constant must be > 0, got {lam}")


def rough_estimates(dictionary: Dictionary, obs: ObservationSet) -> np.ndarray:
    """T x M matrix R with R[t, i] = B_i . y(t)"""
    _check_dims(dictionary, obs.n_dims)
    return obs.observations @ dictionary.atoms


def projection_matrix(dictionary: Dictionary, y_t: np.ndarray) -> ProjectionMatrix:
    """phi(t) for a single observation"""
    y_t = np.asarray(y_t, dtype=np.float64).reshape(-1)
    _check_dims(dictionary, y_t.shape[0])
    weights = dictionary.atoms.T @ y_t
    return ProjectionMatrix(dictionary.atoms * weights[np.newaxis, :])


def stack_projections(dictionary: Dictionary, obs: ObservationSet) -> np.ndarray:
    """Phi: phi(1) ... phi(T) stacked vertically into a T*N x M matrix"""
    if obs.n_steps == 0:
        raise ArgumentError("Cannot stack projections of an empty observation set")
    rough = rough_estimates(dictionary, obs)
    stacked = dictionary.atoms[np.newaxis, :, :] * rough[:, np.newaxis, :]
    return stacked.reshape(obs.n_steps * obs.n_dims, dictionary.n_atoms)


def normal_equations(dictionary: Dictionary, obs: ObservationSet):
    """Return (Phi^T Phi, Phi^T Y) accumulated over all time steps"""
    rough = rough_estimates(dictionary, obs)
    gram = (dictionary.atoms.T @ dictionary.atoms) * (rough.T @ rough)
    rhs = np.sum(rough * rough, axis=0)
    return gram, rhs


def _cholesky_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = linalg.cho_factor(matrix, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc
    return linalg.cho_solve(factor, rhs, check_finite=False)


def reciprocal_condition(matrix: np.ndarray) -> float:
    """lambda_min / lambda_max of a symmetric positive semidefinite matrix"""
    eigenvalues = linalg.eigvalsh(matrix, check_finite=False)
    top = eigenvalues[-1]
    if top <= 0:
        return 0.0
    return max(float(eigenvalues[0]), 0.0) / float(top)


def solve_cpa_batch(dictionary: Dictionary, obs: ObservationSet,
                    rcond_threshold: float = RCOND_THRESHOLD) -> PresenceVector:
    """Unregularized CPA: Theta = (Phi^T Phi)^-1 Phi^T Y"""
    if obs.n_steps == 0:
        raise ArgumentError("solve_cpa_batch needs at least one observation")
    n_equations = obs.n_steps * obs.n_dims
    if n_equations < dictionary.n_atoms:
        raise UnderdeterminedError(
            f"T*N = {n_equations} < M = {dictionary.n_atoms}: the batch system is underdetermined, "
            "use solve_cpa_regularized"
        )

    gram, rhs = normal_equations(dictionary, obs)
    rcond = reciprocal_condition(gram)
    if rcond < rcond_threshold:
        raise SingularityError(f"Phi^T Phi reciprocal condition {rcond:.3e} is below {rcond_threshold:.1e}")
    logger.debug("Batch CPA: M=%d, T*N=%d, rcond=%.3e", dictionary.n_atoms, n_equations, rcond)
    return PresenceVector(_cholesky_solve(gram, rhs))


def solve_cpa_regularized(dictionary: Dictionary, obs: ObservationSet,
                          lam: float = DEFAULT_LAMBDA) -> PresenceVector:
    """
    L2-regularized CPA: Theta = (Phi^T Phi + lambda I)^-1 Phi^T Y

    When T*N < M the same vector is obtained from the smaller system
    Theta = Phi^T (Phi Phi^T + lambda I)^-1 Y.
    """
    _check_lambda(lam)
    _check_dims(dictionary, obs.n_dims)
    n_atoms = dictionary.n_atoms
    if obs.n_steps == 0:
        return PresenceVector(np.zeros(n_atoms))

    n_equations = obs.n_steps * obs.n_dims
    if n_equations < n_atoms:
        phi = stack_projections(dictionary, obs)
        kernel = phi @ phi.T
        kernel[np.diag_indices_from(kernel)] += lam
        theta = phi.T @ _cholesky_solve(kernel, stack_observations(obs))
        logger.debug("Regularized CPA (dual, %d x %d system), lambda=%g", n_equations, n_equations, lam)
    else:
        gram, rhs = normal_equations(dictionary, obs)
        gram[np.diag_indices_from(gram)] += lam
        theta = _cholesky_solve(gram, rhs)
        logger.debug("Regularized CPA (primal, %d x %d system), lambda=%g", n_atoms, n_atoms, lam)
    return PresenceVector(theta)


def cpa_estimate(dictionary: Dictionary, obs: ObservationSet, presence: PresenceVector) -> ObservationSet:
    """y_hat(t) = phi(t) Theta = sum_i theta_i (B_i . y(t)) B_i"""
    if presence.n_atoms != dictionary.n_atoms:
        raise ArgumentError(f"Presence vector has {presence.n_atoms} entries, dictionary has {dictionary.n_atoms} atoms")
    rough = rough_estimates(dictionary, obs)
    return ObservationSet(obs.n_dims, (rough * presence.theta) @ dictionary.atoms.T)


def cpa_cost(dictionary: Dictionary, obs: ObservationSet, presence: PresenceVector, lam: float = 0.0) -> float:
    """sum_t |y(t) - y_hat(t)|^2 + lambda |Theta|^2"""
    estimate = cpa_estimate(dictionary, obs, presence)
    residual = obs.observations - estimate.observations
    return float(np.sum(residual * residual) + lam * np.dot(presence.theta, presence.theta))


def solve_ridge_amplitudes(dictionary: Dictionary, obs: ObservationSet, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """
    Ridge on the amplitudes themselves: A_hat(t) = (B^T B + lambda I)^-1 B^T y(t)

    Returned as a T x M matrix. Solved through the N x N system
    B^T (B B^T + lambda I)^-1 y(t), which gives the same rows.
    """
    _check_lambda(lam)
    _check_dims(dictionary, obs.n_dims)
    if obs.n_steps == 0:
        return np.zeros((0, dictionary.n_atoms))
    atoms = dictionary.atoms
    kernel = atoms @ atoms.T
    kernel[np.diag_indices_from(kernel)] += lam
    return (atoms.T @ _cholesky_solve(kernel, obs.observations.T)).T
