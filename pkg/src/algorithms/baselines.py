"""
Multiple-measurement-vector baselines: basic matching pursuit (M-BMP) and
regularized M-FOCUSS
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from src.errors import ArgumentError, NumericalError
from src.simulation.dictionary import Dictionary
from src.simulation.signal_model import ObservationSet

logger = logging.getLogger(__name__)

MBMP_MAX_ITERS = 200
MBMP_RELATIVE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class MmvCoefficients:
    """M x T estimated contributions; row i is atom i over time"""

    values: np.ndarray
    iterations: int = 0
    converged: bool = True

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MfocussParams:
    """Regularized M-FOCUSS hyperparameters"""

    lam: float = 1e-3
    p_norm: float = 0.8
    epsilon: float = 1e-8
    prune_gamma: float = 1e-4
    max_iters: int = 500

    def __post_init__(self):
        if not self.lam > 0:
            raise ArgumentError(f"M-FOCUSS lambda must be > 0, got {self.lam}")
        if not 0 < self.p_norm <= 1:
            raise ArgumentError(f"M-FOCUSS p_norm must be in (0, 1], got {self.p_norm}")
        if not self.epsilon > 0:
            raise ArgumentError(f"M-FOCUSS epsilon must be > 0, got {self.epsilon}")
        if not self.prune_gamma > 0:
            raise ArgumentError(f"M-FOCUSS prune_gamma must be > 0, got {self.prune_gamma}")
        if self.max_iters < 1:
            raise ArgumentError(f"M-FOCUSS max_iters must be >= 1, got {self.max_iters}")


def _signal_matrix(dictionary: Dictionary, obs: ObservationSet) -> np.ndarray:
    if obs.n_dims != dictionary.n_dims:
        raise ArgumentError(f"Observation dimension {obs.n_dims} does not match dictionary n_dims {dictionary.n_dims}")
    return obs.observations.T  # N x T


def solve_mbmp(dictionary: Dictionary, obs: ObservationSet, max_iters: int = MBMP_MAX_ITERS) -> MmvCoefficients:
    """
    Basic MMV matching pursuit

    Each iteration picks the atom whose correlations with the residual have the
    largest L2 norm over time (lowest index on ties), adds those correlations to
    its coefficients and removes its contribution from the residual. Atoms may
    be picked again; no orthogonal projection is done.
    """
    if max_iters < 1:
        raise ArgumentError(f"max_iters must be >= 1, got {max_iters}")
    signal = _signal_matrix(dictionary, obs)
    atoms = dictionary.atoms
    coefficients = np.zeros((dictionary.n_atoms, signal.shape[1]))

    signal_norm = np.linalg.norm(signal)
    if signal_norm == 0.0:
        return MmvCoefficients(coefficients, iterations=0, converged=True)

    residual = signal.copy()
    correlations = atoms.T @ residual  # M x T
    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        scores = np.einsum("ij,ij->i", correlations, correlations)
        best = int(np.argmax(scores))
        contribution = correlations[best].copy()
        coefficients[best] += contribution
        residual -= np.outer(atoms[:, best], contribution)
        correlations -= np.outer(atoms.T @ atoms[:, best], contribution)
        if np.linalg.norm(residual) <= MBMP_RELATIVE_TOLERANCE * signal_norm:
            converged = True
            break

    logger.debug("M-BMP stopped after %d iterations (converged=%s)", iteration, converged)
    return MmvCoefficients(coefficients, iterations=iteration, converged=converged)


def mfocuss_objective(dictionary: Dictionary, obs: ObservationSet, values: np.ndarray,
                      params: MfocussParams = MfocussParams()) -> float:
    """
    |Y - B X|_F^2 + (2 lambda / p) sum_i |x_i|^p

    The reweighted step with constant lambda minimizes a quadratic majorizer of
    this functional, so it does not increase from one iteration to the next.
    """
    signal = _signal_matrix(dictionary, obs)
    residual = signal - dictionary.atoms @ values
    row_norms = np.linalg.norm(values, axis=1)
    penalty = np.sum(row_norms ** params.p_norm)
    return float(np.sum(residual * residual) + (2.0 * params.lam / params.p_norm) * penalty)


def solve_mfocuss(dictionary: Dictionary, obs: ObservationSet, params: MfocussParams = MfocussParams(),
                  callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None) -> MmvCoefficients:
    """
    Regularized M-FOCUSS (iteratively reweighted least squares on row norms)

    With gamma_i = |x_i|^(2 - p) (the squared weight), each iteration solves

        X_active = Gamma B_a^T (B_a Gamma B_a^T + lambda I)^-1 Y

    over the active atoms, then prunes atoms whose gamma drops below
    prune_gamma. Pruned rows are exactly zero and never come back. Stops when
    |X - X_prev|_F / |X_prev|_F < epsilon; hitting max_iters returns the
    current iterate with converged=False.

    callback(iteration, X, active_indices) is called after every iteration.
    """
    signal = _signal_matrix(dictionary, obs)
    n_atoms = dictionary.n_atoms
    n_dims = dictionary.n_dims
    atoms = dictionary.atoms

    active = np.arange(n_atoms)
    gamma = np.ones(n_atoms)
    values = np.zeros((n_atoms, signal.shape[1]))
    converged = False
    iteration = 0

    for iteration in range(1, params.max_iters + 1):
        weighted = atoms[:, active] * gamma
        kernel = weighted @ atoms[:, active].T
        kernel[np.diag_indices(n_dims)] += params.lam
        try:
            factor = linalg.cho_factor(kernel, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"M-FOCUSS weighted system is not positive definite: {exc}") from exc
        active_values = weighted.T @ linalg.cho_solve(factor, signal, check_finite=False)

        new_values = np.zeros_like(values)
        new_values[active] = active_values
        previous_norm = np.linalg.norm(values)
        change = np.linalg.norm(new_values - values) / previous_norm if previous_norm > 0 else np.inf

        gamma_all = np.linalg.norm(active_values, axis=1) ** (2.0 - params.p_norm)
        keep = gamma_all >= params.prune_gamma
        if not np.all(keep):
            new_values[active[~keep]] = 0.0
            logger.debug("M-FOCUSS iteration %d pruned %d atoms", iteration, int(np.count_nonzero(~keep)))
        active = active[keep]
        gamma = gamma_all[keep]
        values = new_values

        if callback is not None:
            callback(iteration, values, active)

        if change < params.epsilon or active.size == 0:
            converged = True
            break

    if not converged:
        logger.debug("M-FOCUSS hit max_iters=%d without converging", params.max_iters)
    return MmvCoefficients(values, iterations=iteration, converged=converged)


def atom_scores(coefficients: MmvCoefficients) -> np.ndarray:
    """Per-atom score: L2 norm of the coefficient row over time"""
    return np.linalg.norm(coefficients.values, axis=1)
