"""
Random overcomplete dictionaries: generation, inner products, coherence and
the dimension bounds that go with them
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.errors import ArgumentError, DegeneracyError
from src.simulation.random_streams import Stream, make_rng

logger = logging.getLogger(__name__)

UNIT_NORM_TOLERANCE = 1e-12
DEPENDENCE_TOLERANCE = 1e-10

# Columns of the Gram matrix evaluated per block by mutual_coherence
_COHERENCE_BLOCK = 512


@dataclass(frozen=True, eq=False)
class Dictionary:
    """N x M matrix of unit-norm atoms; column i is atom B_i"""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64, copy=True)
        if atoms.ndim != 2:
            raise ArgumentError(f"Dictionary atoms must be a 2-D matrix, got shape {atoms.shape}")
        if atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise ArgumentError(f"Dictionary needs n_dims >= 1 and n_atoms >= 1, got {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise ArgumentError("Dictionary atoms must be finite")
        norms = np.linalg.norm(atoms, axis=0)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > UNIT_NORM_TOLERANCE:
            raise ArgumentError(f"Dictionary atoms must have unit L2 norm (worst deviation {worst:.3e})")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n_dims(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    def atom(self, index: int) -> np.ndarray:
        """Return atom B_index (read-only view)"""
        _check_index(self, index)
        return self.atoms[:, index]


@dataclass(frozen=True)
class CoherenceReport:
    """Mutual coherence u and the atom pair that attains it"""

    coherence: float
    argmax_pair: Tuple[int, int]


def _check_index(dictionary: Dictionary, index: int):
    if not 0 <= index < dictionary.n_atoms:
        raise ArgumentError(f"Atom index {index} out of range [0, {dictionary.n_atoms})")


def draw_unit_atoms(rng: np.random.Generator, n_dims: int, count: int) -> np.ndarray:
    """
    Draw `count` i.i.d. standard normal N-vectors and normalize each to unit norm

    A column whose draw has zero norm is drawn again.
    """
    atoms = rng.standard_normal((n_dims, count))
    norms = np.linalg.norm(atoms, axis=0)
    zero = norms == 0.0
    while np.any(zero):
        atoms[:, zero] = rng.standard_normal((n_dims, int(np.count_nonzero(zero))))
        norms = np.linalg.norm(atoms, axis=0)
        zero = norms == 0.0
    return atoms / norms


def generate_dictionary(n_dims: int, n_atoms: int, seed: int) -> Dictionary:
    """Random Gaussian dictionary with unit-norm columns, deterministic given seed"""
    if n_dims < 1 or n_atoms < 1:
        raise ArgumentError(f"Dictionary needs n_dims >= 1 and n_atoms >= 1, got ({n_dims}, {n_atoms})")
    rng = make_rng(seed, Stream.DICTIONARY)
    atoms = draw_unit_atoms(rng, n_dims, n_atoms)
    logger.debug("Generated %dx%d dictionary (seed=%d)", n_dims, n_atoms, seed)
    return Dictionary(atoms)


def atom_inner(dictionary: Dictionary, i: int, j: int) -> float:
    """Scalar product c_{i,j} = B_i . B_j"""
    _check_index(dictionary, i)
    _check_index(dictionary, j)
    # Same operand order either way round so the result is exactly symmetric
    lo, hi = (i, j) if i <= j else (j, i)
    return float(np.dot(dictionary.atoms[:, lo], dictionary.atoms[:, hi]))


def mutual_coherence(dictionary: Dictionary) -> CoherenceReport:
    """
    Largest absolute off-diagonal Gram entry

    The Gram matrix is evaluated in column blocks so the full M x M matrix is
    never held in memory.
    """
    n_atoms = dictionary.n_atoms
    if n_atoms < 2:
        raise ArgumentError("Mutual coherence needs at least 2 atoms")

    atoms = dictionary.atoms
    best = -1.0
    best_pair = (0, 1)
    for start in range(0, n_atoms, _COHERENCE_BLOCK):
        stop = min(start + _COHERENCE_BLOCK, n_atoms)
        block = np.abs(atoms[:, start:stop].T @ atoms)
        rows = np.arange(stop - start)
        block[rows, start + rows] = -1.0  # mask the diagonal
        flat = int(np.argmax(block))
        r, c = divmod(flat, n_atoms)
        if block[r, c] > best:
            best = float(block[r, c])
            i, j = start + r, c
            best_pair = (min(i, j), max(i, j))

    return CoherenceReport(coherence=min(best, 1.0), argmax_pair=best_pair)


def asymptotic_coherence(n_dims: int, n_atoms: float) -> float:
    """Large-N coherence of a random Gaussian dictionary: 2 * sqrt(ln M / N)"""
    if n_dims < 1 or n_atoms < 2:
        raise ArgumentError("asymptotic_coherence needs n_dims >= 1 and n_atoms >= 2")
    return 2.0 * math.sqrt(math.log(n_atoms) / n_dims)


def coherence_condition(k: int, coherence: float) -> bool:
    """k * u < 1: active presence parameters dominate every inactive one"""
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    return k * coherence < 1.0


def cpa_dimension_bound(k: int, n_atoms: float) -> float:
    """Dimensions needed by regularized CPA: 4 k^2 ln M"""
    if k < 1 or n_atoms < 2:
        raise ArgumentError(f"cpa_dimension_bound needs k >= 1 and n_atoms >= 2, got ({k}, {n_atoms})")
    return 4.0 * k * k * math.log(n_atoms)


def rip_dimension_bound(k: int, n_atoms: float) -> float:
    """Restricted-isometry dimension bound: k ln(M / k)"""
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if k > n_atoms:
        raise ArgumentError(f"k ({k}) cannot exceed n_atoms ({n_atoms})")
    return k * math.log(n_atoms / k)


def orthogonalize_subset(dictionary: Dictionary, indices: Sequence[int]) -> Dictionary:
    """
    Copy of the dictionary with the selected atoms replaced by an orthonormal
    basis of their span

    Uses modified Gram-Schmidt with one re-orthogonalization pass, in the
    order given. Unselected atoms are untouched.
    """
    indices = [int(i) for i in indices]
    if len(set(indices)) != len(indices):
        raise ArgumentError("orthogonalize_subset indices must be distinct")
    for index in indices:
        _check_index(dictionary, index)
    if len(indices) > dictionary.n_dims:
        raise ArgumentError(
            f"Cannot orthogonalize {len(indices)} atoms in {dictionary.n_dims} dimensions"
        )

    atoms = np.array(dictionary.atoms)
    basis = []
    for index in indices:
        v = atoms[:, index].copy()
        for _ in range(2):
            for q in basis:
                v -= np.dot(q, v) * q
        norm = np.linalg.norm(v)
        if norm < DEPENDENCE_TOLERANCE:
            raise DegeneracyError(f"Atom {index} is linearly dependent on the earlier selection")
        v /= norm
        basis.append(v)
        atoms[:, index] = v

    return Dictionary(atoms)
