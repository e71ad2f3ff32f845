"""
Observation synthesis: active atoms with Gaussian amplitudes, measurement
noise and out-of-dictionary (novel) atoms
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from src.errors import ArgumentError, DegeneracyError
from src.simulation.dictionary import UNIT_NORM_TOLERANCE, Dictionary, draw_unit_atoms
from src.simulation.random_streams import Stream, make_rng

logger = logging.getLogger(__name__)

DEFAULT_NOISE_RATIO = 0.1
DEFAULT_NOVEL_STD = 10.0


@dataclass(frozen=True)
class ActiveSet:
    """Ordered indices of the atoms that generate a signal"""

    indices: Tuple[int, ...]

    def __init__(self, indices: Iterable[int] = ()):
        indices = tuple(int(i) for i in indices)
        if len(set(indices)) != len(indices):
            raise ArgumentError(f"Active set indices must be distinct: {indices}")
        if any(i < 0 for i in indices):
            raise ArgumentError(f"Active set indices must be non-negative: {indices}")
        object.__setattr__(self, "indices", indices)

    @property
    def k(self) -> int:
        return len(self.indices)

    def check_against(self, dictionary: Dictionary):
        bad = [i for i in self.indices if i >= dictionary.n_atoms]
        if bad:
            raise ArgumentError(f"Active indices {bad} out of range [0, {dictionary.n_atoms})")

    def __contains__(self, index) -> bool:
        return index in self.indices


@dataclass(frozen=True, eq=False)
class AmplitudeSeries:
    """T x k amplitudes; column l belongs to ActiveSet.indices[l]"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ArgumentError(f"Amplitudes must be a T x k matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("Amplitudes must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """T observations y(t) of dimension N, stored as rows of a T x N matrix"""

    n_dims: int
    observations: np.ndarray

    def __post_init__(self):
        if self.n_dims < 1:
            raise ArgumentError(f"n_dims must be >= 1, got {self.n_dims}")
        obs = np.array(self.observations, dtype=np.float64, copy=True)
        if obs.size == 0:
            obs = obs.reshape(0, self.n_dims)
        if obs.ndim != 2 or obs.shape[1] != self.n_dims:
            raise ArgumentError(f"Observations must be T x {self.n_dims}, got shape {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ArgumentError("Observations must be finite")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)

    @property
    def n_steps(self) -> int:
        return self.observations.shape[0]

    def __len__(self) -> int:
        return self.n_steps

    def __iter__(self):
        return iter(self.observations)


@dataclass(frozen=True, eq=False)
class NovelAtomSpec:
    """A unit-norm atom that is not in the dictionary, with its amplitude std"""

    atom: np.ndarray
    amplitude_std: float = DEFAULT_NOVEL_STD

    def __post_init__(self):
        atom = np.array(self.atom, dtype=np.float64, copy=True).reshape(-1)
        if abs(np.linalg.norm(atom) - 1.0) > UNIT_NORM_TOLERANCE:
            raise ArgumentError("Novel atom must have unit L2 norm")
        if not self.amplitude_std > 0:
            raise ArgumentError(f"Novel amplitude std must be > 0, got {self.amplitude_std}")
        atom.setflags(write=False)
        object.__setattr__(self, "atom", atom)


def choose_active_set(n_atoms: int, k: int, seed: int) -> ActiveSet:
    """k distinct atoms drawn uniformly without replacement"""
    if not 0 <= k <= n_atoms:
        raise ArgumentError(f"k must be in [0, {n_atoms}], got {k}")
    rng = make_rng(seed, Stream.ACTIVE_SET, k)
    return ActiveSet(rng.choice(n_atoms, size=k, replace=False))


def synthesize_from_amplitudes(dictionary: Dictionary, active: ActiveSet,
                               amplitudes: AmplitudeSeries) -> ObservationSet:
    """y(t) = sum_l A_{j(l)}(t) B_{j(l)} for given amplitudes"""
    active.check_against(dictionary)
    values = amplitudes.values
    if values.shape[1] != active.k:
        raise ArgumentError(f"Amplitude columns ({values.shape[1]}) must match active set size ({active.k})")
    if active.k == 0:
        return ObservationSet(dictionary.n_dims, np.zeros((values.shape[0], dictionary.n_dims)))
    observations = values @ dictionary.atoms[:, list(active.indices)].T
    return ObservationSet(dictionary.n_dims, observations)


def synthesize(dictionary: Dictionary, active: ActiveSet, n_steps: int, seed: int,
               amp_std: float = 1.0) -> Tuple[ObservationSet, AmplitudeSeries]:
    """
    Draw i.i.d. N(0, amp_std^2) amplitudes and combine the active atoms

    Amplitudes are drawn t-major (all atoms of step 1, then step 2, ...).
    """
    active.check_against(dictionary)
    if n_steps < 1:
        raise ArgumentError(f"n_steps must be >= 1, got {n_steps}")
    if amp_std < 0:
        raise ArgumentError(f"amp_std must be >= 0, got {amp_std}")
    rng = make_rng(seed, Stream.AMPLITUDES)
    amplitudes = AmplitudeSeries(rng.standard_normal((n_steps, active.k)) * amp_std)
    return synthesize_from_amplitudes(dictionary, active, amplitudes), amplitudes


def add_noise(obs: ObservationSet, ratio: float = DEFAULT_NOISE_RATIO, *, seed: int) -> ObservationSet:
    """
    Add white Gaussian noise scaled to the clean signal

    The noise std is ratio times the empirical std of all T*N components of
    the input record (one global value per record).
    """
    if ratio < 0:
        raise ArgumentError(f"Noise ratio must be >= 0, got {ratio}")
    if ratio == 0:
        return ObservationSet(obs.n_dims, obs.observations)

    signal_std = float(np.std(obs.observations)) if obs.n_steps else 0.0
    if signal_std == 0.0:
        raise DegeneracyError("Cannot scale noise to an all-zero signal")

    rng = make_rng(seed, Stream.NOISE)
    noise = rng.standard_normal(obs.observations.shape) * (ratio * signal_std)
    logger.debug("Adding noise: signal std %.4g, noise std %.4g", signal_std, ratio * signal_std)
    return ObservationSet(obs.n_dims, obs.observations + noise)


def generate_novel_atom(n_dims: int, seed: int, amplitude_std: float = DEFAULT_NOVEL_STD) -> NovelAtomSpec:
    """Novel atom drawn like a dictionary atom, from its own substream"""
    if n_dims < 1:
        raise ArgumentError(f"n_dims must be >= 1, got {n_dims}")
    rng = make_rng(seed, Stream.NOVEL_ATOM)
    atom = draw_unit_atoms(rng, n_dims, 1)[:, 0]
    return NovelAtomSpec(atom=atom, amplitude_std=amplitude_std)


def inject_novel_atom(obs: ObservationSet, spec: NovelAtomSpec, seed: int) -> ObservationSet:
    """y(t) <- y(t) + a(t) * atom with a(t) ~ N(0, amplitude_std^2)"""
    if spec.atom.shape[0] != obs.n_dims:
        raise ArgumentError(f"Novel atom dimension {spec.atom.shape[0]} does not match n_dims {obs.n_dims}")
    if obs.n_steps == 0:
        return ObservationSet(obs.n_dims, obs.observations)
    rng = make_rng(seed, Stream.NOVEL_AMPLITUDES)
    amplitudes = rng.standard_normal(obs.n_steps) * spec.amplitude_std
    return ObservationSet(obs.n_dims, obs.observations + np.outer(amplitudes, spec.atom))


def stack_observations(obs: ObservationSet) -> np.ndarray:
    """Concatenate y(1), ..., y(T) into the T*N vector Y"""
    if obs.n_steps == 0:
        raise ArgumentError("Cannot stack an empty observation set")
    return obs.observations.reshape(-1).copy()


def unstack_observations(stacked: np.ndarray, n_dims: int) -> ObservationSet:
    """Inverse of stack_observations"""
    stacked = np.asarray(stacked, dtype=np.float64).reshape(-1)
    if n_dims < 1 or stacked.size % n_dims:
        raise ArgumentError(f"Stacked length {stacked.size} is not a multiple of n_dims {n_dims}")
    return ObservationSet(n_dims, stacked.reshape(-1, n_dims))
