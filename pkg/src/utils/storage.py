"""
On-disk formats for dictionaries, observation records and iCPA checkpoints

Binary layout shared by all three formats: an 8-byte ASCII magic, unsigned
64-bit little-endian header integers, then IEEE-754 float64 little-endian
payload in column-major order.

    SPDICT01  N, M, then the N x M atoms
    SPOBS001  N, T, then the N x T matrix whose column t is y(t) (i.e. Y)
    SPICPA01  M, steps_processed, then Theta (M values), then P (M x M)
"""

import os
from typing import Optional, Tuple

import numpy as np

from src.algorithms.cpa_solver import PresenceVector
from src.algorithms.icpa_solver import GainMatrix, IcpaState
from src.errors import FormatError
from src.simulation.dictionary import Dictionary
from src.simulation.signal_model import ObservationSet

DICTIONARY_MAGIC = b"SPDICT01"
OBSERVATIONS_MAGIC = b"SPOBS001"
ICPA_STATE_MAGIC = b"SPICPA01"

_HEADER_INT = np.dtype("<u8")
_PAYLOAD = np.dtype("<f8")


def _write(path, magic: bytes, header: Tuple[int, ...], *payloads: np.ndarray):
    with open(path, "wb") as f:
        f.write(magic)
        f.write(np.asarray(header, dtype=_HEADER_INT).tobytes())
        for payload in payloads:
            f.write(np.asarray(payload, dtype=_PAYLOAD).tobytes(order="F"))


def _read(path, magic: bytes, n_header: int):
    with open(path, "rb") as f:
        data = f.read()
    if data[:len(magic)] != magic:
        raise FormatError(f"{path}: expected magic {magic!r}, found {data[:len(magic)]!r}")
    offset = len(magic)
    header_end = offset + n_header * _HEADER_INT.itemsize
    if len(data) < header_end:
        raise FormatError(f"{path}: truncated header")
    header = [int(v) for v in np.frombuffer(data, dtype=_HEADER_INT, count=n_header, offset=offset)]
    return header, data[header_end:]


def _payload(path, body: bytes, count: int) -> np.ndarray:
    if len(body) != count * _PAYLOAD.itemsize:
        raise FormatError(f"{path}: expected {count} values, found {len(body) // _PAYLOAD.itemsize}")
    return np.frombuffer(body, dtype=_PAYLOAD, count=count).astype(np.float64)


def save_dictionary(dictionary: Dictionary, path):
    _write(path, DICTIONARY_MAGIC, (dictionary.n_dims, dictionary.n_atoms), dictionary.atoms)


def load_dictionary(path) -> Dictionary:
    (n_dims, n_atoms), body = _read(path, DICTIONARY_MAGIC, 2)
    values = _payload(path, body, n_dims * n_atoms)
    return Dictionary(values.reshape((n_dims, n_atoms), order="F"))


def save_observations(obs: ObservationSet, path):
    _write(path, OBSERVATIONS_MAGIC, (obs.n_dims, obs.n_steps), obs.observations.T)


def load_observations(path) -> ObservationSet:
    (n_dims, n_steps), body = _read(path, OBSERVATIONS_MAGIC, 2)
    values = _payload(path, body, n_dims * n_steps)
    return ObservationSet(n_dims, values.reshape((n_dims, n_steps), order="F").T)


def save_observations_csv(obs: ObservationSet, path):
    """One row per time step, N columns, 17 significant digits"""
    np.savetxt(path, obs.observations, fmt="%.17g", delimiter=",")


def load_observations_csv(path, n_dims: Optional[int] = None) -> ObservationSet:
    """Read a CSV record; n_dims is required only to load an empty file"""
    if os.path.getsize(path) == 0:
        if n_dims is None:
            raise FormatError(f"{path}: empty observation CSV, pass n_dims")
        return ObservationSet(n_dims, np.zeros((0, n_dims)))
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed observation CSV ({exc})") from exc
    if n_dims is not None and values.shape[1] != n_dims:
        raise FormatError(f"{path}: expected {n_dims} columns, found {values.shape[1]}")
    return ObservationSet(values.shape[1], values)


def save_observations_any(obs: ObservationSet, path):
    """CSV when the path ends in .csv, SPOBS001 otherwise"""
    if str(path).lower().endswith(".csv"):
        save_observations_csv(obs, path)
    else:
        save_observations(obs, path)


def load_observations_any(path) -> ObservationSet:
    if str(path).lower().endswith(".csv"):
        return load_observations_csv(path)
    return load_observations(path)


def save_icpa_state(state: IcpaState, path):
    _write(path, ICPA_STATE_MAGIC, (state.theta.n_atoms, state.steps_processed),
           state.theta.theta, state.gain.matrix)


def load_icpa_state(path) -> IcpaState:
    (n_atoms, steps), body = _read(path, ICPA_STATE_MAGIC, 2)
    values = _payload(path, body, n_atoms + n_atoms * n_atoms)
    gain = values[n_atoms:].reshape((n_atoms, n_atoms), order="F")
    return IcpaState(theta=PresenceVector(values[:n_atoms]), gain=GainMatrix(gain), steps_processed=steps)
