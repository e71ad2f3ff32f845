import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.algorithms import icpa_solver
from src.algorithms.cpa_solver import PresenceVector, projection_matrix, solve_cpa_regularized
from src.algorithms.icpa_solver import GainMatrix, IcpaState, StreamingCpa, init_state, run, step
from src.errors import ArgumentError
from src.simulation.dictionary import Dictionary, generate_dictionary
from src.simulation.signal_model import ObservationSet, add_noise, choose_active_set, synthesize


def _noisy_record(n_dims, n_atoms, n_steps, k, seed):
    dictionary = generate_dictionary(n_dims, n_atoms, seed)
    active = choose_active_set(n_atoms, k, seed)
    obs, _ = synthesize(dictionary, active, n_steps, seed)
    return dictionary, add_noise(obs, 0.1, seed=seed)


def _relative_error(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_init_state():
    state = init_state(5, lam=0.5)
    assert state.steps_processed == 0
    assert np.array_equal(state.theta.theta, np.zeros(5))
    assert_allclose(state.gain.matrix, 2.0 * np.eye(5))


def test_init_state_errors():
    with pytest.raises(ArgumentError):
        init_state(5, lam=0.0)
    with pytest.raises(ArgumentError):
        init_state(0)


def test_state_validation():
    with pytest.raises(ArgumentError):
        IcpaState(theta=PresenceVector(np.zeros(3)), gain=GainMatrix(np.eye(4)))


def test_iterative_matches_batch_on_random_instances():
    rng = np.random.default_rng(2024)
    for instance in range(50):
        n_dims = int(rng.integers(4, 65))
        n_atoms = int(rng.integers(n_dims + 1, 257))
        n_steps = int(rng.integers(1, 9))
        lam = float(rng.choice([0.04, 0.4, 4.0]))
        k = int(rng.integers(1, 4))
        dictionary, obs = _noisy_record(n_dims, n_atoms, n_steps, k, seed=instance)

        batch = solve_cpa_regularized(dictionary, obs, lam).theta
        iterative = run(dictionary, obs, lam).theta
        assert _relative_error(iterative, batch) < 1e-8, f"instance {instance}"


def test_gain_tracks_the_dense_inverse():
    for seed in range(5):
        dictionary, obs = _noisy_record(12, 48, 6, 3, seed)
        lam = 0.4
        state = init_state(48, lam)
        information = lam * np.eye(48)
        for y_t in obs:
            state = step(state, dictionary, y_t)
            phi = projection_matrix(dictionary, y_t).matrix
            information += phi.T @ phi
            dense = np.linalg.inv(information)
            assert _relative_error(state.gain.matrix, dense) < 1e-8
            assert np.array_equal(state.gain.matrix, state.gain.matrix.T)


def test_small_lambda_stays_accurate():
    dictionary, obs = _noisy_record(16, 32, 4, 2, seed=8)
    lam = 1e-6
    batch = solve_cpa_regularized(dictionary, obs, lam).theta
    assert _relative_error(run(dictionary, obs, lam).theta, batch) < 1e-4


def test_run_without_observations(small_dictionary):
    theta = run(small_dictionary, ObservationSet(16, np.zeros((0, 16)))).theta
    assert np.array_equal(theta, np.zeros(40))


def test_step_dimension_mismatch(small_dictionary):
    with pytest.raises(ArgumentError):
        step(init_state(39), small_dictionary, np.ones(16))
    with pytest.raises(ArgumentError):
        step(init_state(40), small_dictionary, np.ones(15))


def test_streaming_prefixes_on_identity(identity_dictionary):
    rng = np.random.default_rng(1)
    y = rng.standard_normal((4, 8))
    lam = 0.4
    stream = StreamingCpa(identity_dictionary, lam)
    for t in range(4):
        theta = stream.update(y[t])
        energy = np.sum(y[:t + 1] ** 2, axis=0)
        assert_allclose(theta, energy / (energy + lam), atol=1e-12)
    assert stream.steps_processed == 4


def test_streaming_snapshot_and_reset(small_dictionary):
    obs, _ = synthesize(small_dictionary, choose_active_set(40, 2, 0), 4, seed=0)
    stream = StreamingCpa(small_dictionary)
    stream.update_batch(ObservationSet(16, obs.observations[:2]))
    snapshot = stream.snapshot()
    saved_theta = snapshot.theta.theta.copy()

    stream.update_batch(ObservationSet(16, obs.observations[2:]))
    assert snapshot.steps_processed == 2
    assert np.array_equal(snapshot.theta.theta, saved_theta)
    assert_allclose(stream.theta, icpa_solver.run(small_dictionary, obs).theta, atol=1e-12)

    resumed = StreamingCpa(small_dictionary, state=snapshot)
    resumed.update_batch(ObservationSet(16, obs.observations[2:]))
    assert_allclose(resumed.theta, stream.theta, atol=1e-15)

    stream.reset()
    assert stream.steps_processed == 0
    assert not np.any(stream.theta)


def test_single_step_on_two_atoms_matches_hand_computation():
    # atoms (1, 0) and (0.6, 0.8); y = (1, 1) gives rough estimates (1, 1.4)
    dictionary = Dictionary(np.array([[1.0, 0.6], [0.0, 0.8]]))
    state = step(init_state(2, lam=1.0), dictionary, np.array([1.0, 1.0]))

    # phi = [[1, 0.84], [0, 1.12]], so lambda I + phi^T phi = [[2, 0.84], [0.84, 2.96]]
    det = 2.0 * 2.96 - 0.84 ** 2
    assert_allclose(state.gain.matrix, np.array([[2.96, -0.84], [-0.84, 2.0]]) / det, atol=1e-14)
    # Theta = P phi^T y with phi^T y = (1, 1.96)
    assert_allclose(state.theta.theta, np.array([2.96 - 0.84 * 1.96, -0.84 + 2.0 * 1.96]) / det, atol=1e-14)


def test_zero_observation_leaves_state_unchanged():
    dictionary, obs = _noisy_record(16, 40, 2, 3, seed=5)
    state = run_state = init_state(40)
    for y_t in obs:
        run_state = step(run_state, dictionary, y_t)
    for before in (state, run_state):
        after = step(before, dictionary, np.zeros(16))
        assert np.array_equal(after.theta.theta, before.theta.theta)
        assert np.array_equal(after.gain.matrix, before.gain.matrix)
        assert after.steps_processed == before.steps_processed + 1


def test_gain_quadratic_form_never_grows():
    dictionary, obs = _noisy_record(10, 30, 8, 2, seed=11)
    directions = np.random.default_rng(0).standard_normal((5, 30))
    state = init_state(30)
    previous = np.einsum("ij,jk,ik->i", directions, state.gain.matrix, directions)
    for y_t in obs:
        state = step(state, dictionary, y_t)
        current = np.einsum("ij,jk,ik->i", directions, state.gain.matrix, directions)
        assert np.all(current <= previous * (1.0 + 1e-12))
        previous = current


@pytest.mark.parametrize("seed", range(5))
def test_observation_order_does_not_change_final_theta(seed):
    dictionary, obs = _noisy_record(12, 48, 6, 3, seed)
    order = np.random.default_rng(seed).permutation(obs.n_steps)
    shuffled = ObservationSet(obs.n_dims, obs.observations[order])
    forward = run(dictionary, obs).theta
    assert np.linalg.norm(run(dictionary, shuffled).theta - forward) <= 1e-7
    reversed_obs = ObservationSet(obs.n_dims, obs.observations[::-1])
    assert np.linalg.norm(run(dictionary, reversed_obs).theta - forward) <= 1e-7
