import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import ArgumentError, DegeneracyError
from src.simulation.dictionary import generate_dictionary
from src.simulation.random_streams import Stream, make_rng
from src.simulation.signal_model import (
    ActiveSet,
    AmplitudeSeries,
    NovelAtomSpec,
    ObservationSet,
    add_noise,
    choose_active_set,
    generate_novel_atom,
    inject_novel_atom,
    stack_observations,
    synthesize,
    synthesize_from_amplitudes,
    unstack_observations,
)


def test_substreams_are_independent():
    a = make_rng(3, Stream.NOISE).standard_normal(4)
    b = make_rng(3, Stream.AMPLITUDES).standard_normal(4)
    again = make_rng(3, Stream.NOISE).standard_normal(4)
    assert np.array_equal(a, again)
    assert not np.array_equal(a, b)


def test_negative_seed_is_rejected():
    with pytest.raises(ArgumentError):
        make_rng(-1, Stream.DICTIONARY)


def test_active_set_validation():
    assert ActiveSet([4, 1]).k == 2
    assert 4 in ActiveSet([4, 1])
    with pytest.raises(ArgumentError):
        ActiveSet([1, 1])
    with pytest.raises(ArgumentError):
        ActiveSet([-2])


def test_choose_active_set():
    active = choose_active_set(100, 7, seed=2)
    assert active.k == 7
    assert all(0 <= i < 100 for i in active.indices)
    assert active == choose_active_set(100, 7, seed=2)
    with pytest.raises(ArgumentError):
        choose_active_set(5, 6, seed=0)


def test_synthesize_combines_active_atoms(small_dictionary):
    active = ActiveSet([3, 9, 21])
    obs, amplitudes = synthesize(small_dictionary, active, n_steps=6, seed=4)
    assert obs.n_steps == 6
    assert amplitudes.values.shape == (6, 3)
    expected = amplitudes.values @ small_dictionary.atoms[:, [3, 9, 21]].T
    assert_allclose(obs.observations, expected, atol=1e-14)

    again, _ = synthesize(small_dictionary, active, n_steps=6, seed=4)
    assert np.array_equal(obs.observations, again.observations)


def test_synthesize_with_empty_active_set(small_dictionary):
    obs, _ = synthesize(small_dictionary, ActiveSet(), n_steps=3, seed=0)
    assert obs.observations.shape == (3, 16)
    assert not np.any(obs.observations)


def test_synthesize_rejects_out_of_range_atoms(small_dictionary):
    with pytest.raises(ArgumentError):
        synthesize(small_dictionary, ActiveSet([40]), n_steps=2, seed=0)


def test_synthesize_from_amplitudes_checks_columns(small_dictionary):
    with pytest.raises(ArgumentError):
        synthesize_from_amplitudes(small_dictionary, ActiveSet([0, 1]), AmplitudeSeries(np.ones((3, 3))))


def test_add_noise_scales_to_signal_std():
    dictionary = generate_dictionary(64, 128, seed=1)
    active = choose_active_set(128, 5, seed=1)
    clean, _ = synthesize(dictionary, active, n_steps=200, seed=1)
    noisy = add_noise(clean, 0.1, seed=1)
    noise = noisy.observations - clean.observations
    assert np.std(noise) / np.std(clean.observations) == pytest.approx(0.1, rel=0.05)


def test_add_noise_zero_ratio_is_identity(small_dictionary):
    clean, _ = synthesize(small_dictionary, ActiveSet([0]), n_steps=2, seed=0)
    assert np.array_equal(add_noise(clean, 0.0, seed=0).observations, clean.observations)


def test_add_noise_needs_a_signal():
    silent = ObservationSet(4, np.zeros((3, 4)))
    with pytest.raises(DegeneracyError):
        add_noise(silent, 0.1, seed=0)


def test_novel_atom_is_unit_norm_and_outside_dictionary(small_dictionary):
    spec = generate_novel_atom(16, seed=0)
    assert spec.amplitude_std == 10.0
    assert np.linalg.norm(spec.atom) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(small_dictionary.atoms.T @ spec.atom)) < 1.0 - 1e-6


def test_novel_atom_spec_validation():
    with pytest.raises(ArgumentError):
        NovelAtomSpec(atom=np.array([1.0, 1.0]))
    with pytest.raises(ArgumentError):
        NovelAtomSpec(atom=np.array([1.0, 0.0]), amplitude_std=0.0)


def test_inject_novel_atom_adds_a_rank_one_term(small_dictionary):
    obs, _ = synthesize(small_dictionary, ActiveSet([1, 2]), n_steps=5, seed=3)
    spec = generate_novel_atom(16, seed=3, amplitude_std=10.0)
    mixed = inject_novel_atom(obs, spec, seed=3)
    added = mixed.observations - obs.observations
    assert_allclose(np.outer(added @ spec.atom, spec.atom), added, atol=1e-10)
    assert np.linalg.norm(added) > 0


def test_inject_novel_atom_dimension_mismatch():
    spec = generate_novel_atom(8, seed=0)
    with pytest.raises(ArgumentError):
        inject_novel_atom(ObservationSet(4, np.ones((2, 4))), spec, seed=0)


def test_stack_order_and_inverse():
    obs = ObservationSet(3, np.arange(12.0).reshape(4, 3))
    stacked = stack_observations(obs)
    assert np.array_equal(stacked[:3], obs.observations[0])
    assert np.array_equal(unstack_observations(stacked, 3).observations, obs.observations)


def test_stack_errors():
    with pytest.raises(ArgumentError):
        stack_observations(ObservationSet(3, np.zeros((0, 3))))
    with pytest.raises(ArgumentError):
        unstack_observations(np.zeros(7), 3)


def test_observation_set_shape_check():
    with pytest.raises(ArgumentError):
        ObservationSet(3, np.zeros((2, 4)))
    assert len(ObservationSet(3, np.zeros((0, 3)))) == 0


def test_synthesis_is_linear_over_disjoint_active_sets(small_dictionary):
    first, second = ActiveSet([1, 4]), ActiveSet([7, 20, 33])
    rng = np.random.default_rng(8)
    a, b = rng.standard_normal((5, 2)), rng.standard_normal((5, 3))
    combined = synthesize_from_amplitudes(small_dictionary, ActiveSet([1, 4, 7, 20, 33]),
                                          AmplitudeSeries(np.hstack([a, b])))
    separate = (synthesize_from_amplitudes(small_dictionary, first, AmplitudeSeries(a)).observations
                + synthesize_from_amplitudes(small_dictionary, second, AmplitudeSeries(b)).observations)
    assert_allclose(combined.observations, separate, atol=1e-13)


def test_synthesis_scales_with_amplitude_std(small_dictionary):
    active = ActiveSet([0, 11, 25])
    unit, _ = synthesize(small_dictionary, active, n_steps=4, seed=6)
    scaled, _ = synthesize(small_dictionary, active, n_steps=4, seed=6, amp_std=3.5)
    assert_allclose(scaled.observations, 3.5 * unit.observations, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_noise_residual_has_zero_mean(seed):
    dictionary = generate_dictionary(32, 64, seed=seed)
    clean, _ = synthesize(dictionary, choose_active_set(64, 4, seed), n_steps=50, seed=seed)
    noisy = add_noise(clean, 0.1, seed=seed)
    residual = noisy.observations - clean.observations
    sigma = 0.1 * np.std(clean.observations)
    assert abs(residual.mean()) < 4.0 * sigma / np.sqrt(residual.size)


@pytest.mark.parametrize("k", [1, 5, 20])
def test_novel_atom_dominates_the_energy(k):
    dictionary = generate_dictionary(64, 128, seed=k)
    known, _ = synthesize(dictionary, choose_active_set(128, k, seed=k), n_steps=2000, seed=k)
    mixed = inject_novel_atom(known, generate_novel_atom(64, seed=k, amplitude_std=10.0), seed=k)
    novel_energy = np.sum((mixed.observations - known.observations) ** 2)
    share = novel_energy / (novel_energy + np.sum(known.observations ** 2))
    assert share == pytest.approx(100.0 / (100.0 + k), abs=0.02)
