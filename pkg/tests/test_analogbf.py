import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cransec.analogbf import (
    AnalogBeamformer, array_gain, bs_assignment, codebook, design_analog_bf, effective_channel, quantize_phase,
    wrap_angle,
)
from cransec.model import ChannelSet, SystemConfig, clustered_channel, draw_instance, zero_channels


def cophase(h, bits):
    """Designed weights for a single block, built with the same rule as design_analog_bf."""
    idx = [quantize_phase(-np.angle(x), bits) for x in h]
    return np.exp(1j * codebook(bits)[idx]) / np.sqrt(len(h))


def channels_from_rows(cfg, h):
    ch = zero_channels(cfg)
    return ChannelSet(g=np.ones_like(ch.g), h=np.asarray(h, dtype=complex), he_true=ch.he_true, he_est=ch.he_est)


# -- quantizer -----------------------------------------------------------------------

@pytest.mark.parametrize("angle, bits, expected", [
    (0.0, 3, 0), (1.0, 2, 1), (2 * np.pi - 0.01, 2, 0), (np.pi, 1, 1), (-np.pi / 2, 2, 3),
])
def test_quantize_phase_examples(angle, bits, expected):
    assert quantize_phase(angle, bits) == expected


def test_quantize_phase_ties_go_to_smaller_index():
    assert quantize_phase(np.pi / 4, 2) == 0          # halfway between 0 and pi/2
    assert quantize_phase(np.pi / 2, 1) == 0          # halfway between 0 and pi
    assert quantize_phase(3 * np.pi / 4, 2) == 1


def test_codebook_has_two_to_the_b_phases():
    np.testing.assert_allclose(codebook(2), [0, np.pi / 2, np.pi, 3 * np.pi / 2])
    with pytest.raises(ValueError):
        codebook(0)


@given(angle=st.floats(-50, 50), bits=st.integers(1, 8))
def test_quantizer_picks_nearest_codebook_phase(angle, bits):
    idx = quantize_phase(angle, bits)
    errs = np.abs(wrap_angle(angle - codebook(bits)))
    assert errs[idx] <= errs.min() + 1e-9
    assert errs[idx] <= np.pi / 2 ** bits + 1e-9


# -- design ----------------------------------------------------------------------

def test_round_robin_assignment():
    np.testing.assert_array_equal(bs_assignment(2, 2), [0, 1])
    np.testing.assert_array_equal(bs_assignment(5, 2), [0, 1, 0, 1, 0])


def test_designed_beamformer_structure():
    cfg = SystemConfig(rng_seed=3)
    _, ch = draw_instance(cfg)
    bf = design_analog_bf(ch, cfg)
    F = bf.F
    assert F.shape == (cfg.n_bs_antennas * cfg.n_bs, cfg.n_bs)
    np.testing.assert_allclose(F.conj().T @ F, np.eye(cfg.n_bs), atol=1e-12)
    np.testing.assert_allclose(np.abs(bf.f), 1 / np.sqrt(cfg.n_bs_antennas), atol=1e-15)
    phases = np.angle(bf.f) % (2 * np.pi)
    grid = codebook(cfg.phase_bits)
    assert np.all(np.min(np.abs(wrap_angle(phases[..., None] - grid)), axis=-1) < 1e-12)
    np.testing.assert_array_equal(bf.assignment, [0, 1, 0])
    M = cfg.n_bs_antennas
    for l, k in enumerate(bf.assignment):
        np.testing.assert_allclose(bf.f[l], cophase(ch.h[k, l * M:(l + 1) * M], cfg.phase_bits), atol=1e-15)


def test_two_bs_two_users_each_bs_serves_its_user():
    cfg = SystemConfig(n_bs=2, n_users=2, n_bs_antennas=2)
    h = np.array([[1, 1j, 0.1, 0.1], [0.1, 0.1, -1, 1j]])
    bf = design_analog_bf(channels_from_rows(cfg, h), cfg)
    np.testing.assert_array_equal(bf.assignment, [0, 1])
    assert array_gain(h[0, :2], bf.f[0]) == pytest.approx(np.sqrt(2))
    assert array_gain(h[1, 2:], bf.f[1]) == pytest.approx(np.sqrt(2))


def test_single_antenna_gain_is_channel_magnitude():
    cfg = SystemConfig(n_bs_antennas=1, n_bs=2, n_users=1, phase_bits=2)
    h = np.array([[0.3 + 0.4j, -2.0]])
    bf = design_analog_bf(channels_from_rows(cfg, h), cfg)
    np.testing.assert_allclose(np.abs(bf.f), 1.0)
    assert 0.5 * np.cos(np.pi / 4) - 1e-12 <= array_gain(h[0, :1], bf.f[0]) <= 0.5 + 1e-12
    assert array_gain(h[0, 1:], bf.f[1]) == pytest.approx(2.0)


def test_fine_codebook_reaches_cophasing_gain():
    m = 8
    h = clustered_channel(np.array([0.7 - 0.2j]), np.array([1.1]), m)
    gain = array_gain(h, cophase(h, 16))
    assert gain == pytest.approx(np.sum(np.abs(h)) / np.sqrt(m), abs=1e-3)


def test_fewer_bs_than_users_warns():
    cfg = SystemConfig(n_bs=1, n_users=2)
    h = np.ones((2, cfg.n_bs_antennas), dtype=complex)
    with pytest.warns(UserWarning):
        design_analog_bf(channels_from_rows(cfg, h), cfg)


def test_design_rejects_empty_channels():
    cfg = SystemConfig()
    with pytest.raises(ValueError):
        design_analog_bf(zero_channels(cfg), cfg)


def test_from_indices_round_trip():
    bf = AnalogBeamformer.from_indices([[0, 1], [2, 3]], 2)
    np.testing.assert_allclose(bf.f[0], np.array([1, 1j]) / np.sqrt(2), atol=1e-15)
    assert bf.n_bs == 2 and bf.n_antennas == 2
    with pytest.raises(ValueError):
        AnalogBeamformer.from_indices([0, 1], 2)


# -- properties that hold -----------------------------------------------------------

angles = st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=8)


@given(phases=angles, mags=st.lists(st.floats(0.01, 10), min_size=8, max_size=8), bits=st.integers(1, 6))
def test_gain_lower_bound_from_quantization_error(phases, mags, bits):
    h = np.array(mags[: len(phases)]) * np.exp(1j * np.array(phases))
    gain = array_gain(h, cophase(h, bits))
    bound = np.cos(np.pi / 2 ** bits) * np.sum(np.abs(h)) / np.sqrt(len(h))
    assert gain >= bound - 1e-9


@given(phases=angles, bits=st.integers(1, 6))
def test_finer_codebook_never_increases_elementwise_error(phases, bits):
    h = np.exp(1j * np.array(phases))
    err = lambda b: np.abs(wrap_angle(np.angle(h * cophase(h, b))))  # noqa: E731
    assert np.all(err(2 * bits) <= err(bits) + 1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_designed_f_is_orthonormal_for_random_draws(seed):
    cfg = SystemConfig(rng_seed=seed, n_bs=4, n_users=3)
    _, ch = draw_instance(cfg)
    F = design_analog_bf(ch, cfg).F
    np.testing.assert_allclose(F.conj().T @ F, np.eye(4), atol=1e-12)


# -- pinned counterexamples to two tempting invariants -----------------------------------

def test_cophasing_can_lose_to_a_constant_phase_vector():
    # one bit, element phases 10 and 95 degrees: the second element rounds to pi
    h = np.exp(1j * np.radians([10.0, 95.0]))
    designed = array_gain(h, cophase(h, 1))
    constant = array_gain(h, np.ones(2) / np.sqrt(2))
    assert designed == pytest.approx(2 * np.sin(np.radians(42.5)) / np.sqrt(2), rel=1e-12)
    assert constant == pytest.approx(2 * np.cos(np.radians(42.5)) / np.sqrt(2), rel=1e-12)
    assert constant > designed


def test_doubling_bits_can_lower_the_gain():
    # B=2 rounds both products to 5 and 15 degrees; B=4 to 5 and -7.5 degrees
    h = np.exp(1j * np.radians([5.0, 15.0]))
    g2 = array_gain(h, cophase(h, 2))
    g4 = array_gain(h, cophase(h, 4))
    assert g2 == pytest.approx(2 * np.cos(np.radians(5.0)) / np.sqrt(2), rel=1e-12)
    assert g4 == pytest.approx(2 * np.cos(np.radians(6.25)) / np.sqrt(2), rel=1e-12)
    assert g4 < g2


# -- effective channel ----------------------------------------------------------------

def test_effective_channel_examples():
    bf = AnalogBeamformer.from_indices(np.zeros((3, 4), dtype=int), 3)
    np.testing.assert_allclose(effective_channel(np.ones(12), bf), 2.0 * np.ones(3))
    np.testing.assert_allclose(effective_channel(np.zeros(12), bf), np.zeros(3))
    with pytest.raises(ValueError):
        effective_channel(np.ones(10), bf)


@given(seed=st.integers(0, 10_000))
def test_effective_channel_matches_dense_product(seed):
    rng = np.random.default_rng(seed)
    bf = AnalogBeamformer.from_indices(rng.integers(0, 8, size=(3, 4)), 3)
    h = rng.normal(size=(5, 12)) + 1j * rng.normal(size=(5, 12))
    np.testing.assert_allclose(effective_channel(h, bf), h @ bf.F, atol=1e-12)
    np.testing.assert_allclose(effective_channel(h[0], bf), h[0] @ bf.F, atol=1e-12)


def test_no_warning_when_every_user_has_a_bs():
    cfg = SystemConfig()
    _, ch = draw_instance(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        design_analog_bf(ch, cfg)
