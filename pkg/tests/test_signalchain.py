import math

import numpy as np
import pytest

from dopplerkey.geometry import SpacecraftState, relative_doppler
from dopplerkey.signalchain import (
    ComplexFrame,
    LinkModel,
    apply_link,
    bpsk_pilots,
    complex_noise,
    db_to_linear,
)


def test_db_to_linear():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(1.0) == pytest.approx(1.2589254)
    assert db_to_linear(0.0) == 1.0


def test_fixed_pilots_are_constant_symbol():
    x = bpsk_pilots(6, 10.0)
    assert np.allclose(x.samples, -math.sqrt(10.0))


def test_random_pilots_are_bpsk(rng):
    x = bpsk_pilots(1000, 4.0, rng)
    assert np.allclose(np.abs(x.samples), 2.0)
    assert np.allclose(x.samples.imag, 0.0, atol=1e-12)
    assert set(np.round(x.samples.real).astype(int)) == {-2, 2}


def test_pilots_reject_bad_args():
    with pytest.raises(ValueError):
        bpsk_pilots(0, 1.0)
    with pytest.raises(ValueError):
        bpsk_pilots(4, 0.0)


def test_frame_validation():
    with pytest.raises(ValueError):
        ComplexFrame(np.array([]), 1e-6)
    with pytest.raises(ValueError):
        ComplexFrame(np.array([np.nan]), 1e-6)
    with pytest.raises(ValueError):
        ComplexFrame(np.array([1.0]), 0.0)


def test_identity_link(rng):
    x = bpsk_pilots(16, 10.0, rng)
    y = apply_link(x, LinkModel(), rng)
    assert np.array_equal(y.samples, x.samples)


def test_rotation_preserves_modulus_and_energy(rng):
    x = bpsk_pilots(64, 10.0, rng)
    link = LinkModel(zeta=0.5, doppler_cyclic=3.3e4)
    y = apply_link(x, link, rng)
    assert np.allclose(np.abs(y.samples), 0.5 * np.abs(x.samples))
    assert np.sum(np.abs(y.samples) ** 2) == pytest.approx(0.25 * np.sum(np.abs(x.samples) ** 2))


def test_rotation_phase_matches_formula(rng):
    x = ComplexFrame(np.ones(4), 1e-6)
    y = apply_link(x, LinkModel(doppler_cyclic=1e4), rng)
    i = np.arange(1, 5)
    assert np.allclose(y.samples, np.exp(2j * math.pi * 1e4 * i * 1e-6))


def test_path_loss_from_distance():
    assert LinkModel(distance=10.0).zeta == pytest.approx(0.01)
    assert LinkModel(distance=10.0, pl_exponent=3.0).zeta == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        LinkModel(distance=0.0)
    with pytest.raises(ValueError):
        LinkModel(noise_var=-1.0)


def test_empirical_snr(rng):
    n = 100_000
    x = bpsk_pilots(n, 10.0, rng)
    noise_var = db_to_linear(1.0)
    y = apply_link(x, LinkModel(noise_var=noise_var), rng)
    noise = y.samples - x.samples
    snr = np.mean(np.abs(x.samples) ** 2) / np.mean(np.abs(noise) ** 2)
    assert snr == pytest.approx(10.0 / noise_var, rel=0.02)


def test_noise_components(rng):
    e = complex_noise(200_000, 2.0, rng)
    assert np.var(e.real) == pytest.approx(1.0, rel=0.02)
    assert np.var(e.imag) == pytest.approx(1.0, rel=0.02)
    assert abs(np.mean(e.real * e.imag)) < 0.02


def test_reverse_link_rotation_matches_observation():
    # the rotation follows the observed Doppler of each direction
    a = SpacecraftState("a", (0, 0, 0), (10, 0, 0))
    b = SpacecraftState("b", (100, 0, 0), (0, 3, 0))
    ab = relative_doppler(a, b, 1e9)
    ba = relative_doppler(b, a, 1e9)
    assert ab.f_cyclic == pytest.approx(ba.f_cyclic)
