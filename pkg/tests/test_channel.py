import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from risae.channel import (
    ChannelRealization,
    NoiseSpec,
    PhaseConstraintError,
    add_awgn,
    apply_channel,
    effective_channel,
    sample_rayleigh,
    snr,
)
from risae.streams import stream


def _mean_rayleigh_amplitude():
    # E|X| for X ~ CN(0, 1): |X|^2 is Exp(1)
    val, _ = integrate.quad(lambda t: math.sqrt(t) * math.exp(-t), 0, np.inf)
    return val


def test_noise_spec_unit_rate_zero_db():
    assert NoiseSpec(0.0, 1.0).sigma_sq == pytest.approx(0.5)


def test_noise_spec_rate_scaling():
    assert NoiseSpec(10.0, 2.0).sigma_sq == pytest.approx(1.0 / 40.0)
    assert NoiseSpec(math.inf).sigma_sq == 0.0
    with pytest.raises(ValueError):
        NoiseSpec(0.0, 0.0)


def test_rayleigh_moments():
    ch = sample_rayleigh(16, stream(1, "t"), 200_000)
    assert np.mean(np.abs(ch.h_d) ** 2) == pytest.approx(1.0, abs=0.01)
    assert np.mean(np.abs(ch.G) ** 2) == pytest.approx(1.0, abs=0.01)
    a = _mean_rayleigh_amplitude()
    assert np.mean(np.abs(ch.cascade)) == pytest.approx(a * a, abs=0.005)
    assert a * a == pytest.approx(math.pi / 4)


def test_sampling_is_deterministic_per_stream():
    a = sample_rayleigh(8, stream(5, "x"), 10)
    b = sample_rayleigh(8, stream(5, "x"), 10)
    c = sample_rayleigh(8, stream(5, "y"), 10)
    assert np.array_equal(a.G, b.G) and np.array_equal(a.h_d, b.h_d)
    assert not np.array_equal(a.G, c.G)


def test_no_ris_link():
    ch = sample_rayleigh(0, stream(0), 5)
    assert ch.cascade.shape == (5, 0)
    assert np.allclose(effective_channel(ch, np.ones((5, 0))), ch.h_d)


def test_effective_channel_rejects_non_unit_modulus():
    ch = sample_rayleigh(4, stream(0), ())
    with pytest.raises(PhaseConstraintError):
        effective_channel(ch, np.full(4, 1.1))
    with pytest.raises(ValueError):
        effective_channel(ch, np.ones(3))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12))
def test_effective_channel_triangle_inequality(seed, n):
    rng = stream(seed, "tri")
    ch = sample_rayleigh(n, rng, ())
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    bound = abs(ch.h_d) + np.abs(ch.cascade).sum()
    assert abs(effective_channel(ch, theta)) <= bound * (1 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(0, 2 * math.pi))
def test_apply_channel_is_linear(seed, a, phi):
    rng = stream(seed, "lin")
    x1, x2 = rng.standard_normal(4) + 1j * rng.standard_normal(4), rng.standard_normal(4) + 0j
    h = complex(np.exp(1j * phi))
    lhs = apply_channel(a * x1 + x2, h)
    assert np.allclose(lhs, a * apply_channel(x1, h) + apply_channel(x2, h))


def test_awgn_variance_per_real_dimension():
    spec = NoiseSpec(3.0)
    w = add_awgn(np.zeros(400_000, dtype=complex), spec, stream(2, "n"))
    assert np.var(w.real) == pytest.approx(spec.sigma_sq, rel=0.01)
    assert np.var(w.imag) == pytest.approx(spec.sigma_sq, rel=0.01)
    assert abs(np.corrcoef(w.real, w.imag)[0, 1]) < 0.01


def test_awgn_is_independent_of_signal():
    rng = stream(3, "sig")
    x = rng.standard_normal(200_000) + 1j * rng.standard_normal(200_000)
    w = add_awgn(x, NoiseSpec(0.0), stream(3, "noise")) - x
    assert abs(np.corrcoef(x.real, w.real)[0, 1]) < 0.01


def test_zero_noise_is_identity():
    x = np.array([1 + 2j, -3j])
    assert np.array_equal(add_awgn(x, NoiseSpec(math.inf), stream(0)), x)


def test_snr():
    assert snr(np.array([2.0]), NoiseSpec(0.0))[0] == pytest.approx(8.0)
    with pytest.raises(ValueError):
        snr(1.0, NoiseSpec(math.inf))


def test_indexing_and_from_cascade():
    ch = sample_rayleigh(3, stream(0), 4)
    sub = ch[1]
    assert sub.G.shape == (3,) and sub.h_d.shape == ()
    fc = ChannelRealization.from_cascade(ch.cascade, ch.h_d)
    assert np.allclose(fc.cascade, ch.cascade)
