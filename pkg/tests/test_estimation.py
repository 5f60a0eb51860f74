import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risae.channel import ChannelRealization, NoiseSpec, sample_rayleigh
from risae.estimation import (
    PilotSchedule,
    SingularScheduleError,
    dft_reflection_matrix,
    estimated_csi_pipeline,
    ls_estimate,
    simulate_pilot_phase,
)
from risae.phase import optimal_gain, optimal_phases_closed_form
from risae.streams import stream

NOISELESS = NoiseSpec(math.inf)


def test_dft_schedule_properties():
    s = dft_reflection_matrix(7)
    assert s.patterns.shape == (8, 7)
    assert np.allclose(np.abs(s.patterns), 1.0, atol=1e-12)
    t = np.arange(8)
    assert np.allclose(s.matrix, np.exp(-2j * np.pi * np.outer(t, t) / 8))
    assert np.linalg.cond(s.matrix) == pytest.approx(1.0)


def test_single_element_schedule_and_worked_example():
    s = dft_reflection_matrix(1)
    assert np.allclose(s.patterns[:, 0], [1, -1])
    ch = ChannelRealization.from_cascade([1.0], 1.0)
    y = simulate_pilot_phase(ch, s, NOISELESS, stream(0))
    assert np.allclose(y, [2, 0])
    est = ls_estimate(y, s)
    assert est.h_d_hat == pytest.approx(1.0)
    assert np.allclose(est.cascade_hat, [1.0])


def test_exact_recovery_batched():
    ch = sample_rayleigh(16, stream(1), 1000)
    s = dft_reflection_matrix(16)
    est = ls_estimate(simulate_pilot_phase(ch, s, NOISELESS, stream(0)), s)
    assert np.max(np.abs(est.h_d_hat - ch.h_d)) < 1e-10
    assert np.max(np.abs(est.cascade_hat - ch.cascade)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 10))
def test_exact_recovery_random_invertible_schedule(seed, n):
    rng = stream(seed, "sched")
    pats = np.exp(2j * np.pi * rng.uniform(size=(n + 1, n)))
    s = PilotSchedule(pats, np.exp(2j * np.pi * rng.uniform(size=n + 1)))
    if np.linalg.cond(s.matrix) > 1e8:
        return
    ch = sample_rayleigh(n, rng, ())
    est = ls_estimate(simulate_pilot_phase(ch, s, NOISELESS, rng), s)
    assert np.allclose(est.cascade_hat, ch.cascade, atol=1e-10)


def test_pilot_rotation_rotates_signal():
    ch = sample_rayleigh(3, stream(2), ())
    s = dft_reflection_matrix(3)
    rot = np.exp(0.4j)
    s2 = PilotSchedule(s.patterns, s.pilots * rot)
    y1 = simulate_pilot_phase(ch, s, NOISELESS, stream(0))
    y2 = simulate_pilot_phase(ch, s2, NOISELESS, stream(0))
    assert np.allclose(y2, y1 * rot)


def test_zero_channel_gives_noise_power():
    s = dft_reflection_matrix(3)
    zero = ChannelRealization.from_cascade(np.zeros((50_000, 3)), np.zeros(50_000))
    spec = NoiseSpec(0.0)
    y = simulate_pilot_phase(zero, s, spec, stream(3))
    assert np.mean(np.abs(y) ** 2) == pytest.approx(2 * spec.sigma_sq, rel=0.02)


def test_singular_schedule_rejected():
    pats = np.ones((3, 2), dtype=complex)
    with pytest.raises(SingularScheduleError):
        ls_estimate(np.zeros(3), PilotSchedule(pats, np.ones(3)))
    with pytest.raises(ValueError):
        PilotSchedule(np.ones((2, 2)), np.ones(2))


def _errors(n, spec, trials, seed):
    ch = sample_rayleigh(n, stream(seed, "ch"), trials)
    s = dft_reflection_matrix(n)
    est = ls_estimate(simulate_pilot_phase(ch, s, spec, stream(seed, "w")), s)
    return np.concatenate([(est.h_d_hat - ch.h_d)[:, None], est.cascade_hat - ch.cascade], axis=1)


def test_estimator_is_unbiased():
    err = _errors(4, NoiseSpec(0.0), 100_000, 4)
    se = err.std(axis=0) / np.sqrt(err.shape[0])
    assert np.all(np.abs(err.real.mean(axis=0)) < 3 * se)
    assert np.all(np.abs(err.imag.mean(axis=0)) < 3 * se)


def test_mse_scales_with_noise_variance():
    a = np.mean(np.abs(_errors(4, NoiseSpec(3.0), 50_000, 5)) ** 2)
    b = np.mean(np.abs(_errors(4, NoiseSpec(3.0 - 10 * math.log10(2)), 50_000, 6)) ** 2)
    assert b / a == pytest.approx(2.0, rel=0.05)


def test_dft_minimizes_trace_of_inverse_gram():
    s = dft_reflection_matrix(6)
    best = np.trace(np.linalg.inv(s.matrix.conj().T @ s.matrix)).real
    rng = stream(7, "rand")
    for _ in range(10):
        pats = np.exp(2j * np.pi * rng.uniform(size=(7, 6)))
        a = PilotSchedule(pats, np.ones(7)).matrix
        assert np.trace(np.linalg.inv(a.conj().T @ a)).real >= best - 1e-9


def test_zero_noise_pipeline_matches_perfect_csi():
    ch = sample_rayleigh(16, stream(8), 200)
    theta, csi, _ = estimated_csi_pipeline(ch, dft_reflection_matrix(16), NOISELESS, stream(0))
    assert np.max(np.abs(theta - optimal_phases_closed_form(ch))) < 1e-9
    h = ch.h_d + np.sum(theta * ch.cascade, axis=-1)
    assert np.allclose(csi[:, 0] + 1j * csi[:, 1], h)


def test_noisy_pipeline_never_beats_true_alignment():
    ch = sample_rayleigh(8, stream(9), 500)
    theta, _, _ = estimated_csi_pipeline(ch, dft_reflection_matrix(8), NoiseSpec(0.0), stream(1))
    achieved = np.abs(ch.h_d + np.sum(theta * ch.cascade, axis=-1))
    assert np.all(achieved <= optimal_gain(ch) * (1 + 1e-12))


def test_schedule_csv_dump(tmp_path):
    s = dft_reflection_matrix(2)
    path = tmp_path / "sched.csv"
    s.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 6
    assert rows[0].keys() == {"t", "n", "re", "im"}
    v = complex(float(rows[5]["re"]), float(rows[5]["im"]))
    assert v == s.patterns[2, 1]
