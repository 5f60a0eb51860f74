"""Pilot-based least-squares estimation of the direct and cascade channels.

During ``T = N + 1`` pilot slots the RIS cycles through known reflection
patterns. Stacking the per-slot LS estimates ``y_p[t] / x_p[t]`` gives the
linear system ``[1 | theta_t] @ [h_d; cascade] = H_hat`` which is solved
for all ``N + 1`` unknowns at once.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, add_awgn, check_unit_modulus

CONDITION_LIMIT = 1e12


class SingularScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class PilotSchedule:
    patterns: np.ndarray  # (T, N) reflection coefficients per pilot slot
    pilots: np.ndarray    # (T,) known pilot symbols

    def __post_init__(self):
        t, n = self.patterns.shape
        if t != n + 1:
            raise ValueError(f"pilot schedule needs N + 1 = {n + 1} slots, got {t}")
        if self.pilots.shape != (t,):
            raise ValueError(f"expected {t} pilot symbols, got shape {self.pilots.shape}")
        check_unit_modulus(self.patterns)
        if np.any(self.pilots == 0):
            raise ValueError("pilot symbols must be nonzero")

    @property
    def n_elements(self):
        return self.patterns.shape[1]

    @property
    def matrix(self):
        """``[1 | patterns]``: maps ``[h_d, cascade]`` to the per-slot channel."""
        ones = np.ones((self.patterns.shape[0], 1), dtype=complex)
        return np.hstack([ones, self.patterns])

    def solver(self):
        a = self.matrix
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            raise SingularScheduleError(f"pilot pattern matrix is singular (cond={cond:.3g})")
        return np.linalg.inv(a)

    def to_csv(self, path):
        """Dump ``t, n, re, im`` rows of the reflection patterns."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "n", "re", "im"])
            for t, row in enumerate(self.patterns):
                for n, v in enumerate(row):
                    w.writerow([t, n, format(v.real, ".17g"), format(v.imag, ".17g")])


@dataclass(frozen=True)
class ChannelEstimate:
    h_d_hat: np.ndarray
    cascade_hat: np.ndarray
    residual: np.ndarray

    def as_realization(self):
        return ChannelRealization.from_cascade(self.cascade_hat, self.h_d_hat)


def dft_reflection_matrix(n_elements):
    """DFT pilot schedule: slot ``t`` reflects with ``F[t, 1:]`` and pilots are all ones."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    size = n_elements + 1
    t = np.arange(size)
    f = np.exp(-2j * np.pi * np.outer(t, t) / size)
    return PilotSchedule(f[:, 1:], np.ones(size, dtype=complex))


def simulate_pilot_phase(ch, sched, spec, rng):
    """Received pilots ``(h_d + sum theta_t * cascade) * x_p[t] + w_p[t]``, shape ``(..., T)``."""
    unknowns = np.concatenate([np.asarray(ch.h_d)[..., None], ch.cascade], axis=-1)
    h_p = unknowns @ sched.matrix.T
    return add_awgn(h_p * sched.pilots, spec, rng)


def ls_estimate(y_p, sched):
    y_p = np.asarray(y_p)
    if y_p.shape[-1] != sched.patterns.shape[0]:
        raise ValueError(f"expected {sched.patterns.shape[0]} pilot observations, got {y_p.shape[-1]}")
    h_hat = y_p / sched.pilots
    inv = sched.solver()
    u = h_hat @ inv.T
    residual = np.linalg.norm(u @ sched.matrix.T - h_hat, axis=-1)
    return ChannelEstimate(u[..., 0], u[..., 1:], residual)


def closed_form_selector(ch):
    from .phase import optimal_phases_closed_form

    return optimal_phases_closed_form(ch)


def estimated_csi_pipeline(ch, sched, spec, rng, selector=closed_form_selector):
    """Pilot phase, LS estimation and phase selection driven by the estimates.

    Returns ``(theta, csi, estimate)``: ``csi`` stacks the real and imaginary
    parts of the effective channel the receiver believes in, built from the
    estimates rather than the truth.
    """
    y_p = simulate_pilot_phase(ch, sched, spec, rng)
    est = ls_estimate(y_p, sched)
    est_ch = est.as_realization()
    theta = selector(est_ch)
    h_believed = est.h_d_hat + np.sum(theta * est.cascade_hat, axis=-1)
    csi = np.stack([h_believed.real, h_believed.imag], axis=-1)
    return theta, csi, est
