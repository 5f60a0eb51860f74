"""Complex-baseband RIS channel: Rayleigh draws, effective channel, AWGN.

All functions accept leading batch axes: a realization with ``G.shape ==
(B, N)`` and ``h_d.shape == (B,)`` describes ``B`` independent links.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_MODULUS_TOL = 1e-9


class PhaseConstraintError(ValueError):
    """Raised when reflection coefficients are not unit modulus."""


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray    # BS -> RIS, (..., N)
    h: np.ndarray    # RIS -> UE, (..., N)
    h_d: np.ndarray  # BS -> UE, (...)

    @property
    def cascade(self):
        return self.G * self.h

    @property
    def n_elements(self):
        return self.G.shape[-1]

    def __getitem__(self, idx):
        return ChannelRealization(self.G[idx], self.h[idx], self.h_d[idx])

    @classmethod
    def from_cascade(cls, cascade, h_d):
        """Realization whose BS->RIS link is all ones, so ``cascade == h``."""
        cascade = np.asarray(cascade, dtype=complex)
        return cls(np.ones_like(cascade), cascade, np.asarray(h_d, dtype=complex))


@dataclass(frozen=True)
class NoiseSpec:
    """AWGN level for a given Eb/N0 and code rate ``R = k / n``.

    ``sigma_sq = 1 / (2 R Eb/N0)`` is the noise variance of each real
    dimension; a complex sample carries ``2 * sigma_sq`` in total.
    """

    eb_n0_db: float
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"code rate must be positive, got {self.rate}")

    @property
    def sigma_sq(self):
        if math.isinf(self.eb_n0_db) and self.eb_n0_db > 0:
            return 0.0
        return 1.0 / (2.0 * self.rate * 10.0 ** (self.eb_n0_db / 10.0))


def complex_normal(rng, size, variance=1.0):
    """Circularly-symmetric complex Gaussian with ``variance`` per complex sample."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_rayleigh(n_elements, rng, size=()):
    """Draw unit-variance Rayleigh ``G``, ``h`` (length ``n_elements``) and ``h_d``.

    ``n_elements=0`` gives a direct-path-only link.
    """
    if n_elements < 0:
        raise ValueError(f"n_elements must be >= 0, got {n_elements}")
    size = tuple(np.atleast_1d(size)) if size != () else ()
    g = complex_normal(rng, size + (n_elements,))
    h = complex_normal(rng, size + (n_elements,))
    h_d = complex_normal(rng, size)
    return ChannelRealization(g, h, np.asarray(h_d))


def check_unit_modulus(theta, tol=UNIT_MODULUS_TOL):
    err = np.max(np.abs(np.abs(theta) - 1.0), initial=0.0)
    if err > tol:
        raise PhaseConstraintError(f"reflection coefficients deviate from unit modulus by {err:.3g}")


def effective_channel(ch, theta):
    """``h_d + sum_n theta[n] * G[n] * h[n]`` over the last axis."""
    theta = np.asarray(theta)
    if theta.shape[-1] != ch.n_elements:
        raise ValueError(f"theta has {theta.shape[-1]} entries, channel has {ch.n_elements}")
    check_unit_modulus(theta)
    return ch.h_d + np.sum(theta * ch.cascade, axis=-1)


def apply_channel(x, h_eff):
    """Scale ``x`` by the effective channel; ``h_eff`` broadcasts over trailing axes."""
    return np.asarray(h_eff) * x


def add_awgn(y, spec, rng):
    sigma_sq = spec.sigma_sq
    if sigma_sq == 0.0:
        return np.array(y, dtype=complex, copy=True)
    y = np.asarray(y)
    std = math.sqrt(sigma_sq)
    return y + std * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))


def snr(h_eff, spec):
    """Received SNR ``|h_eff|^2 / sigma_sq``."""
    sigma_sq = spec.sigma_sq
    if sigma_sq <= 0:
        raise ValueError("snr needs a finite noise level")
    return np.abs(h_eff) ** 2 / sigma_sq
