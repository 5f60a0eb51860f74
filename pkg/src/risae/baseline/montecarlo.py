"""Monte-Carlo BER of classical modulations over the RIS channel."""
from __future__ import annotations

import logging

import numpy as np

from .. import kernels
from ..channel import NoiseSpec, complex_normal, sample_rayleigh
from ..phase import optimal_phases_closed_form
from ..streams import stream
from .curves import BerCurve, BerPoint

log = logging.getLogger(__name__)

PHASE_SOURCES = ("closed_form", "learned", "none")
CHANNELS = ("rayleigh", "awgn")
DEFAULT_MIN_ERRORS = 200
DEFAULT_MAX_BITS = 10 ** 8


def _effective_channels(n_elements, rng, count, phase_source, ris_net):
    if n_elements == 0:
        return complex_normal(rng, count)
    ch = sample_rayleigh(n_elements, rng, count)
    if phase_source == "none":
        return ch.h_d + ch.cascade.sum(axis=-1)
    if phase_source == "closed_form":
        theta = optimal_phases_closed_form(ch)
    else:
        theta = ris_net.phases(ch)
    return ch.h_d + np.sum(theta * ch.cascade, axis=-1)


def monte_carlo_ber(
    scheme,
    n_elements,
    eb_n0_list,
    min_errors=DEFAULT_MIN_ERRORS,
    max_bits=DEFAULT_MAX_BITS,
    phase_source="closed_form",
    seed=0,
    channel="rayleigh",
    ris_net=None,
    chunk_symbols=1 << 16,
):
    """BER of ``scheme`` with coherent ML detection, one channel draw per symbol.

    Each Eb/N0 point accumulates chunks until ``min_errors`` bit errors or
    ``max_bits`` bits. ``channel="awgn"`` fixes ``h_eff = 1``; with
    ``n_elements=0`` the link is the direct Rayleigh path only.
    """
    if phase_source not in PHASE_SOURCES:
        raise ValueError(f"phase_source must be one of {PHASE_SOURCES}")
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}")
    if phase_source == "learned" and ris_net is None and channel == "rayleigh" and n_elements > 0:
        raise ValueError("phase_source='learned' needs a ris_net")
    k = scheme.k
    const = np.ascontiguousarray(scheme.constellation, dtype=np.complex128)
    warnings = []
    if min_errors < 100:
        warnings.append(f"min_errors={min_errors} is below 100; confidence intervals will be wide")
    points = []
    for i, eb_n0_db in enumerate(sorted(float(e) for e in eb_n0_list)):
        spec = NoiseSpec(eb_n0_db, rate=k)
        std = np.sqrt(spec.sigma_sq)
        errors = 0
        bits = 0
        chunk = 0
        while errors < min_errors and bits < max_bits:
            count = int(min(chunk_symbols, (max_bits - bits) // k))
            if count <= 0:
                break
            rng = stream(seed, "mc", i, chunk)
            labels = rng.integers(0, scheme.order, size=count, dtype=np.int64)
            if channel == "awgn":
                h = np.ones(count, dtype=np.complex128)
            else:
                h = _effective_channels(n_elements, rng, count, phase_source, ris_net)
            y = h * const[labels] + std * (rng.standard_normal(count) + 1j * rng.standard_normal(count))
            errors += int(kernels.ml_detect_errors(
                np.ascontiguousarray(y), np.ascontiguousarray(h, dtype=np.complex128), const, labels
            ))
            bits += count * k
            chunk += 1
        if errors < min_errors:
            warnings.append(f"{eb_n0_db:g} dB stopped at max_bits with {errors} errors")
        points.append(BerPoint(eb_n0_db, errors, bits))
        log.debug("%s N=%d %.2f dB: %d/%d", scheme.name, n_elements, eb_n0_db, errors, bits)
    meta = {
        "name": f"{scheme.name}_{phase_source}_N{n_elements}",
        "scheme": scheme.name,
        "N": n_elements,
        "phase_source": phase_source,
        "channel": channel,
        "csi_mode": "perfect",
        "seed": seed,
        "min_errors": min_errors,
        "max_bits": max_bits,
        "warnings": warnings,
    }
    return BerCurve(points, meta)
