"""Gray-labelled BPSK, QPSK and 16QAM with coherent ML detection.

A symbol's label is the integer formed by its ``k`` bits, most significant
bit first, and ``constellation[label]`` is the point it is sent on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels


@dataclass(frozen=True)
class ModScheme:
    name: str
    k: int
    constellation: np.ndarray

    @property
    def order(self):
        return 2 ** self.k


def _gray_pam4():
    # two-bit Gray labels to amplitudes: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
    levels = np.empty(4)
    levels[0b00], levels[0b01], levels[0b11], levels[0b10] = -3, -1, 1, 3
    return levels


def bpsk():
    return ModScheme("bpsk", 1, np.array([1.0 + 0j, -1.0 + 0j]))


def qpsk():
    labels = np.arange(4)
    i = 1 - 2 * ((labels >> 1) & 1)
    q = 1 - 2 * (labels & 1)
    return ModScheme("qpsk", 2, (i + 1j * q) / np.sqrt(2))


def qam16():
    labels = np.arange(16)
    pam = _gray_pam4()
    points = pam[(labels >> 2) & 3] + 1j * pam[labels & 3]
    return ModScheme("qam16", 4, points / np.sqrt(10))


SCHEMES = {"bpsk": bpsk, "qpsk": qpsk, "qam16": qam16}


def get_scheme(name):
    try:
        return SCHEMES[name]()
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}; expected one of {sorted(SCHEMES)}") from None


def bits_to_labels(bits, k):
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not divisible by k={k}")
    weights = 1 << np.arange(k - 1, -1, -1)
    return bits.reshape(-1, k) @ weights


def labels_to_bits(labels, k):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    shifts = np.arange(k - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).reshape(-1)


def modulate(bits, scheme):
    return scheme.constellation[bits_to_labels(bits, scheme.k)]


def ml_detect(y, h_eff, scheme):
    """Coherent ML detection; returns the Gray-decoded bit stream.

    Equidistant candidates resolve to the lowest constellation index.
    """
    y = np.ascontiguousarray(np.asarray(y, dtype=np.complex128).reshape(-1))
    h = np.ascontiguousarray(
        np.broadcast_to(np.asarray(h_eff, dtype=np.complex128), y.shape)
    )
    labels = kernels.ml_detect(y, h, np.ascontiguousarray(scheme.constellation, dtype=np.complex128))
    return labels_to_bits(labels, scheme.k)
