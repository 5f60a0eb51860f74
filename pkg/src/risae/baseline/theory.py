"""Closed-form reference BERs used to calibrate the Monte-Carlo harness."""
import numpy as np
from scipy.special import erfc


def qfunc(x):
    return 0.5 * erfc(np.asarray(x) / np.sqrt(2.0))


def db2lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def bpsk_awgn_ber(eb_n0_db):
    return qfunc(np.sqrt(2.0 * db2lin(eb_n0_db)))


def bpsk_rayleigh_ber(eb_n0_db):
    g = db2lin(eb_n0_db)
    return 0.5 * (1.0 - np.sqrt(g / (1.0 + g)))


def binomial_sigma(p, n):
    return np.sqrt(np.asarray(p) * (1.0 - np.asarray(p)) / n)


def within_sigmas(errors, total, p, k=3.0):
    """True when the measured rate lies within ``k`` binomial sigmas of ``p``."""
    return abs(errors / total - p) <= k * binomial_sigma(p, total)
