"""Pure numpy versions of the hot loops in ``_ckernels.pyx``.

Both backends return identical results: ties are resolved toward the lowest
index in the same way, and the search tolerance is shared.
"""
import numpy as np

# grid points within this relative distance of the maximum count as ties
SEARCH_TIE_RTOL = 1e-12
_CHUNK = 1 << 16


def _grid_values(table, h_d, start, stop):
    n, levels = table.shape
    idx = np.arange(start, stop, dtype=np.int64)
    vals = np.full(idx.size, h_d, dtype=np.complex128)
    # accumulate element 0 first, matching the compiled kernel's summation order
    for el in range(n):
        vals += table[el, (idx // levels ** (n - 1 - el)) % levels]
    return np.abs(vals)


def _digits(index, n, levels):
    out = np.empty(n, dtype=np.int64)
    for el in range(n - 1, -1, -1):
        out[el] = index % levels
        index //= levels
    return out


def exhaustive_search(cascade, h_d, levels):
    """Return ``(digits, best_abs)`` of the best lexicographic grid point."""
    n = cascade.shape[0]
    rot = np.exp(2j * np.pi * np.arange(levels) / levels)
    table = cascade[:, None] * rot[None, :]
    total = levels ** n
    best = -1.0
    for start in range(0, total, _CHUNK):
        best = max(best, float(_grid_values(table, h_d, start, min(total, start + _CHUNK)).max()))
    threshold = best * (1.0 - SEARCH_TIE_RTOL)
    for start in range(0, total, _CHUNK):
        vals = _grid_values(table, h_d, start, min(total, start + _CHUNK))
        hits = np.flatnonzero(vals >= threshold)
        if hits.size:
            i = start + int(hits[0])
            return _digits(i, n, levels), float(vals[hits[0]])
    raise AssertionError("unreachable: maximum not found on second pass")


def ml_detect(y, h, constellation):
    """Index of the nearest ``h * c`` for every sample; lowest index wins ties."""
    dist = np.abs(y[:, None] - h[:, None] * constellation[None, :]) ** 2
    return np.argmin(dist, axis=1).astype(np.int64)


def bit_errors(a, b):
    return int(np.bitwise_count(np.bitwise_xor(a.astype(np.int64), b.astype(np.int64))).sum())


def ml_detect_errors(y, h, constellation, labels):
    return bit_errors(ml_detect(y, h, constellation), labels)


def adam_step(p, g, m, v, b1, b2, step_size, inv_c2, eps, tmp=None):
    """One fused Adam step on flat arrays, updating ``p``, ``m`` and ``v`` in place."""
    tmp = np.empty_like(p) if tmp is None else tmp
    m *= b1
    np.multiply(g, 1.0 - b1, out=tmp)
    m += tmp
    v *= b2
    np.multiply(g, g, out=tmp)
    tmp *= 1.0 - b2
    v += tmp
    np.sqrt(v, out=tmp)
    tmp *= inv_c2
    tmp += eps
    np.divide(m, tmp, out=tmp)
    tmp *= step_size
    p -= tmp
