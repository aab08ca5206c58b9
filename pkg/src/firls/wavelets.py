"""Periodized orthonormal discrete wavelet transforms.

Decimated Mallat-layout transforms for 1D signals and square 2D images
whose sides are powers of two.  All routines broadcast over leading batch
dimensions and only touch the trailing axis (1D) or the trailing two axes
(2D).  The analysis and synthesis steps are exact transposes of each
other, so for the orthonormal filters below the inverse is the adjoint.
"""

import numpy as np

from .exceptions import ConfigError

_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)

#: Orthonormal scaling (lowpass) filters by family name.
FILTERS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db4": np.array(
        [1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3]
    ) / (4.0 * _SQRT2),
}


def highpass_filter(h):
    """Quadrature mirror filter g[k] = (-1)^k h[f-1-k]."""
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


def max_levels(length, filter_len):
    """Deepest decomposition keeping every split input >= filter length."""
    levels = 0
    while length % 2 == 0 and length >= filter_len and length >= 2:
        levels += 1
        length //= 2
    return levels


def _analysis(x, h, g):
    # x: (..., L) with L even -> (a, d), each (..., L // 2).
    L = x.shape[-1]
    f = h.shape[0]
    xp = np.concatenate([x, x[..., : f - 2]], axis=-1) if f > 2 else x
    half = L // 2
    a = h[0] * xp[..., 0:L:2]
    d = g[0] * xp[..., 0:L:2]
    for m in range(1, f):
        seg = xp[..., m : m + L : 2][..., :half]
        a = a + h[m] * seg
        d = d + g[m] * seg
    return a, d


def _synthesis(a, d, h, g):
    # Exact transpose of _analysis.
    half = a.shape[-1]
    L = 2 * half
    f = h.shape[0]
    xp = np.zeros(a.shape[:-1] + (L + f - 2,), dtype=np.result_type(a, d))
    for m in range(f):
        xp[..., m : m + L : 2] += h[m] * a + g[m] * d
    x = xp[..., :L].copy()
    if f > 2:
        x[..., : f - 2] += xp[..., L:]
    return x


def _check_length(L, levels, f):
    if L & (L - 1) != 0 or L < 2:
        raise ConfigError(f"signal length {L} is not a power of two")
    if levels < 0 or levels > max_levels(L, f):
        raise ConfigError(
            f"{levels} levels not supported for length {L} with "
            f"filter length {f}"
        )


def forward_1d(x, h, g, levels):
    """Multi-level DWT along the last axis; layout [a_L | d_L | ... | d_1]."""
    x = np.asarray(x, dtype=float)
    L = x.shape[-1]
    _check_length(L, levels, h.shape[0])
    c = x.copy()
    for _ in range(levels):
        a, d = _analysis(c[..., :L], h, g)
        c[..., : L // 2] = a
        c[..., L // 2 : L] = d
        L //= 2
    return c


def inverse_1d(c, h, g, levels):
    c = np.asarray(c, dtype=float)
    Lfull = c.shape[-1]
    _check_length(Lfull, levels, h.shape[0])
    x = c.copy()
    L = Lfull >> levels
    for _ in range(levels):
        x[..., : 2 * L] = _synthesis(x[..., :L], x[..., L : 2 * L], h, g)
        L *= 2
    return x


def _analysis_2d_block(blk, h, g):
    # Separable single-level step on a square block (..., m, m).
    a, d = _analysis(blk, h, g)
    blk = np.concatenate([a, d], axis=-1)
    a, d = _analysis(np.swapaxes(blk, -1, -2), h, g)
    return np.swapaxes(np.concatenate([a, d], axis=-1), -1, -2)


def _synthesis_2d_block(blk, h, g):
    m = blk.shape[-1]
    half = m // 2
    t = np.swapaxes(blk, -1, -2)
    t = _synthesis(t[..., :half], t[..., half:], h, g)
    t = np.swapaxes(t, -1, -2)
    return _synthesis(t[..., :half], t[..., half:], h, g)


def forward_2d(img, h, g, levels):
    """Multi-level separable DWT on the trailing two (n, n) axes."""
    img = np.asarray(img, dtype=float)
    n = img.shape[-1]
    if img.shape[-2] != n:
        raise ConfigError("2D transform requires square images")
    _check_length(n, levels, h.shape[0])
    x = img.copy()
    m = n
    for _ in range(levels):
        x[..., :m, :m] = _analysis_2d_block(x[..., :m, :m], h, g)
        m //= 2
    return x


def inverse_2d(coeffs, h, g, levels):
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    if coeffs.shape[-2] != n:
        raise ConfigError("2D transform requires square images")
    _check_length(n, levels, h.shape[0])
    x = coeffs.copy()
    m = n >> (levels - 1) if levels else n
    for _ in range(levels):
        x[..., :m, :m] = _synthesis_2d_block(x[..., :m, :m], h, g)
        m *= 2
    return x
