"""Analytic Shepp-Logan head phantom.

The classical ten-ellipse table (modified intensities, so the rasterized
image lies in [0, 1]) is recorded verbatim below.  Columns: additive
intensity, semi-axis a, semi-axis b, center x0, center y0, rotation
angle in degrees.
"""

import numpy as np

from .exceptions import ConfigError

SHEPP_LOGAN_ELLIPSES = (
    (1.00, 0.6900, 0.9200,  0.00,  0.0000,   0.0),
    (-0.98, 0.6624, 0.8740,  0.00, -0.0184,   0.0),
    (-0.02, 0.1100, 0.3100,  0.22,  0.0000, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22,  0.0000,  18.0),
    (0.01, 0.2100, 0.2500,  0.00,  0.3500,   0.0),
    (0.01, 0.0460, 0.0460,  0.00,  0.1000,   0.0),
    (0.01, 0.0460, 0.0460,  0.00, -0.1000,   0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.6050,   0.0),
    (0.01, 0.0230, 0.0230,  0.00, -0.6060,   0.0),
    (0.01, 0.0230, 0.0460,  0.06, -0.6050,   0.0),
)


def gen_shepp_logan(n):
    """Rasterize the phantom at n x n pixel centers; returns a flat vector."""
    if n < 16:
        raise ConfigError("phantom side must be >= 16")
    coords = (2.0 * (np.arange(n) + 0.5)) / n - 1.0
    X, Y = np.meshgrid(coords, -coords)  # row 0 at the top
    img = np.zeros((n, n))
    for intensity, a, b, x0, y0, angle in SHEPP_LOGAN_ELLIPSES:
        phi = np.deg2rad(angle)
        dx = X - x0
        dy = Y - y0
        u = dx * np.cos(phi) + dy * np.sin(phi)
        v = -dx * np.sin(phi) + dy * np.cos(phi)
        img[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += intensity
    return np.clip(img, 0.0, 1.0).ravel()
