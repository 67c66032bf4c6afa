"""RGB -> HSI conversion (classical arccos model).

All per-channel statistics downstream operate on hue, saturation,
intensity and NIR planes. Hue is returned as angle / 2*pi so every plane
lives in [0, 1]. Achromatic pixels get H = 0, S = 0 by convention, which
keeps every feature finite.
"""

from __future__ import annotations

import numpy as np


def rgb_to_hsi(r: np.ndarray, g: np.ndarray, b: np.ndarray):
    """Convert unit-scaled R, G, B planes to (hue, saturation, intensity).

    I = (R+G+B)/3
    S = 1 - 3*min(R,G,B)/(R+G+B), 0 for black pixels
    H = theta/2pi if B <= G else (2pi - theta)/2pi, with
        theta = arccos(((R-G)+(R-B)) / (2*sqrt((R-G)^2 + (R-B)(G-B))))
    and H = 0 wherever the denominator vanishes.
    """
    r = np.asarray(r, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (r.shape == g.shape == b.shape):
        raise ValueError("R, G, B planes must share dimensions")

    total = r + g + b
    intensity = total / 3.0

    minimum = np.minimum(np.minimum(r, g), b)
    with np.errstate(divide="ignore", invalid="ignore"):
        saturation = np.where(total > 0.0, 1.0 - 3.0 * minimum / np.where(total > 0, total, 1.0), 0.0)
    saturation = np.clip(saturation, 0.0, 1.0)

    num = 0.5 * ((r - g) + (r - b))
    den = np.sqrt((r - g) ** 2 + (r - b) * (g - b))
    safe = den > 0.0
    cos_theta = np.clip(np.where(safe, num / np.where(safe, den, 1.0), 0.0), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    hue = np.where(b <= g, theta, 2.0 * np.pi - theta) / (2.0 * np.pi)
    hue = np.where(safe, hue, 0.0)
    return hue, saturation, intensity
