"""Three-point finite-difference stencils on non-uniform grids.

All helpers broadcast over leading axes: the sample values may be scalars,
per-node vectors, or (N, 2) arrays, while the spacings are scalars or
per-node arrays.
"""

from __future__ import annotations

import numpy as np


def centered_first_derivative(fm, f0, fp, hm, hp):
    """First derivative at the middle point of samples (fm, f0, fp) with
    spacings hm = t0 - t(-1), hp = t(+1) - t0. Second order for smooth data."""
    hm = np.asarray(hm, dtype=float)
    hp = np.asarray(hp, dtype=float)
    a = -hp / (hm * (hm + hp))
    b = (hp - hm) / (hm * hp)
    c = hm / (hp * (hm + hp))
    return a * fm + b * f0 + c * fp


def onesided_first_derivative(f0, f1, f2, h1, h2):
    """First derivative at the leftmost of three samples, spacings
    h1 = t1 - t0 and h2 = t2 - t1. Second order."""
    h1 = float(h1)
    h2 = float(h2)
    a = -(2.0 * h1 + h2) / (h1 * (h1 + h2))
    b = (h1 + h2) / (h1 * h2)
    c = -h1 / (h2 * (h1 + h2))
    return a * f0 + b * f1 + c * f2


def nonuniform_second_derivative(fm, f0, fp, hm, hp):
    """Second derivative at the middle point on a non-uniform 3-point stencil.

    Exactly annihilates constants (the coefficients sum to zero)."""
    hm = np.asarray(hm, dtype=float)
    hp = np.asarray(hp, dtype=float)
    return 2.0 * (fm / (hm * (hm + hp)) - f0 / (hm * hp) + fp / (hp * (hm + hp)))
