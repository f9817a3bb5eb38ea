"""Where a CSS code can still correct independent X and Z errors.

The bound 1 - H(p_x) - H(p_z) is the largest achievable rate.  Its zero
contour separates correctable from uncorrectable error rates.
"""
from __future__ import annotations

import numpy as np

from toricsim.analysis import bound_contour, css_bound, symmetric_zero

print(f"unbiased zero: p = {symmetric_zero():.6f}")
for p_x in np.linspace(0.02, 0.2, 10):
    p_z = bound_contour(p_x)
    print(f"p_x = {p_x:.3f}  ->  p_z = {p_z:.4f}   (bound there: {css_bound(p_x, p_z):.1e})")
