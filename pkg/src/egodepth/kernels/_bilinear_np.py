"""Pure-numpy bilinear sampling kernel with intensity derivatives.

Semantics shared with the compiled twin in _bilinear_fast.pyx:
  - coordinates are (col u, row v) with pixel centers at integers
  - out-of-bounds samples return zero value and zero derivative
  - exactly-integer coordinates use the left/lower cell's derivative
    (value is unaffected; keeps the choice at cell boundaries fixed)
"""

import numpy as np


def bilinear_sample_grad(source, u, v):
    """Sample `source` (H, W, C) at coordinates (u, v), each shape (N,).

    Returns (values, dval_du, dval_dv), each (N, C).
    """
    source = np.ascontiguousarray(source, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    h, w, _ = source.shape

    inb = (u >= 0.0) & (u <= w - 1.0) & (v >= 0.0) & (v <= h - 1.0)
    uc = np.where(inb, u, 0.0)
    vc = np.where(inb, v, 0.0)

    i0 = np.floor(uc).astype(np.intp)
    j0 = np.floor(vc).astype(np.intp)
    # integer coordinate: step back to the left/lower cell
    i0 = np.where((uc == i0) & (i0 >= 1), i0 - 1, i0)
    j0 = np.where((vc == j0) & (j0 >= 1), j0 - 1, j0)
    fu = (uc - i0)[:, None]
    fv = (vc - j0)[:, None]

    s00 = source[j0, i0]
    s01 = source[j0, i0 + 1]
    s10 = source[j0 + 1, i0]
    s11 = source[j0 + 1, i0 + 1]

    values = (1.0 - fv) * ((1.0 - fu) * s00 + fu * s01) + fv * (
        (1.0 - fu) * s10 + fu * s11
    )
    dval_du = (1.0 - fv) * (s01 - s00) + fv * (s11 - s10)
    dval_dv = (1.0 - fu) * (s10 - s00) + fu * (s11 - s01)

    outside = ~inb
    values[outside] = 0.0
    dval_du[outside] = 0.0
    dval_dv[outside] = 0.0
    return values, dval_du, dval_dv
