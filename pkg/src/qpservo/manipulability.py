"""Yoshikawa manipulability and its gradient w.r.t. joint coordinates.

Both functions operate on whatever Jacobian block the caller hands in, so
planar test arms can use the 2x2 positional block while full arms use all
six rows.
"""

from __future__ import annotations

import numpy as np

EPS_SINGULAR = 1e-8
_COND_LIMIT = 1e12


class SingularityError(RuntimeError):
    """The Jacobian Gram matrix is too ill-conditioned to differentiate m."""


def manipulability(J: np.ndarray) -> float:
    """sqrt(det(J J^T)); zero at singularities.

    Determinants that are only negative through round-off (|det| < 1e-14)
    are clamped to zero.
    """
    J = np.asarray(J, dtype=float)
    gram = J @ J.T
    det = np.linalg.det(gram)
    if det < 0.0:
        if abs(det) < 1e-14:
            det = 0.0
        else:
            raise ValueError(f"det(JJ^T) = {det} is negative beyond round-off")
    return float(np.sqrt(det))


def manipulability_jacobian(J: np.ndarray, H: np.ndarray, m: float) -> np.ndarray:
    """Gradient of the manipulability measure, one entry per joint.

    Component i is m * vec(J H_i^T)^T vec((JJ^T)^-1) with H_i = H[:, :, i]
    and vec(.) stacking columns; this equals dm/dq_i.

    Raises SingularityError when m is at or below EPS_SINGULAR or the Gram
    matrix condition number exceeds 1e12; the caller decides the fallback.
    """
    J = np.asarray(J, dtype=float)
    H = np.asarray(H, dtype=float)
    if m <= EPS_SINGULAR:
        raise SingularityError(f"manipulability {m} <= {EPS_SINGULAR}")
    gram = J @ J.T
    if np.linalg.cond(gram) > _COND_LIMIT:
        raise SingularityError("Jacobian Gram matrix condition number exceeds 1e12")
    gram_inv = np.linalg.inv(gram)

    n = J.shape[1]
    out = np.empty(n)
    for i in range(n):
        # vec(A)^T vec(B) is just the elementwise-product sum
        out[i] = m * np.sum((J @ H[:, :, i].T) * gram_inv)
    return out
