"""Closed-form kernels for 3x3 complex matrices (one phase block)."""

import numpy as np

from .errors import SingularMatrixError

# |det z| must exceed this times max|z_ij|**3
SINGULAR_RTOL = 1e-12


def det3(z):
    z = np.asarray(z)
    return (
        z[0, 0] * (z[1, 1] * z[2, 2] - z[1, 2] * z[2, 1])
        - z[0, 1] * (z[1, 0] * z[2, 2] - z[1, 2] * z[2, 0])
        + z[0, 2] * (z[1, 0] * z[2, 1] - z[1, 1] * z[2, 0])
    )


def is_singular(z):
    """True when ``z`` fails the scale-invariant determinant test."""
    z = np.asarray(z)
    scale = np.abs(z).max()
    return not abs(det3(z)) > SINGULAR_RTOL * scale**3


def invert3(z):
    """Invert a 3x3 complex matrix through its adjugate.

    Raises SingularMatrixError when ``|det z| <= 1e-12 * max|z_ij|**3``.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {z.shape}")
    if is_singular(z):
        raise SingularMatrixError("series impedance matrix is singular")
    adj = np.empty((3, 3), dtype=complex)
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            # cyclic cofactor ordering absorbs the (-1)**(i+j) sign
            adj[j, i] = z[i1, j1] * z[i2, j2] - z[i1, j2] * z[i2, j1]
    return adj / det3(z)
