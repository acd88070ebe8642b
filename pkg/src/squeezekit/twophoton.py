"""Two-photon (quadrature) algebra for sideband fields.

Fields are described either by their sideband pair (upper sideband at
carrier+Omega, conjugated lower sideband at carrier-Omega) or by the
amplitude/phase quadrature doublet. The first quadrature component is the
amplitude quadrature, the second the phase quadrature. A squeezing factor
r > 0 shrinks the phase quadrature.

All routines are pure and accept scalars or numpy arrays along the last
axes where that makes sense.
"""

import numpy as np

from .errors import SignalNullError

# Sideband -> quadrature basis change. Unitary.
M_QUAD = np.array([[1.0, 1.0], [-1.0j, 1.0j]]) / np.sqrt(2.0)
M_QUAD_INV = M_QUAD.conj().T


def quad_from_sideband(pair):
    """Map a sideband doublet (a_plus, a_minus_conj) to quadratures."""
    return M_QUAD @ np.asarray(pair, dtype=complex)


def sideband_from_quad(quad):
    """Inverse of :func:`quad_from_sideband`."""
    return M_QUAD_INV @ np.asarray(quad, dtype=complex)


def lift_scalar_transfer(f_plus, f_minus_conj):
    """Quadrature 2x2 matrix of a sideband-diagonal transfer.

    ``f_plus`` is the transfer seen by the upper sideband, ``f_minus_conj``
    the conjugate of the transfer at the mirrored lower sideband. For a
    unimodular pair the result is a common phase times a rotation:
    exp(i*(arg p + arg q)/2) * R((arg p - arg q)/2).

    Scalar or array inputs; arrays produce a (..., 2, 2) stack.
    """
    p = np.asarray(f_plus, dtype=complex)
    q = np.asarray(f_minus_conj, dtype=complex)
    s = 0.5 * (p + q)
    d = 0.5j * (p - q)
    out = np.empty(p.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = s
    out[..., 0, 1] = d
    out[..., 1, 0] = -d
    out[..., 1, 1] = s
    return out


def rotation_matrix(theta):
    """Counterclockwise quadrature rotation R(theta)."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(np.shape(theta) + (2, 2), dtype=float)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def rotation_angle_of(transfer):
    """Rotation angle of a (stack of) common-phase 2x2 transfer(s).

    For T = e^{i phi} R(theta) returns theta. Uses the real part of the
    phase-stripped matrix, so small loss-induced imaginary residues are
    ignored rather than propagated.
    """
    t = np.asarray(transfer)
    # common phase from the determinant: det = e^{2 i phi}
    det = t[..., 0, 0] * t[..., 1, 1] - t[..., 0, 1] * t[..., 1, 0]
    phi = 0.5 * np.angle(det)
    rot = np.exp(-1j * phi)[..., None, None] * t
    return np.arctan2(rot[..., 1, 0].real, rot[..., 0, 0].real)


def homodyne_vector(zeta):
    """Readout row vector [cos zeta, sin zeta] (unit norm by construction)."""
    return np.array([np.cos(zeta), np.sin(zeta)])


def squeezed_covariance(r, theta=0.0):
    """Covariance of a squeezed vacuum: R(theta) diag(e^{2r}, e^{-2r}) R(theta)^T."""
    rot = rotation_matrix(theta)
    return rot @ np.diag([np.exp(2.0 * r), np.exp(-2.0 * r)]) @ rot.T


def quantum_noise_psd(transfer, response, r, theta, zeta):
    """Strain-referred quantum noise PSD for one squeezed input.

    transfer : (..., 2, 2) complex quadrature transfer T
    response : (..., 2) complex signal response vector R
    r, theta : squeezing factor and injection rotation angle
    zeta     : homodyne angle

    Returns H T P diag(e^{2r}, e^{-2r}) P^T T^dag H^dag / |H R|^2, which is
    real and nonnegative. Raises SignalNullError when the homodyne is blind
    to the signal (|H R| < 1e-30).
    """
    t = np.asarray(transfer, dtype=complex)
    resp = np.asarray(response, dtype=complex)
    h = homodyne_vector(zeta)

    sig = np.einsum("i,...i->...", h, resp)
    if np.any(np.abs(sig) < 1e-30):
        raise SignalNullError("homodyne vector is orthogonal to the signal response")

    row = np.einsum("i,...ij->...j", h, t)
    cov = squeezed_covariance(r, theta)
    psd = np.einsum("...i,ij,...j->...", row, cov, row.conj())
    return psd.real / np.abs(sig) ** 2


def optimal_rotation_angle(transfer, zeta, unwrap=True):
    """Injection rotation that aligns the squeezed quadrature with the readout.

    Solves tan(theta) = -(T11 cos z + T21 sin z) / (T12 cos z + T22 sin z)
    pointwise with atan2 (so a vanishing denominator is harmless), then
    unwraps the pi-periodic branch along the grid, anchored at the first
    point.
    """
    t = np.asarray(transfer, dtype=complex)
    cz, sz = np.cos(zeta), np.sin(zeta)
    num = t[..., 0, 0] * cz + t[..., 1, 0] * sz
    den = t[..., 0, 1] * cz + t[..., 1, 1] * sz
    # num/den is real for a common-phase transfer; projecting onto the real
    # axis via num*conj(den) keeps the sign information atan2 needs.
    theta = np.arctan2(-(num * den.conj()).real, np.abs(den) ** 2)
    if unwrap and theta.ndim >= 1 and theta.shape[-1] > 1:
        theta = np.unwrap(theta, period=np.pi, axis=-1)
    return theta
