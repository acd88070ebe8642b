"""Inspiral horizon reach of a quantum-noise curve.

Restricted post-Newtonian amplitude truncated at the redshifted ISCO,
a network of three detectors with 60 degree opening angles, and flat
Lambda-CDM distances. Threshold and cosmology are module constants and
belong in any emitted artifact header: reach numbers only mean anything
relative to those choices, and comparisons between schemes must share
them.
"""

from dataclasses import dataclass

import numpy as np
from scipy.constants import c, parsec
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError
from .kernels import cumtrapz

GM_SUN = 1.32712440018e20  # G * M_sun [m^3 s^-2]
MPC = 1e6 * parsec
H0 = 67.9e3 / MPC  # [1/s]
OMEGA_M = 0.3065
SNR_THRESHOLD = 8.0
DETECTOR_COUNT = 3
OPENING_ANGLE = np.pi / 3.0
Z_MAX = 5000.0


@dataclass(frozen=True)
class HorizonCurve:
    """Horizon redshift and luminosity distance over total source-frame mass."""

    masses: np.ndarray  # [M_sun]
    redshift: np.ndarray
    distance_mpc: np.ndarray


def chirp_mass(total_mass):
    """Equal-mass chirp mass for a given total mass, same units."""
    return np.asarray(total_mass, dtype=float) * 0.25**0.6


def isco_frequency(total_mass):
    """Source-frame ISCO gravitational-wave frequency [Hz], mass in M_sun."""
    return c**3 / (6.0**1.5 * np.pi * GM_SUN * np.asarray(total_mass, dtype=float))


_COSMO_TABLE = None


def _cosmology_table():
    global _COSMO_TABLE
    if _COSMO_TABLE is None:
        z = np.concatenate([[0.0], np.logspace(-6.0, np.log10(Z_MAX), 4096)])
        efunc = np.sqrt(OMEGA_M * (1.0 + z) ** 3 + (1.0 - OMEGA_M))
        _COSMO_TABLE = (z, (c / H0) * cumtrapz(1.0 / efunc, z))
    return _COSMO_TABLE


def luminosity_distance(z):
    """Flat Lambda-CDM luminosity distance [m]."""
    z_table, comoving = _cosmology_table()
    return (1.0 + np.asarray(z, dtype=float)) * np.interp(z, z_table, comoving)


def _band_table(curve, points=8193):
    """Cumulative integral of f^{-7/3} / S over the curve's band.

    The PSD is interpolated log-log onto a dense grid so the integral can
    be cut at any ISCO frequency by interpolation.
    """
    freq = np.asarray(curve.freq_hz, dtype=float)
    psd = np.asarray(curve.psd_total, dtype=float)
    fx = np.logspace(np.log10(freq[0]), np.log10(freq[-1]), points)
    sx = np.exp(np.interp(np.log(fx), np.log(freq), np.log(psd)))
    return fx, cumtrapz(fx ** (-7.0 / 3.0) / sx, fx)


def network_snr(curve, total_mass, z, detector_count=DETECTOR_COUNT,
                opening_angle=OPENING_ANGLE, _table=None):
    """Optimally oriented network SNR of an equal-mass inspiral.

    total_mass is the source-frame total mass in M_sun; the amplitude uses
    the redshifted chirp mass and the band integral stops at the
    redshifted ISCO (zero once that falls below the curve's band).
    """
    fx, cum = _table if _table is not None else _band_table(curve)
    z = np.asarray(z, dtype=float)
    gm_chirp = chirp_mass(total_mass) * (1.0 + z) * GM_SUN
    f_hi = isco_frequency(total_mass) / (1.0 + z)
    band = np.interp(f_hi, fx, cum)
    dist = luminosity_distance(z)
    amp2 = (5.0 / 24.0) * np.pi ** (-4.0 / 3.0) * gm_chirp ** (5.0 / 3.0) / (c**3 * dist**2)
    response2 = np.sin(opening_angle) ** 2
    return np.sqrt(4.0 * detector_count * response2 * amp2 * band)


def horizon_reach(curve, mass_grid, detector_count=DETECTOR_COUNT,
                  opening_angle=OPENING_ANGLE, threshold=SNR_THRESHOLD):
    """Largest redshift reaching the SNR threshold, per total mass.

    The SNR is not monotone in z once the redshifted ISCO approaches the
    band's low edge, so the crossing is located from the far side of a
    redshift scan; masses whose SNR never reaches threshold get zero
    reach rather than an error.
    """
    masses = np.atleast_1d(np.asarray(mass_grid, dtype=float))
    if masses.ndim != 1 or masses.size == 0 or np.any(masses <= 0.0):
        raise ConfigError("mass grid must be a one-dimensional positive array")
    freq = np.asarray(curve.freq_hz, dtype=float)
    if freq[0] > 1.0 + 1e-9 or freq[-1] < 100.0 - 1e-9:
        raise ConfigError("noise curve must cover 1-100 Hz for horizon reach")

    table = _band_table(curve)
    z_grid = np.logspace(-6.0, np.log10(Z_MAX), 1200)
    redshifts = np.empty_like(masses)
    for i, mass in enumerate(masses):
        snr = network_snr(curve, mass, z_grid, detector_count, opening_angle, _table=table)
        above = snr >= threshold
        if not above.any():
            redshifts[i] = 0.0
            continue
        last = np.nonzero(above)[0][-1]
        if last == z_grid.size - 1:
            raise NumericalError(
                f"horizon for {mass:g} M_sun exceeds the z = {Z_MAX:g} table"
            )

        def crossing(zz):
            return float(
                network_snr(curve, mass, zz, detector_count, opening_angle, _table=table)
            ) - threshold

        redshifts[i] = brentq(crossing, z_grid[last], z_grid[last + 1], xtol=1e-10)
    return HorizonCurve(
        masses=masses,
        redshift=redshifts,
        distance_mpc=luminosity_distance(redshifts) / MPC,
    )
