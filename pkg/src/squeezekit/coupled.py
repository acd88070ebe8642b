"""Two-cavity versus three-mirror coupled-cavity equivalence.

A chain of two detuned filter cavities can be emulated by one coupled cavity
(input mirror IM, middle mirror MM, perfect end mirror) whose two normal
modes are split by omega_s. This module carries the exact and second-order
transfer functions of both layouts, the analytic parameter map between them,
a least-squares fitter, and the check of whether the SRC-arm chain of the
interferometer can play the coupled-cavity role for the idler beam.
"""

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import c
from scipy.optimize import least_squares

from .errors import ApproximationWarning, NumericalError
from .ifo import CavitySpec, cavity_reflection, cavity_roundtrip_phase
from .twophoton import lift_scalar_transfer, rotation_angle_of

T_FLOOR_DEFAULT = 1e-5


@dataclass(frozen=True)
class CoupledCavitySpec:
    """Three-mirror coupled cavity (IM, MM, perfect end mirror)."""

    L1: float            # IM-MM spacing [m]
    L2: float            # MM-end spacing [m]
    T1: float            # IM power transmissivity
    T2: float            # MM power transmissivity
    delta_omega1: float  # front-cavity detuning [rad/s]
    delta_omega2: float  # back-cavity detuning [rad/s]

    def __post_init__(self):
        if self.L1 <= 0.0 or self.L2 <= 0.0:
            raise ValueError("coupled-cavity lengths must be positive")
        if not (0.0 < self.T1 <= 1.0 and 0.0 < self.T2 <= 1.0):
            raise ValueError("transmissivities must lie in (0, 1]")

    @property
    def gamma1(self):
        """Half-bandwidth of the front mode, T1 c / (4 L1)."""
        return self.T1 * c / (4.0 * self.L1)

    @property
    def omega_s(self):
        """Normal-mode splitting frequency, c sqrt(T2) / (2 sqrt(L1 L2))."""
        return c * np.sqrt(self.T2) / (2.0 * np.sqrt(self.L1 * self.L2))


def _phases(spec, Omega):
    Omega = np.asarray(Omega, dtype=float)
    phi1 = 2.0 * (spec.delta_omega1 + Omega) * spec.L1 / c
    phi2 = 2.0 * (spec.delta_omega2 + Omega) * spec.L2 / c
    return phi1, phi2


def _warn_regime(Ts, phis):
    worst_T = max(Ts)
    worst_phi = max(float(np.abs(p).max()) for p in phis)
    if worst_T > 0.1 or worst_phi > 0.3:
        warnings.warn(
            f"second-order expansion outside its regime "
            f"(max T = {worst_T:.3g}, max |phi| = {worst_phi:.3g})",
            ApproximationWarning,
            stacklevel=3,
        )


def two_cavity_transfer_exact(c1, c2, Omega):
    """Upper-sideband reflection off the cascade of two exact cavities."""
    return cavity_reflection(c1, Omega) * cavity_reflection(c2, Omega)


def two_cavity_transfer_approx(c1, c2, Omega):
    """Second-order form of the two-cavity cascade (small T, small phase)."""
    phi1 = cavity_roundtrip_phase(c1, Omega)
    phi2 = cavity_roundtrip_phase(c2, Omega)
    T1, T2 = c1.T_in, c2.T_in
    _warn_regime((T1, T2), (phi1, phi2))
    re = T1 * T2 / 4.0 - phi1 * phi2
    im = 0.5 * (T2 * phi1 + T1 * phi2)
    return (re + 1j * im) / (re - 1j * im)


def coupled_cavity_transfer_exact(spec, Omega):
    """Exact reflection off the three-mirror coupled cavity.

    Nested cascade: the MM plus end mirror form the inner cavity whose
    reflectivity feeds the IM cavity as an effective end mirror. In the
    sign convention where every cavity reflection reads
    (e^{i phi} - r)/(1 - r e^{i phi}), the split-mode operating point has
    the front cavity parked half a free spectral range up, hence the pi in
    phi1: there the response carries the normal-mode doublet at +-omega_s
    that the second-order form describes, symmetric around zero detuning.
    The leading -1 refers the reflection phase to the parked carrier, which
    makes the form reduce to +1 at zero phases and agree pointwise with the
    second-order expansion. Lossless it is unimodular at every real
    frequency; T2 = 1 collapses it to a single cavity of length L1 + L2
    (at the same half-FSR parking).
    """
    phi1, phi2 = _phases(spec, Omega)
    phi1 = phi1 + np.pi
    r1 = np.sqrt(1.0 - spec.T1)
    r2 = np.sqrt(1.0 - spec.T2)
    e1 = np.exp(1j * phi1)
    e2 = np.exp(1j * phi2)
    inner = (e2 - r2) / (1.0 - r2 * e2)
    return -(inner * e1 - r1) / (1.0 - r1 * inner * e1)


def coupled_cavity_transfer_approx(spec, Omega):
    """Second-order form of the coupled-cavity reflection."""
    phi1, phi2 = _phases(spec, Omega)
    _warn_regime((spec.T1, spec.T2), (phi1, phi2))
    re = spec.T2 - phi1 * phi2
    im = 0.5 * spec.T1 * phi2
    return (re + 1j * im) / (re - 1j * im)


def quadrature_rotation(scalar_transfer, Omega, *args):
    """Unwrapped squeeze-ellipse rotation supplied by a scalar reflection."""
    Omega = np.asarray(Omega, dtype=float)
    fp = scalar_transfer(*args, Omega) if args else scalar_transfer(Omega)
    fm = scalar_transfer(*args, -Omega) if args else scalar_transfer(-Omega)
    block = lift_scalar_transfer(fp, np.conj(fm))
    return np.unwrap(rotation_angle_of(block), period=np.pi)


def two_to_coupled_params(gamma1, delta_omega1, L1, gamma2, delta_omega2, L2, L1p=None):
    """Analytic map from two filter cavities to the equivalent coupled cavity.

    The map fixes only the length product L1' L2' = L1 L2; by default the
    lengths are split evenly. Detunings mix with bandwidth weights and the
    splitting frequency absorbs the detuning mismatch:

        gamma1' = gamma1 + gamma2
        dw1' = (gamma1 dw1 + gamma2 dw2) / (gamma1 + gamma2)
        dw2' = (gamma2 dw1 + gamma1 dw2) / (gamma1 + gamma2)
        omega_s^2 = (1 + ((dw1 - dw2)/(gamma1 + gamma2))^2) gamma1 gamma2
    """
    if gamma1 <= 0.0 or gamma2 <= 0.0:
        raise ValueError("bandwidths must be positive")
    if L1p is None:
        L1p = np.sqrt(L1 * L2)
    L2p = L1 * L2 / L1p
    gsum = gamma1 + gamma2
    dw1p = (gamma1 * delta_omega1 + gamma2 * delta_omega2) / gsum
    dw2p = (gamma2 * delta_omega1 + gamma1 * delta_omega2) / gsum
    omega_s = np.sqrt((1.0 + ((delta_omega1 - delta_omega2) / gsum) ** 2) * gamma1 * gamma2)
    return CoupledCavitySpec(
        L1=L1p,
        L2=L2p,
        T1=4.0 * gsum * L1p / c,
        T2=4.0 * omega_s**2 * L1p * L2p / c**2,
        delta_omega1=dw1p,
        delta_omega2=dw2p,
    )


def coupled_from_solution(solution, L1p=None):
    """two_to_coupled_params applied to a two-cavity FilterSolution."""
    c1, c2 = solution.cavities
    return two_to_coupled_params(
        c1.gamma, c1.delta_omega, c1.length, c2.gamma, c2.delta_omega, c2.length, L1p=L1p
    )


def inverse_coupled_params(spec):
    """Invert the analytic map back to two (gamma, delta_omega) pairs.

    Matching real and imaginary second-order coefficients gives four
    conserved combinations; eliminating the bandwidth split reduces the
    inversion to one quadratic in the detuning split. Returns
    (gamma1, dw1, gamma2, dw2) sorted by descending bandwidth.
    """
    S = spec.gamma1
    D = spec.delta_omega1 + spec.delta_omega2
    split = spec.delta_omega1 - spec.delta_omega2
    ws2 = spec.omega_s**2
    # (S^2 + d^2)(d^2 - split^2) = 4 ws^2 d^2 with d the detuning difference
    b = S**2 - split**2 - 4.0 * ws2
    u = 0.5 * (-b + np.sqrt(b**2 + 4.0 * S**2 * split**2))
    d = np.sqrt(u) * (1.0 if split >= 0.0 else -1.0)
    g = S * split / d if d != 0.0 else np.sqrt(max(S**2 - 4.0 * ws2, 0.0))
    gamma1 = 0.5 * (S + g)
    gamma2 = 0.5 * (S - g)
    dw1 = 0.5 * (D + d)
    dw2 = 0.5 * (D - d)
    if gamma1 >= gamma2:
        return gamma1, dw1, gamma2, dw2
    return gamma2, dw2, gamma1, dw1


def fit_coupled_params(grid, target, init, gtol=1e-10, max_iter=500):
    """Least-squares fit of coupled-cavity parameters to a target transfer.

    Optimizes (dw1', dw2', gamma1', omega_s) with the lengths of ``init``
    held fixed; the residual is the complex transfer difference, which
    avoids phase-unwrapping branch issues. Raises on non-convergence with
    the best iterate attached to the exception.
    """
    grid = np.asarray(grid, dtype=float)
    target = np.asarray(target, dtype=complex)
    L1p, L2p = init.L1, init.L2
    scale = 2.0 * np.pi * 10.0

    def build(x):
        dw1, dw2, g1, ws = x * scale
        return CoupledCavitySpec(
            L1=L1p,
            L2=L2p,
            T1=4.0 * g1 * L1p / c,
            T2=4.0 * ws**2 * L1p * L2p / c**2,
            delta_omega1=dw1,
            delta_omega2=dw2,
        )

    def resid(x):
        try:
            diff = coupled_cavity_transfer_exact(build(x), grid) - target
        except ValueError:
            return np.full(2 * grid.size, 1e6)
        return np.concatenate([diff.real, diff.imag])

    x0 = np.array([init.delta_omega1, init.delta_omega2, init.gamma1, init.omega_s]) / scale
    tiny = 1e-9
    lower = np.array([-np.inf, -np.inf, tiny, tiny])
    res = least_squares(resid, x0, method="trf", bounds=(lower, np.inf),
                        gtol=gtol, xtol=1e-15, ftol=None,
                        max_nfev=max_iter * (x0.size + 1))
    # status > 0 means one of the gtol/xtol/ftol criteria was met; 0 is the
    # evaluation budget running out, -1 an infeasible problem
    if res.status <= 0:
        grad = res.jac.T @ res.fun
        raise NumericalError(
            f"coupled-cavity fit did not converge "
            f"(gradient norm {np.linalg.norm(grad, np.inf):.3e} after {res.njev} iterations)",
            best=build(res.x),
        )
    fitted = build(res.x)
    return fitted, res.njev


# ---------------------------------------------------------------------------
# SRC-arm feasibility

@dataclass(frozen=True)
class EquivalenceReport:
    """Outcome of an equivalence or feasibility comparison."""

    analytic: CoupledCavitySpec
    fitted: object = None            # CoupledCavitySpec or None
    rotation_error: float = np.nan   # max |rotation mismatch| [rad]
    required_T: float = np.nan       # middle-mirror transmissivity demanded
    actual_T: float = np.nan         # transmissivity available in hardware
    feasible: bool = False


def _rotation_mismatch(spec, c1, c2, grid):
    """Max rotation deviation, one constant (input-ellipse) offset removed."""
    th_two = quadrature_rotation(two_cavity_transfer_exact, grid, c1, c2)
    th_cpl = quadrature_rotation(coupled_cavity_transfer_exact, grid, spec)
    diff = th_cpl - th_two
    return float(np.abs(diff - diff[0]).max())


def _labelled_cavities(solution):
    """Two-cavity CavitySpecs in the root-labeling detuning convention."""
    return tuple(
        CavitySpec(length=cav.length, T_in=cav.T_in, detuning=cav.delta_omega)
        for cav in solution.cavities
    )


def equivalence_report(solution, grid, T_floor=T_FLOOR_DEFAULT):
    """Analytic map, numeric fit and rotation agreement for a two-cavity target."""
    c1, c2 = _labelled_cavities(solution)
    analytic = coupled_from_solution(solution)
    target = two_cavity_transfer_exact(c1, c2, grid)
    fitted, _ = fit_coupled_params(grid, target, analytic)
    err = _rotation_mismatch(fitted, c1, c2, grid)
    return EquivalenceReport(
        analytic=analytic,
        fitted=fitted,
        rotation_error=err,
        required_T=analytic.T2,
        actual_T=np.nan,
        feasible=bool(analytic.T2 >= T_floor),
    )


def src_arm_feasibility(cfg, solution, grid=None, T_floor=T_FLOOR_DEFAULT):
    """Can the SRC-arm chain act as the coupled filter for the idler beam?

    The idler-beam phases of the SRC-arm chain reduce exactly to the
    coupled-cavity phases, so the comparison runs on the coupled transfer
    with every adjustable constraint honored (lengths via the product rule,
    SRC bandwidth and detunings from the analytic map) while the splitting
    frequency is pinned by the hardware: omega_s = c sqrt(T_ITM) /
    (2 sqrt(L1' L2')). The verdict follows the required middle-mirror
    transmissivity against the manufacturability floor.
    """
    if grid is None:
        from .filters import default_grid
        grid = default_grid()
    if len(solution.cavities) != 2:
        raise ValueError("src_arm_feasibility needs a two-cavity target")
    analytic = coupled_from_solution(solution)
    required_T = analytic.T2
    actual = dataclasses.replace(analytic, T2=cfg.T_ITM)
    s1, s2 = _labelled_cavities(solution)
    err = _rotation_mismatch(actual, s1, s2, grid)
    return EquivalenceReport(
        analytic=analytic,
        fitted=None,
        rotation_error=err,
        required_T=required_T,
        actual_T=cfg.T_ITM,
        feasible=bool(required_T >= T_floor and abs(required_T - cfg.T_ITM) <= 0.05 * required_T),
    )
