"""Filter cavity synthesis from the required squeeze rotation.

The required frequency-dependent rotation of a detuned dual-recycled
interferometer is, in the resolved-sideband model, an exact ratio of real
polynomials in Omega^2. Fitting that ratio and factoring

    sum_k (A_k + i B_k) Omega^{2k} = prod_j (Omega^2 + (gamma_j - i dw_j)^2)

hands over the cascade parameters directly: each factor is one filter cavity
of half-bandwidth gamma_j and detuning dw_j. Note the roots of the left-hand
side sit at +-(dw_j + i gamma_j), i.e. the bandwidth is the imaginary part;
``extract_filter_params`` reads them off accordingly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c

from .errors import NoSolutionError, NumericalError
from .ifo import CavitySpec, cavity_quad_reflection, internal_homodyne_angle, signal_transfer
from .twophoton import optimal_rotation_angle, rotation_angle_of

DEFAULT_FILTER_LENGTH = 1000.0


def default_grid(fmin=1.0, fmax=100.0, points=200):
    """Logarithmic angular-frequency grid [rad/s]."""
    return 2.0 * np.pi * np.logspace(np.log10(fmin), np.log10(fmax), points)


def required_rotation_angle(cfg, grid):
    """Rotation angle the input squeezing must carry, on the given grid."""
    transfer = signal_transfer(cfg, grid)
    return optimal_rotation_angle(transfer, internal_homodyne_angle(cfg.zeta_s))


@dataclass(frozen=True)
class RotationPolynomial:
    """tan(theta)(Omega) = sum B_k Omega^{2k} / sum A_k Omega^{2k}.

    Coefficients are normalized so the largest entry of (A, B) is +1;
    the overall scale and sign carry no information.
    """

    A: np.ndarray
    B: np.ndarray
    residual: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.shape != B.shape or A.ndim != 1 or A.size < 2:
            raise ValueError("A and B must be equal-length 1-d arrays, degree >= 1")
        if not np.any(A**2 + B**2 > 0.0):
            raise ValueError("all-zero polynomial")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def degree(self):
        return self.A.size - 1

    def tan_theta(self, Omega):
        x = np.asarray(Omega, dtype=float) ** 2
        return np.polyval(self.B[::-1], x) / np.polyval(self.A[::-1], x)


@dataclass(frozen=True)
class FilterCavity:
    """One synthesized filter cavity."""

    gamma: float        # half-bandwidth [rad/s]
    delta_omega: float  # detuning [rad/s]
    length: float       # [m]

    @property
    def T_in(self):
        """Input mirror power transmissivity of the equivalent single-pole cavity."""
        return 4.0 * self.gamma * self.length / c

    def spec(self, loss=0.0, detuning_offset=0.0):
        """Physical cavity realizing this rotation stage.

        The quoted delta_omega follows the root-labeling convention; in the
        sideband phase convention 2(detuning + Omega)L/c of CavitySpec the
        cavity that supplies the required rotation sits at -delta_omega.
        """
        return CavitySpec(
            length=self.length,
            T_in=self.T_in,
            detuning=-self.delta_omega + detuning_offset,
            loss=loss,
        )


@dataclass(frozen=True)
class FilterSolution:
    cavities: tuple

    def __post_init__(self):
        object.__setattr__(self, "cavities", tuple(self.cavities))
        if any(cav.gamma <= 0.0 for cav in self.cavities):
            raise ValueError("every filter cavity needs a positive bandwidth")


def fit_rotation_polynomial(cfg, grid=None, n=2, residual_limit=1e-6):
    """Least-squares fit of tan(theta_required) as a degree-n rational in Omega^2.

    The fit is the null vector of the homogeneous system
    A(x) sin(theta) - B(x) cos(theta) = 0, which avoids evaluating tan near
    its poles. The relative residual is the ratio of smallest to largest
    singular value; exceeding residual_limit means the rotation is not
    rational of this degree and raises.
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size < 4 * n + 4:
        raise ValueError(f"need at least {4 * n + 4} grid points for degree {n}")
    theta = required_rotation_angle(cfg, grid)
    return _fit_angles(grid, theta, n, residual_limit)


def _fit_angles(grid, theta, n, residual_limit):
    scale = grid.max()
    powers = (grid[:, None] / scale) ** (2 * np.arange(n + 1)[None, :])
    rows = np.concatenate(
        [np.sin(theta)[:, None] * powers, -np.cos(theta)[:, None] * powers], axis=1
    )
    _, sv, Vt = np.linalg.svd(rows, full_matrices=False)
    residual = sv[-1] / sv[0]
    if not residual < residual_limit:
        raise NumericalError(
            f"rotation angle is not rational of degree {n} in Omega^2 "
            f"(relative fit residual {residual:.3e} >= {residual_limit:.1e})"
        )
    coef = Vt[-1]
    A = coef[: n + 1] / scale ** (2 * np.arange(n + 1))
    B = coef[n + 1:] / scale ** (2 * np.arange(n + 1))
    # Deterministic normalization: largest entry of (A, B) becomes +1.
    stacked = np.concatenate([A, B])
    pivot = stacked[np.argmax(np.abs(stacked))]
    return RotationPolynomial(A=A / pivot, B=B / pivot, residual=residual)


def extract_filter_params(poly, L=DEFAULT_FILTER_LENGTH):
    """Factor the rotation polynomial into filter-cavity parameters.

    Roots of sum (A_k + i B_k) Omega^{2k} come in +- pairs at
    +-(dw_j + i gamma_j); the n roots of largest imaginary part are the
    positive-bandwidth branch. Cavities are sorted by descending bandwidth,
    ties broken by ascending |detuning|.
    """
    coeffs = poly.A + 1j * poly.B
    n = poly.degree
    if abs(coeffs[-1]) == 0.0 or abs(coeffs[-1]) < 1e-300 * np.abs(coeffs).max():
        raise NumericalError("leading rotation-polynomial coefficient vanishes")
    # Rescale the variable so the companion matrix is balanced before
    # judging its condition number.
    scale = (abs(coeffs[0]) / abs(coeffs[-1])) ** (1.0 / (2.0 * n)) if abs(coeffs[0]) > 0 else 1.0
    scaled = coeffs * scale ** (2 * np.arange(n + 1))
    scaled = scaled / np.abs(scaled).max()
    companion = _companion_even(scaled)
    cond = np.linalg.cond(companion)
    if cond > 1e12:
        raise NumericalError(
            f"rotation-polynomial companion matrix is ill-conditioned (cond {cond:.3e})"
        )
    roots = np.linalg.eigvals(companion) * scale
    order = np.argsort(-roots.imag)
    selected = roots[order[:n]]
    if np.any(selected.imag <= 0.0):
        raise NoSolutionError(
            "rotation polynomial has no positive-bandwidth root; "
            "the required rotation cannot be realized by this cascade"
        )
    gammas = selected.imag
    dws = selected.real
    order = np.lexsort((np.abs(dws), -gammas))
    cavities = [FilterCavity(gamma=gammas[i], delta_omega=dws[i], length=L) for i in order]
    return FilterSolution(cavities=cavities)


def _companion_even(scaled):
    """Companion matrix of sum scaled_k z^{2k} (monic in z^{2n})."""
    n = scaled.size - 1
    monic = scaled / scaled[-1]
    # Full polynomial in z of degree 2n with odd coefficients zero.
    full = np.zeros(2 * n + 1, dtype=complex)
    full[::2] = monic
    comp = np.zeros((2 * n, 2 * n), dtype=complex)
    comp[1:, :-1] = np.eye(2 * n - 1)
    comp[0, :] = -full[-2::-1]
    return comp


def synthesize_filters(cfg, grid=None, n=2, L=DEFAULT_FILTER_LENGTH, residual_limit=1e-6):
    """Fit plus extraction in one call."""
    poly = fit_rotation_polynomial(cfg, grid=grid, n=n, residual_limit=residual_limit)
    return extract_filter_params(poly, L=L), poly


def achieved_rotation_angle(solution, grid):
    """Total rotation supplied by the cascade of filter reflections."""
    grid = np.asarray(grid, dtype=float)
    total = np.zeros_like(grid)
    for cav in solution.cavities:
        block = cavity_quad_reflection(cav.spec(), grid)
        total = total + np.unwrap(rotation_angle_of(block), period=np.pi)
    return total


def verify_rotation(solution, cfg, grid=None):
    """Max |achieved - required| rotation over the grid [rad].

    The static orientation of the injected squeeze ellipse is a free knob, so
    a single constant offset (measured at the low-frequency end) is removed;
    profile drift anywhere else in the band counts as error in full.
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    achieved = achieved_rotation_angle(solution, grid)
    if not solution.cavities:
        achieved = np.zeros_like(grid)
    required = required_rotation_angle(cfg, grid)
    diff = achieved - required
    return float(np.abs(diff - diff[0]).max())
