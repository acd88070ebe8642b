"""EPR squeezing with the interferometer as the second filter cavity.

A two-mode squeezer pumped at 2 w0 + Delta entangles a signal field at the
carrier with an idler field at w0 + Delta. Both reflect off one physical
filter cavity (the signal anti-resonant, the idler detuned by the cavity's
rotation detuning) and enter the interferometer through the SRM. The
SRC/arm compound, seen by the idler at the Delta offset, supplies the
second rotation stage. The two homodyne readouts are combined with the
Wiener-optimal filter.

This module solves for the scheme parameters (Delta, SRC length, arm-length
fine tuning), assembles the lossy output fields of both beams, and produces
sensitivity curves, noise budgets and detected-squeezing levels for the
EPR, two-filter-cavity and unsqueezed configurations.
"""

from dataclasses import dataclass

import numpy as np
from scipy.constants import c
from scipy.optimize import brentq

from . import ifo, kernels
from .errors import ConfigError, NoSolutionError
from .filters import FilterCavity, FilterSolution, default_grid, required_rotation_angle
from .twophoton import homodyne_vector, rotation_angle_of, squeezed_covariance

SCHEMES = ("two-filter", "epr", "unsqueezed")

BUDGET_CHANNELS = (
    "quantum",
    "input_loss",
    "readout_loss",
    "src_loss",
    "arm_loss",
    "filter_loss",
)

def squeeze_factor(db):
    """Squeeze parameter r for a quoted input squeezing level in dB."""
    return float(db) * np.log(10.0) / 20.0


# ---------------------------------------------------------------------------
# effective SRC optics at the idler offset

def src_transmissivity(cfg, Delta, L_src):
    """Effective SRC amplitude transmissivity for a beam at offset Delta."""
    phi = 2.0 * np.asarray(Delta, dtype=float) * np.asarray(L_src, dtype=float) / c
    phi = phi - cfg.phi_SRC
    rr = np.sqrt((1.0 - cfg.T_ITM) * (1.0 - cfg.T_SRM))
    num = np.sqrt(cfg.T_ITM * cfg.T_SRM) * np.exp(0.5j * phi)
    return num / (1.0 - rr * np.exp(1j * phi))


def src_reflectivity(cfg, Delta, L_src):
    """Effective SRC amplitude reflectivity seen from the ITM side."""
    phi = 2.0 * np.asarray(Delta, dtype=float) * np.asarray(L_src, dtype=float) / c
    phi = phi - cfg.phi_SRC
    rI = np.sqrt(1.0 - cfg.T_ITM)
    rS = np.sqrt(1.0 - cfg.T_SRM)
    e = np.exp(1j * phi)
    return (rI - rS * e) / (1.0 - rI * rS * e)


def interferometer_bandwidth(cfg, Delta, L_src):
    """Effective arm bandwidth through the compound SRC at offset Delta."""
    return c * np.abs(src_transmissivity(cfg, Delta, L_src)) ** 2 / (4.0 * cfg.L_arm)


# ---------------------------------------------------------------------------
# parameter solver

@dataclass(frozen=True)
class EprParams:
    """One solution of the EPR scheme's resonance conditions.

    eq13_residual is the phase distance of Delta - delta_omega_1 from the
    nearest odd half-FSR multiple (0 for an exact anti-resonance of the
    signal, pi for an even near-solution). eq16_residual is the wrapped
    residual of the idler's arm resonance condition at the reported L_arm.
    """

    Delta: float
    n1: int
    n2: int
    L_src: float
    L_arm: float
    cavity: FilterCavity
    gamma2: float
    delta_omega2: float
    eq13_residual: float
    eq16_residual: float


def _wrap(phase):
    return (phase + np.pi) % (2.0 * np.pi) - np.pi


def solve_epr_params(cfg, target, L_SRC_max=200.0, n1_max=64):
    """All (Delta, L_SRC, L_arm) combinations realizing a two-stage target.

    The first target stage is the physical filter cavity the idler keeps;
    the second is what the interferometer must emulate. Delta candidates
    step through half free spectral ranges of the filter cavity (Eq-13
    parity reported via eq13_residual, even steps kept as near-solutions);
    for each, L_SRC values where the effective bandwidth crosses the
    stage-two target are located on a 1 cm scan and refined by bisection,
    and the arm length is fine-tuned to the idler resonance condition
    nearest the configured arm length. Solutions are sorted by L_SRC.
    """
    if len(target.cavities) < 2:
        raise ConfigError("EPR parameter solve needs a two-stage filter target")
    stage1, stage2 = target.cavities[0], target.cavities[1]
    g2_target = stage2.gamma
    dw2 = stage2.delta_omega
    half_fsr = np.pi * c / (2.0 * stage1.length)

    L_grid = np.arange(0.01, L_SRC_max + 0.005, 0.01)
    solutions = []
    for m in range(1, 2 * n1_max + 2):
        Delta = stage1.delta_omega + m * half_fsr

        def mismatch(L, Delta=Delta):
            return interferometer_bandwidth(cfg, Delta, L) - g2_target

        values = mismatch(L_grid)
        signs = np.sign(values)
        crossings = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
        roots = [brentq(mismatch, L_grid[k], L_grid[k + 1], xtol=1e-10) for k in crossings]
        # a crossing landing exactly on a scan node leaves no sign change
        # around it; happens when a measured bandwidth is fed back as target
        roots.extend(float(L) for L in L_grid[values == 0.0])
        for L_root in sorted(roots):
            achieved = interferometer_bandwidth(cfg, Delta, L_root)
            if abs(achieved - g2_target) > 0.02 * g2_target:
                continue
            arg_r = float(np.angle(src_reflectivity(cfg, Delta, L_root)))
            turns = (2.0 * (dw2 + Delta) * cfg.L_arm / c + arg_r) / (2.0 * np.pi)
            n2 = int(round(turns))
            L_arm = (2.0 * np.pi * n2 - arg_r) * c / (2.0 * (dw2 + Delta))
            eq16 = abs(_wrap(2.0 * (dw2 + Delta) * L_arm / c + arg_r))
            eq13 = 0.0 if m % 2 == 1 else np.pi
            solutions.append(
                EprParams(
                    Delta=Delta,
                    n1=(m - 1) // 2,
                    n2=n2,
                    L_src=L_root,
                    L_arm=L_arm,
                    cavity=stage1,
                    gamma2=float(achieved),
                    delta_omega2=dw2,
                    eq13_residual=eq13,
                    eq16_residual=float(eq16),
                )
            )
    if not solutions:
        raise NoSolutionError(
            f"no EPR solution with L_SRC below {L_SRC_max} m and "
            f"{n1_max} half-FSR steps"
        )
    return sorted(solutions, key=lambda p: (p.L_src, p.Delta))


def select_epr_params(cfg, solutions):
    """The solution closest to the configured working point.

    Distance is measured relative in (L_SRC, Delta) so a metre of recycling
    cavity counts like the matching fraction of the detuning; exact
    anti-resonances are preferred over even near-solutions whenever one is
    available.
    """
    if not solutions:
        raise NoSolutionError("empty EPR solution list")
    exact = [p for p in solutions if p.eq13_residual == 0.0]
    pool = exact if exact else list(solutions)
    return min(
        pool,
        key=lambda p: np.hypot(
            (p.L_src - cfg.L_SRC) / cfg.L_SRC,
            (p.Delta - cfg.Delta) / cfg.Delta,
        ),
    )


# ---------------------------------------------------------------------------
# lossy output-field assembly

@dataclass(frozen=True)
class LossChannelSet:
    """Quadrature transfer matrices from each vacuum port to one output beam.

    The loss matrices already carry their sqrt(epsilon) amplitudes; the
    input-loss vacuum rides through the same matrix as the entangled input
    with weight eps_i, and readout loss enters outside the cavity chain
    with amplitude eps_r (its complement prefactors everything else).
    response is the per-unit-strain signal vector, None for the idler.
    """

    main: np.ndarray
    filter_loss: np.ndarray
    src_loss: np.ndarray
    arm_loss: np.ndarray
    eps_i: float
    eps_r: float
    response: np.ndarray = None


def _epr_config(cfg, params):
    return cfg.replace(L_SRC=params.L_src, L_arm=params.L_arm, Delta=params.Delta)


def signal_filter_spec(params, loss=0.0, detuning_error=0.0):
    """The physical filter cavity as the signal beam sees it: anti-resonant."""
    stage = params.cavity
    return ifo.CavitySpec(
        length=stage.length,
        T_in=stage.T_in,
        detuning=np.pi * c / (2.0 * stage.length) + detuning_error,
        loss=loss,
    )


def idler_filter_spec(params, loss=0.0, detuning_error=0.0):
    """The same cavity as the idler sees it: the rotation stage.

    The idler carrier is locked delta_omega from resonance with the same
    realization sign a directly inserted rotation filter would use; the
    anti-resonance condition on Delta then parks the signal carrier half
    a free spectral range off for any lock index n1.
    """
    return params.cavity.spec(loss=loss, detuning_offset=detuning_error)


def assemble_output_fields(cfg, params, Omega, detuning_error=0.0):
    """Signal and idler LossChannelSet per the scheme's optical layout.

    detuning_error shifts both beams' filter resonance together (one
    physical cavity); it models the length-control offset dL_f.
    """
    cfg = _epr_config(cfg, params)
    Omega = np.asarray(Omega, dtype=float)

    sig_filter = signal_filter_spec(params, cfg.eps_f, detuning_error)
    idl_filter = idler_filter_spec(params, cfg.eps_f, detuning_error)

    t_sig = ifo.interferometer_quad_transfer(cfg, Omega, "signal")
    t_idl = ifo.interferometer_quad_transfer(cfg, Omega, "idler")

    signal = LossChannelSet(
        main=t_sig @ ifo.cavity_quad_reflection(sig_filter, Omega),
        filter_loss=t_sig @ ifo.cavity_quad_loss(sig_filter, Omega),
        src_loss=np.sqrt(cfg.eps_SRC)
        * (ifo.src_shot_block(cfg, Omega, "signal") + ifo.ponderomotive_block(cfg, Omega, "SRC")),
        arm_loss=np.sqrt(cfg.eps_arm)
        * (ifo.arm_shot_block(cfg, Omega, "signal") + ifo.ponderomotive_block(cfg, Omega, "arm")),
        eps_i=cfg.eps_i,
        eps_r=cfg.eps_r,
        response=ifo.strain_response(cfg, Omega),
    )
    idler = LossChannelSet(
        main=t_idl @ ifo.cavity_quad_reflection(idl_filter, Omega),
        filter_loss=t_idl @ ifo.cavity_quad_loss(idl_filter, Omega),
        src_loss=np.sqrt(cfg.eps_SRC) * ifo.src_shot_block(cfg, Omega, "idler"),
        arm_loss=np.sqrt(cfg.eps_arm) * ifo.arm_shot_block(cfg, Omega, "idler"),
        eps_i=cfg.eps_i,
        eps_r=cfg.eps_r,
        response=None,
    )
    return signal, idler


# ---------------------------------------------------------------------------
# Wiener combination

@dataclass(frozen=True)
class CombinedReadout:
    """Optimally combined two-beam readout with its per-port budget."""

    g: np.ndarray
    psd: np.ndarray
    budget: dict


def wiener_combine(signal_psds, idler_psds, cross_psds, signal_power=None):
    """Combine A + g B with the optimal filter g = -S_AB / S_BB.

    The PSD sets are dicts keyed by port name; ports missing from a set
    contribute zero there. The per-port budget evaluates each port's
    contribution at the fixed optimal g, so the terms are nonnegative and
    sum to the total exactly. signal_power divides everything (strain
    normalization |H R|^2) when given.
    """
    names = list(dict.fromkeys(list(signal_psds) + list(idler_psds)))
    zero = 0.0
    s_aa = sum(signal_psds.get(n, zero) for n in names)
    s_bb = sum(idler_psds.get(n, zero) for n in names)
    s_ab = sum(cross_psds.get(n, zero) for n in names)
    g = -s_ab / s_bb
    budget = {}
    for n in names:
        term = (
            signal_psds.get(n, zero)
            + np.abs(g) ** 2 * idler_psds.get(n, zero)
            + 2.0 * (np.conj(g) * cross_psds.get(n, zero)).real
        )
        budget[n] = term
    psd = sum(budget.values())
    if signal_power is not None:
        psd = psd / signal_power
        budget = {n: t / signal_power for n, t in budget.items()}
    return CombinedReadout(g=g, psd=psd, budget=budget)


# ---------------------------------------------------------------------------
# scheme assemblies (measured-port PSDs before strain normalization)

def _measured_rows(h, chset):
    return {
        "quantum": np.einsum("i,...ij->...j", h, chset.main),
        "filter_loss": np.einsum("i,...ij->...j", h, chset.filter_loss),
        "src_loss": np.einsum("i,...ij->...j", h, chset.src_loss),
        "arm_loss": np.einsum("i,...ij->...j", h, chset.arm_loss),
    }


def _row_power(row):
    return kernels.row_power(row)


def _epr_raw(cfg, params, Omega, detuning_error=0.0):
    """Measured-port PSD dicts of the EPR scheme (readout prefactor applied)."""
    signal, idler = assemble_output_fields(cfg, params, Omega, detuning_error)
    h_s = homodyne_vector(ifo.internal_homodyne_angle(cfg.zeta_s))
    h_i = homodyne_vector(ifo.internal_homodyne_angle(cfg.zeta_i, "idler"))
    rows_a = _measured_rows(h_s, signal)
    rows_b = _measured_rows(h_i, idler)

    ch2 = np.cosh(2.0 * cfg.r)
    sh2 = np.sinh(2.0 * cfg.r)
    pre = 1.0 - cfg.eps_r**2
    # injection loss is an energy-conserving beamsplitter on each entangled
    # mode, so vacuum input reconstructs vacuum output exactly
    dep = 1.0 - cfg.eps_i

    s_a = {
        "quantum": dep * ch2 * _row_power(rows_a["quantum"]),
        "input_loss": cfg.eps_i * _row_power(rows_a["quantum"]),
        "filter_loss": _row_power(rows_a["filter_loss"]),
        "src_loss": _row_power(rows_a["src_loss"]),
        "arm_loss": _row_power(rows_a["arm_loss"]),
    }
    s_b = {
        "quantum": dep * ch2 * _row_power(rows_b["quantum"]),
        "input_loss": cfg.eps_i * _row_power(rows_b["quantum"]),
        "filter_loss": _row_power(rows_b["filter_loss"]),
        "src_loss": _row_power(rows_b["src_loss"]),
        "arm_loss": _row_power(rows_b["arm_loss"]),
    }
    # cross-correlation exists only through the entangled pair; the
    # anti-diagonal sign pattern is the EPR (X_a - X_b, P_a + P_b) witness
    zdiag = np.array([1.0, -1.0])
    cross = dep * sh2 * np.einsum(
        "...i,i,...i->...", rows_a["quantum"], zdiag, rows_b["quantum"].conj()
    )
    s_a = {n: pre * v for n, v in s_a.items()}
    s_b = {n: pre * v for n, v in s_b.items()}
    s_a["readout_loss"] = cfg.eps_r**2 * np.ones_like(s_a["quantum"])
    s_b["readout_loss"] = cfg.eps_r**2 * np.ones_like(s_b["quantum"])
    c_ab = {"quantum": pre * cross}
    power = np.abs(np.einsum("i,...i->...", h_s, signal.response)) ** 2
    return s_a, s_b, c_ab, power


def two_filter_input_angle(cfg, solution, grid):
    """Squeeze-injection angle aligning the filtered ellipse with the need.

    The cascade's rotation tracks the interferometer's required rotation up
    to one constant (the free orientation of the injected ellipse); this
    anchors that constant at the lowest grid frequency.
    """
    required = required_rotation_angle(cfg, grid)
    achieved = np.zeros_like(required)
    for cav in solution.cavities:
        block = ifo.cavity_quad_reflection(cav.spec(), grid)
        achieved = achieved + np.unwrap(rotation_angle_of(block), period=np.pi)
    return float((required - achieved)[0])


def _chain_raw(cfg, solution, Omega, detuning_error=0.0, input_angle=None):
    """Measured-port PSDs of a filter-cascade scheme on the signal beam.

    With an empty cascade this is the unsqueezed interferometer. Each
    cavity's loss uses the depleting one-port model, so vacuum input
    reconstructs vacuum output exactly and the r = 0 curve is
    scheme-independent.
    """
    Omega = np.asarray(Omega, dtype=float)
    t_ifo = ifo.interferometer_quad_transfer(cfg, Omega, "signal")
    n_cav = len(solution.cavities)

    carry = t_ifo
    loss_rows = []
    for cav in reversed(solution.cavities):
        spec = cav.spec(loss=cfg.eps_f, detuning_offset=detuning_error)
        loss_rows.append(carry @ ifo.cavity_quad_loss(spec, Omega))
        carry = carry @ ifo.cavity_quad_reflection(spec, Omega)
    main = carry

    h_s = homodyne_vector(ifo.internal_homodyne_angle(cfg.zeta_s))
    row_main = np.einsum("i,...ij->...j", h_s, main)
    if n_cav and input_angle is None:
        input_angle = two_filter_input_angle(cfg, solution, Omega)
    if n_cav:
        cov = squeezed_covariance(cfg.r, input_angle)
        quantum = np.einsum("...i,ij,...j->...", row_main, cov, row_main.conj()).real
    else:
        quantum = _row_power(row_main)
    # injection loss as a beamsplitter before the cascade (see _epr_raw)
    quantum = (1.0 - cfg.eps_i) * quantum

    src_row = np.einsum(
        "i,...ij->...j",
        h_s,
        ifo.src_shot_block(cfg, Omega, "signal") + ifo.ponderomotive_block(cfg, Omega, "SRC"),
    )
    arm_row = np.einsum(
        "i,...ij->...j",
        h_s,
        ifo.arm_shot_block(cfg, Omega, "signal") + ifo.ponderomotive_block(cfg, Omega, "arm"),
    )
    pre = 1.0 - cfg.eps_r**2
    terms = {
        "quantum": pre * quantum,
        "input_loss": pre * cfg.eps_i * _row_power(row_main),
        "filter_loss": pre * sum(_row_power(np.einsum("i,...ij->...j", h_s, m)) for m in loss_rows)
        if loss_rows
        else np.zeros_like(quantum),
        "src_loss": pre * cfg.eps_SRC * _row_power(src_row),
        "arm_loss": pre * cfg.eps_arm * _row_power(arm_row),
        "readout_loss": cfg.eps_r**2 * np.ones_like(quantum),
    }
    power = np.abs(np.einsum("i,...i->...", h_s, ifo.strain_response(cfg, Omega))) ** 2
    return terms, power


def _epr_terms(cfg, params, Omega, detuning_error=0.0):
    s_a, s_b, c_ab, power = _epr_raw(cfg, params, Omega, detuning_error)
    combined = wiener_combine(s_a, s_b, c_ab)
    return combined.budget, combined.psd, power, combined.g


def _scheme_terms(cfg, scheme, Omega, solution, params, detuning_error):
    if scheme == "epr":
        if params is None:
            raise ConfigError("EPR scheme needs solved parameters")
        budget, total, power, _ = _epr_terms(cfg, params, Omega, detuning_error)
        return budget, total, power
    if scheme == "two-filter":
        if solution is None:
            raise ConfigError("two-filter scheme needs a filter solution")
        terms, power = _chain_raw(cfg, solution, Omega, detuning_error)
    elif scheme == "unsqueezed":
        terms, power = _chain_raw(cfg.replace(r=0.0), FilterSolution(cavities=()), Omega)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    total = sum(terms.values())
    return terms, total, power


@dataclass(frozen=True)
class NoiseCurve:
    """Strain-referred quantum noise of one scheme with its port budget."""

    freq_hz: np.ndarray
    psd_total: np.ndarray
    budget: dict

    @property
    def asd_total(self):
        return np.sqrt(self.psd_total)

    def asd(self, channel):
        return np.sqrt(self.budget[channel])


def _detuning_error(cfg):
    """Filter detuning offset implied by the length-control error dL_f."""
    if cfg.dL_f == 0.0:
        return 0.0
    return ifo.carrier_frequency(cfg) * cfg.dL_f / cfg.L_f


def _worst_case(cfg, scheme, Omega, solution, params, normalized):
    """Evaluate at +-dL_f and keep the worse total pointwise."""
    err = _detuning_error(cfg)
    branches = [err] if err == 0.0 else [err, -err]
    best = None
    for e in branches:
        terms, total, power = _scheme_terms(cfg, scheme, Omega, solution, params, e)
        if normalized:
            terms = {n: t / power for n, t in terms.items()}
            total = total / power
        if best is None:
            best = (terms, total)
        else:
            mask = total > best[1]
            merged_total = np.where(mask, total, best[1])
            merged_terms = {
                n: np.where(mask, terms[n], best[0][n]) for n in terms
            }
            best = (merged_terms, merged_total)
    return best


def sensitivity_curve(cfg, scheme, grid=None, solution=None, params=None):
    """Strain-referred quantum noise PSD of one scheme on a frequency grid.

    When the filter length-control error dL_f is nonzero, both signs of the
    implied detuning offset are evaluated and the worse branch is kept at
    each frequency (budget taken from the same branch, so the terms still
    sum to the total).
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    terms, total = _worst_case(cfg, scheme, grid, solution, params, normalized=True)
    return NoiseCurve(freq_hz=grid / (2.0 * np.pi), psd_total=total, budget=terms)


def detected_squeezing(cfg, scheme, grid=None, solution=None, params=None):
    """Noise reduction relative to the unsqueezed readout, in dB.

    Works on the measured-port PSDs before strain normalization, so it is
    defined for a zero-power (shot-only) configuration as well.
    """
    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    _, total = _worst_case(cfg, scheme, grid, solution, params, normalized=False)
    _, reference = _worst_case(cfg, "unsqueezed", grid, None, None, normalized=False)
    return 10.0 * np.log10(reference / total)
