"""Command-line interface: parameter synthesis, noise curves, horizon reach.

Every subcommand reads the same flat config format (``--config``, defaults
to the built-in low-frequency detector set) and writes its artifact to
``--out`` or stdout. Output is deterministic: the same config and flags
produce byte-identical files.

Exit codes: 0 success, 2 bad configuration or usage, 3 no solution within
search bounds, 4 numerical failure.
"""

import argparse
import sys

import numpy as np

from . import coupled, epr, filters, horizon, ifo
from .errors import ConfigError, NoSolutionError, NumericalError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# scheme handling

def parse_scheme(text):
    """Split a scheme spec ``name[:db]`` into (name, squeeze level or None)."""
    name, _, db = text.partition(":")
    if name not in epr.SCHEMES:
        raise ConfigError(f"unknown scheme {name!r}; choose from {', '.join(epr.SCHEMES)}")
    if not db:
        return name, None
    try:
        level = float(db)
    except ValueError:
        raise ConfigError(f"bad squeeze level in scheme spec {text!r}")
    if level < 0.0:
        raise ConfigError("squeeze level must be nonnegative dB")
    return name, level


def scheme_label(name, db):
    label = name.replace("-", "_")
    if db is not None:
        label += f"_{db:g}db"
    return label


def scheme_curve(cfg, name, db, grid):
    """Sensitivity curve of one scheme, solving its parameters as needed."""
    if db is not None:
        cfg = cfg.replace(r=epr.squeeze_factor(db))
    solution = params = None
    if name in ("two-filter", "epr"):
        solution, _ = filters.synthesize_filters(cfg)
    if name == "epr":
        candidates = epr.solve_epr_params(cfg, solution)
        params = epr.select_epr_params(cfg, candidates)
    return epr.sensitivity_curve(cfg, name, grid, solution=solution, params=params)


def dominance_bands(freq_hz, labels, curves, rtol=1e-9):
    """Frequency bands where one scheme's total ASD is strictly lowest.

    A winner must beat the runner-up by the relative margin; ties (and in
    particular identical schemes) produce no band.
    """
    totals = np.stack([c.asd_total for c in curves])
    order = np.argsort(totals, axis=0, kind="stable")
    best = order[0]
    runner = totals[order[1], np.arange(totals.shape[1])]
    lowest = totals[best, np.arange(totals.shape[1])]
    strict = lowest < runner * (1.0 - rtol)
    winner = np.where(strict, best, -1)

    bands = []
    start = 0
    for k in range(1, len(winner) + 1):
        if k == len(winner) or winner[k] != winner[start]:
            if winner[start] >= 0:
                bands.append((freq_hz[start], freq_hz[k - 1], labels[winner[start]]))
            start = k
    return bands


# ---------------------------------------------------------------------------
# emission helpers

def _emit(text, out_path):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _csv(header_comments, columns, arrays):
    lines = [f"# {c}" for c in header_comments]
    lines.append(",".join(columns))
    data = np.column_stack(arrays)
    for row in data:
        lines.append(",".join(f"{v:.16e}" for v in row))
    return "\n".join(lines) + "\n"


def _grid(args):
    if args.fmin <= 0.0 or args.fmax <= args.fmin:
        raise ConfigError("need 0 < fmin < fmax")
    if args.points < 2:
        raise ConfigError("need at least 2 grid points")
    return filters.default_grid(args.fmin, args.fmax, args.points)


def _hz(omega):
    return omega / TWO_PI


# ---------------------------------------------------------------------------
# subcommands

def cmd_synthesize_filters(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    solution, poly = filters.synthesize_filters(
        cfg, grid=grid, n=args.stages, L=args.filter_length
    )
    mismatch = filters.verify_rotation(solution, cfg, grid)
    lines = [
        f"rotation filter synthesis ({args.stages} stages, L = {args.filter_length:g} m)",
        f"fit residual: {poly.residual:.3e} rad",
        f"max rotation mismatch over grid: {mismatch:.3e} rad",
        "",
        "stage   gamma/2pi [Hz]   delta_omega/2pi [Hz]   T_in",
    ]
    for k, cav in enumerate(solution.cavities, start=1):
        lines.append(
            f"{k:>5}   {_hz(cav.gamma):>14.6f}   {_hz(cav.delta_omega):>20.6f}   {cav.T_in:.6e}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _coupled_lines(title, spec):
    return [
        title,
        f"  L1' = {spec.L1:.6f} m, L2' = {spec.L2:.6f} m",
        f"  T1' = {spec.T1:.6e}, T2' = {spec.T2:.6e}",
        f"  gamma1'/2pi = {_hz(spec.gamma1):.6f} Hz",
        f"  delta_omega1'/2pi = {_hz(spec.delta_omega1):.6f} Hz",
        f"  delta_omega2'/2pi = {_hz(spec.delta_omega2):.6f} Hz",
        f"  omega_s/2pi = {_hz(spec.omega_s):.6f} Hz",
    ]


def cmd_equivalence(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    solution, _ = filters.synthesize_filters(cfg, grid=grid)
    report = coupled.equivalence_report(solution, grid)
    lines = _coupled_lines("analytic coupled-cavity map:", report.analytic)
    lines += _coupled_lines("least-squares refit:", report.fitted)
    lines.append(f"rotation mismatch vs two-cavity chain: {report.rotation_error:.3e} rad")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_src_arm_feasibility(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    solution, _ = filters.synthesize_filters(cfg, grid=grid)
    report = coupled.src_arm_feasibility(cfg, solution, grid)
    verdict = "feasible" if report.feasible else "infeasible"
    lines = _coupled_lines(
        "coupled-cavity parameters required of the SRC-arm chain:", report.analytic
    )
    lines += [
        f"required middle-mirror transmissivity: {report.required_T:.6e}",
        f"actual ITM transmissivity:             {report.actual_T:.6e}",
        f"idler rotation mismatch at actual T_ITM: {report.rotation_error:.3e} rad",
        f"verdict: {verdict}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_epr_solve(args):
    cfg = ifo.load_config(args.config)
    solution, _ = filters.synthesize_filters(cfg)
    candidates = epr.solve_epr_params(cfg, solution, L_SRC_max=args.max_lsrc)
    lines = [
        f"EPR working points realizing the two-stage rotation target "
        f"(L_SRC <= {args.max_lsrc:g} m):",
        "",
        "  L_SRC [m]   Delta/2pi [MHz]    L_arm [m]   n1   n2   "
        "anti-res. residual   arm res. residual",
    ]
    for p in candidates:
        lines.append(
            f"{p.L_src:>11.4f}   {p.Delta / TWO_PI / 1e6:>15.6f}   {p.L_arm:>10.3f}"
            f"   {p.n1:>2d}   {p.n2:>3d}   {p.eq13_residual:>18.3e}   {p.eq16_residual:>17.3e}"
        )
    chosen = epr.select_epr_params(cfg, candidates)
    lines += [
        "",
        f"nearest to configured working point: L_SRC = {chosen.L_src:.4f} m, "
        f"Delta/2pi = {chosen.Delta / TWO_PI / 1e6:.6f} MHz, "
        f"L_arm = {chosen.L_arm:.3f} m",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


_LOSS_COLUMNS = ("input_loss", "readout_loss", "src_loss", "arm_loss", "filter_loss")


def cmd_sensitivity(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    curve = scheme_curve(cfg, args.scheme, args.db, grid)
    columns = ["freq_hz", "asd_total"] + [f"asd_{n}" for n in _LOSS_COLUMNS]
    arrays = [curve.freq_hz, curve.asd_total] + [curve.asd(n) for n in _LOSS_COLUMNS]
    text = _csv(
        [
            f"scheme: {args.scheme}"
            + ("" if args.db is None else f", {args.db:g} dB injected"),
            "strain-referred quantum noise amplitude spectral density [1/sqrt(Hz)]",
        ],
        columns,
        arrays,
    )
    _emit(text, args.out)
    return 0


def cmd_budget(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    curve = scheme_curve(cfg, args.scheme, args.db, grid)
    columns = ["freq_hz", "asd_total", "asd_quantum"] + [f"asd_{n}" for n in _LOSS_COLUMNS]
    arrays = [curve.freq_hz, curve.asd_total, curve.asd("quantum")] + [
        curve.asd(n) for n in _LOSS_COLUMNS
    ]
    text = _csv(
        [
            f"noise budget, scheme: {args.scheme}"
            + ("" if args.db is None else f", {args.db:g} dB injected"),
            "per-port decomposition at the fixed optimal readout combination",
            "strain-referred amplitude spectral density [1/sqrt(Hz)]",
        ],
        columns,
        arrays,
    )
    _emit(text, args.out)
    return 0


_COSMOLOGY_HEADER = (
    f"cosmology: flat LCDM, H0 = 67.9 km/s/Mpc, Omega_m = 0.3065; "
    f"network SNR threshold {horizon.SNR_THRESHOLD:g}, "
    f"{horizon.DETECTOR_COUNT} detectors, 60 deg opening angle"
)


def cmd_horizon(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    if args.mass_points < 2 or args.mass_max <= args.mass_min or args.mass_min <= 0.0:
        raise ConfigError("need 0 < mass-min < mass-max and at least 2 mass points")
    masses = np.linspace(args.mass_min, args.mass_max, args.mass_points)

    schemes = [parse_scheme(s) for s in (args.scheme or ["epr"])]
    labels = [scheme_label(n, d) for n, d in schemes]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate scheme specs")

    columns = ["mass_msun"]
    arrays = [masses]
    for (name, db), label in zip(schemes, labels):
        curve = scheme_curve(cfg, name, db, grid)
        reach = horizon.horizon_reach(curve, masses)
        suffix = "" if len(schemes) == 1 else f"_{label}"
        columns += [f"redshift{suffix}", f"distance_mpc{suffix}"]
        arrays += [reach.redshift, reach.distance_mpc]
    comments = [
        "equal-mass inspiral horizon vs total source-frame mass",
        _COSMOLOGY_HEADER,
        "waveform: restricted post-Newtonian amplitude to redshifted ISCO",
        "schemes: " + ", ".join(labels),
    ]
    _emit(_csv(comments, columns, arrays), args.out)
    return 0


def cmd_compare(args):
    cfg = ifo.load_config(args.config)
    grid = _grid(args)
    schemes = [parse_scheme(s) for s in args.scheme]
    if len(schemes) < 2:
        raise ConfigError("compare needs at least two --scheme specs")
    labels = [scheme_label(n, d) for n, d in schemes]
    curves = [scheme_curve(cfg, n, d, grid) for n, d in schemes]

    freq_hz = curves[0].freq_hz
    bands = dominance_bands(freq_hz, labels, curves)
    comments = [
        "scheme comparison, strain-referred amplitude spectral density [1/sqrt(Hz)]",
        "dominance bands (strictly lowest total):",
    ]
    if bands:
        comments += [f"  {lo:.6f} Hz - {hi:.6f} Hz: {label}" for lo, hi, label in bands]
    else:
        comments.append("  (none)")
    # duplicate labels get an index suffix so every column name is unique
    seen = {}
    columns = ["freq_hz"]
    for label in labels:
        seen[label] = seen.get(label, 0) + 1
        columns.append(f"asd_{label}" + ("" if seen[label] == 1 else f"_{seen[label]}"))
    arrays = [freq_hz] + [c.asd_total for c in curves]
    _emit(_csv(comments, columns, arrays), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    common.add_argument("--fmin", type=float, default=1.0, help="grid start [Hz]")
    common.add_argument("--fmax", type=float, default=100.0, help="grid end [Hz]")
    common.add_argument("--points", type=int, default=200, help="log-spaced grid points")

    parser = argparse.ArgumentParser(
        prog="squeezekit",
        description="quantum-noise and squeezing toolkit for a detuned "
        "dual-recycled low-frequency detector",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "synthesize-filters", parents=[common],
        help="fit the required quadrature rotation and extract filter cavities",
    )
    p.add_argument("--stages", type=int, default=2, help="number of filter cavities")
    p.add_argument(
        "--filter-length", type=float, default=filters.DEFAULT_FILTER_LENGTH,
        help="filter cavity length [m]",
    )
    p.set_defaults(func=cmd_synthesize_filters)

    p = sub.add_parser(
        "equivalence", parents=[common],
        help="map the two-cavity chain onto one coupled cavity and refit",
    )
    p.set_defaults(func=cmd_equivalence)

    p = sub.add_parser(
        "src-arm-feasibility", parents=[common],
        help="check whether the SRC-arm chain can act as the idler's coupled filter",
    )
    p.set_defaults(func=cmd_src_arm_feasibility)

    p = sub.add_parser(
        "epr-solve", parents=[common],
        help="solve the joint resonance conditions for EPR working points",
    )
    p.add_argument(
        "--max-lsrc", type=float, default=200.0,
        help="largest recycling-cavity length to scan [m]",
    )
    p.set_defaults(func=cmd_epr_solve)

    p = sub.add_parser(
        "sensitivity", parents=[common],
        help="strain-referred quantum noise curve of one scheme (CSV)",
    )
    p.add_argument("--scheme", required=True, choices=epr.SCHEMES)
    p.add_argument(
        "--db", type=float, choices=[10.0, 15.0],
        help="injected squeezing level override [dB]",
    )
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser(
        "budget", parents=[common],
        help="per-port noise budget of one scheme (CSV)",
    )
    p.add_argument("--scheme", required=True, choices=epr.SCHEMES)
    p.add_argument(
        "--db", type=float, choices=[10.0, 15.0],
        help="injected squeezing level override [dB]",
    )
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser(
        "horizon", parents=[common],
        help="equal-mass inspiral horizon redshift and distance (CSV)",
    )
    p.add_argument(
        "--scheme", action="append", metavar="NAME[:DB]",
        help="scheme spec, repeatable (default: epr at the configured level)",
    )
    p.add_argument("--mass-min", type=float, default=15.0, help="grid start [M_sun]")
    p.add_argument("--mass-max", type=float, default=60.0, help="grid end [M_sun]")
    p.add_argument("--mass-points", type=int, default=10, help="mass grid points")
    p.set_defaults(func=cmd_horizon)

    p = sub.add_parser(
        "compare", parents=[common],
        help="aligned noise curves for several schemes with dominance bands (CSV)",
    )
    p.add_argument(
        "--scheme", action="append", required=True, metavar="NAME[:DB]",
        help="scheme spec like epr:15 or two-filter:10, at least two",
    )
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"squeezekit: config error: {exc}", file=sys.stderr)
        return 2
    except NoSolutionError as exc:
        print(f"squeezekit: no solution: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"squeezekit: numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
