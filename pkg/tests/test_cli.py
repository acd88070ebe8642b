import io
from importlib.resources import files

import numpy as np
import pytest

from squeezekit import cli, epr, filters, ifo
from squeezekit.errors import ConfigError


def load_csv(path):
    body = "\n".join(
        line for line in path.read_text().splitlines() if not line.startswith("#")
    )
    return np.genfromtxt(io.StringIO(body), names=True, delimiter=",")


# ---------------------------------------------------------------------------
# spec parsing helpers

def test_parse_scheme_specs():
    assert cli.parse_scheme("epr") == ("epr", None)
    assert cli.parse_scheme("two-filter:15") == ("two-filter", 15.0)
    assert cli.parse_scheme("unsqueezed") == ("unsqueezed", None)
    with pytest.raises(ConfigError):
        cli.parse_scheme("magic")
    with pytest.raises(ConfigError):
        cli.parse_scheme("epr:loud")
    with pytest.raises(ConfigError):
        cli.parse_scheme("epr:-3")


def test_scheme_labels():
    assert cli.scheme_label("two-filter", None) == "two_filter"
    assert cli.scheme_label("two-filter", 15.0) == "two_filter_15db"
    assert cli.scheme_label("epr", 10.0) == "epr_10db"


# ---------------------------------------------------------------------------
# exit codes

def test_synthesis_succeeds_and_reports_stages(capsys):
    assert cli.main(["synthesize-filters"]) == 0
    out = capsys.readouterr().out
    assert "4.2475" in out
    assert "19.5187" in out


def test_unknown_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 1\n")
    rc = cli.main(["sensitivity", "--scheme", "unsqueezed", "--config", str(bad)])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_bad_scheme_spec_exits_2(capsys):
    rc = cli.main(["compare", "--scheme", "unsqueezed", "--scheme", "warp:10"])
    assert rc == 2


def test_compare_needs_two_schemes(capsys):
    assert cli.main(["compare", "--scheme", "unsqueezed"]) == 2


def test_solver_bound_exhausted_exits_3(capsys):
    assert cli.main(["epr-solve", "--max-lsrc", "0.5"]) == 3
    assert "no solution" in capsys.readouterr().err


def test_degenerate_fit_exits_4(capsys):
    assert cli.main(["synthesize-filters", "--stages", "1"]) == 4
    assert "numerical failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# artifact contents

def test_sensitivity_csv_round_trips(tmp_path):
    out = tmp_path / "s.csv"
    rc = cli.main(
        ["sensitivity", "--scheme", "two-filter", "--points", "40", "--out", str(out)]
    )
    assert rc == 0
    data = load_csv(out)
    cfg = ifo.load_config(None)
    grid = filters.default_grid(1.0, 100.0, 40)
    solution, _ = filters.synthesize_filters(cfg)
    curve = epr.sensitivity_curve(cfg, "two-filter", grid, solution=solution)
    # %.16e prints full float64 precision, so the file reproduces the
    # in-memory values bit for bit
    np.testing.assert_array_equal(data["freq_hz"], curve.freq_hz)
    np.testing.assert_array_equal(data["asd_total"], curve.asd_total)
    np.testing.assert_array_equal(data["asd_arm_loss"], curve.asd("arm_loss"))
    np.testing.assert_array_equal(data["asd_filter_loss"], curve.asd("filter_loss"))


def test_budget_includes_quantum_column(tmp_path):
    out = tmp_path / "b.csv"
    rc = cli.main(
        ["budget", "--scheme", "unsqueezed", "--points", "25", "--out", str(out)]
    )
    assert rc == 0
    data = load_csv(out)
    assert "asd_quantum" in data.dtype.names
    total = np.zeros_like(data["asd_total"])
    for name in data.dtype.names:
        if name not in ("freq_hz", "asd_total"):
            total += data[name] ** 2
    np.testing.assert_allclose(total, data["asd_total"] ** 2, rtol=1e-12)


def test_output_byte_identical_across_runs(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["budget", "--scheme", "two-filter", "--points", "30"]
    assert cli.main(args + ["--out", str(first)]) == 0
    assert cli.main(args + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_injected_level_flag_changes_curve(tmp_path):
    lo, hi = tmp_path / "lo.csv", tmp_path / "hi.csv"
    base = ["sensitivity", "--scheme", "two-filter", "--points", "25"]
    assert cli.main(base + ["--db", "10", "--out", str(lo)]) == 0
    assert cli.main(base + ["--db", "15", "--out", str(hi)]) == 0
    assert lo.read_bytes() != hi.read_bytes()


def test_compare_identical_schemes_has_no_dominance(tmp_path):
    out = tmp_path / "c.csv"
    rc = cli.main(
        [
            "compare",
            "--scheme", "unsqueezed",
            "--scheme", "unsqueezed",
            "--points", "25",
            "--out", str(out),
        ]
    )
    assert rc == 0
    text = out.read_text()
    assert "#   (none)" in text
    assert "asd_unsqueezed_2" in text


def test_horizon_csv_single_scheme_columns(tmp_path):
    out = tmp_path / "h.csv"
    rc = cli.main(
        ["horizon", "--scheme", "unsqueezed", "--mass-points", "3", "--out", str(out)]
    )
    assert rc == 0
    data = load_csv(out)
    assert data.dtype.names == ("mass_msun", "redshift", "distance_mpc")
    assert np.all(np.diff(data["mass_msun"]) > 0)
    assert np.all(data["distance_mpc"] > 0)
    text = out.read_text()
    assert "H0 = 67.9 km/s/Mpc" in text
    assert "restricted post-Newtonian" in text


def test_packaged_config_matches_defaults(tmp_path):
    packaged = files("squeezekit") / "data" / "et_lf.cfg"
    with_file, without = tmp_path / "w.txt", tmp_path / "wo.txt"
    base = ["src-arm-feasibility"]
    assert cli.main(base + ["--config", str(packaged), "--out", str(with_file)]) == 0
    assert cli.main(base + ["--out", str(without)]) == 0
    assert with_file.read_bytes() == without.read_bytes()


# ---------------------------------------------------------------------------
# dominance bands

def synthetic_pair(points):
    f = np.logspace(0.0, 2.0, points)
    low_then_high = epr.NoiseCurve(freq_hz=f, psd_total=(f / 10.0) ** 2, budget={})
    high_then_low = epr.NoiseCurve(freq_hz=f, psd_total=(10.0 / f) ** 2, budget={})
    return f, ["rising", "falling"], [low_then_high, high_then_low]


def test_dominance_band_boundaries_stable_under_refinement():
    coarse_bands = cli.dominance_bands(*synthetic_pair(61))
    fine_bands = cli.dominance_bands(*synthetic_pair(121))
    assert [b[2] for b in coarse_bands] == ["rising", "falling"]
    assert [b[2] for b in fine_bands] == ["rising", "falling"]
    step = np.log(100.0) / 60.0
    for coarse, fine in zip(coarse_bands, fine_bands):
        assert abs(np.log(coarse[0] / fine[0])) <= 1.5 * step
        assert abs(np.log(coarse[1] / fine[1])) <= 1.5 * step


def test_dominance_tie_produces_no_band():
    f, _, (curve, _) = synthetic_pair(31)
    assert cli.dominance_bands(f, ["a", "b"], [curve, curve]) == []
