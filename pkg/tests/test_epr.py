import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.constants import c

from squeezekit import epr, filters, ifo
from squeezekit.twophoton import homodyne_vector
from squeezekit.errors import ConfigError, NoSolutionError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# resonance-condition solver

@pytest.fixture(scope="module")
def solutions(cfg, solution):
    return epr.solve_epr_params(cfg, solution)


def test_solutions_sorted_and_within_bounds(solutions):
    lengths = [p.L_src for p in solutions]
    assert lengths == sorted(lengths)
    assert all(0.0 < p.L_src <= 200.0 for p in solutions)
    assert all(p.eq16_residual < 1e-10 for p in solutions)


def test_solver_hits_bandwidth_target(cfg, solution, solutions):
    target = solution.cavities[1].gamma
    for p in solutions[::7]:
        achieved = epr.interferometer_bandwidth(cfg, p.Delta, p.L_src)
        assert achieved == pytest.approx(target, rel=1e-6)
        assert p.gamma2 == pytest.approx(achieved, rel=1e-12)


def test_solver_delta_candidates_step_half_fsr(solution, solutions):
    stage1 = solution.cavities[0]
    half_fsr = np.pi * c / (2.0 * stage1.length)
    for p in solutions[::11]:
        steps = (p.Delta - stage1.delta_omega) / half_fsr
        assert steps == pytest.approx(round(steps), abs=1e-9)
        # odd steps are exact anti-resonances, even ones near-solutions
        want = 0.0 if round(steps) % 2 == 1 else np.pi
        assert p.eq13_residual == want


def test_zero_detuned_stage_gives_exact_half_fsr_delta(cfg):
    """With the filter undetuned and the first lock index, the idler offset
    is exactly half a free spectral range."""
    L1 = 1000.0
    delta_exact = np.pi * c / (2.0 * L1)
    g2 = epr.interferometer_bandwidth(cfg, delta_exact, 150.0)
    target = filters.FilterSolution(
        cavities=(
            filters.FilterCavity(gamma=TWO_PI * 4.26, delta_omega=0.0, length=L1),
            filters.FilterCavity(gamma=g2, delta_omega=TWO_PI * -7.65, length=L1),
        )
    )
    sols = epr.solve_epr_params(cfg, target)
    first = [p for p in sols if p.n1 == 0]
    assert first, "no solution at the first lock index"
    assert any(p.Delta == delta_exact for p in first)
    match = min(first, key=lambda p: abs(p.L_src - 150.0))
    assert match.L_src == pytest.approx(150.0, abs=1e-6)


def test_solver_rejects_single_stage_target(cfg):
    one = filters.FilterSolution(
        cavities=(filters.FilterCavity(gamma=TWO_PI * 4.0, delta_omega=0.0, length=1000.0),)
    )
    with pytest.raises(ConfigError):
        epr.solve_epr_params(cfg, one)


def test_solver_no_solution_in_tiny_bound(cfg, solution):
    with pytest.raises(NoSolutionError):
        epr.solve_epr_params(cfg, solution, L_SRC_max=0.5)


def test_select_prefers_exact_antiresonance(cfg, solutions):
    chosen = epr.select_epr_params(cfg, solutions)
    assert chosen.eq13_residual == 0.0
    assert chosen.L_src == pytest.approx(cfg.L_SRC, abs=1.0)
    assert chosen.Delta == pytest.approx(cfg.Delta, rel=0.02)


def test_select_empty_list_raises(cfg):
    with pytest.raises(NoSolutionError):
        epr.select_epr_params(cfg, [])


def test_arm_fine_tuning_satisfies_resonance(cfg, epr_params):
    p = epr_params
    arg_r = float(np.angle(epr.src_reflectivity(cfg, p.Delta, p.L_src)))
    phase = 2.0 * (p.delta_omega2 + p.Delta) * p.L_arm / c + arg_r
    assert abs((phase + np.pi) % (2 * np.pi) - np.pi) < 1e-9


# ---------------------------------------------------------------------------
# brute-force covariance-propagation oracle

def oracle_epr_psd(cfg, params, w, detuning_error):
    """Strain PSD at one frequency by explicit covariance propagation.

    Every vacuum port enters as its own block: the entangled pair with the
    two-mode-squeezed covariance, one injection-loss vacuum per beam, one
    filter/SRC/arm loss vacuum per beam, one readout vacuum per beam. No
    shared code with the production PSD assembly past the transfer blocks.
    """
    Omega = np.array([w])
    sig, idl = epr.assemble_output_fields(cfg, params, Omega, detuning_error)
    h_s = homodyne_vector(ifo.internal_homodyne_angle(cfg.zeta_s))
    h_i = homodyne_vector(ifo.internal_homodyne_angle(cfg.zeta_i, "idler"))

    def row(h, block):
        return np.array([h[0] * block[0, 0, k] + h[1] * block[0, 1, k] for k in (0, 1)])

    eye = np.eye(2)
    zmat = np.diag([1.0, -1.0])
    ch2, sh2 = np.cosh(2 * cfg.r), np.sinh(2 * cfg.r)
    pair_cov = np.block([[ch2 * eye, sh2 * zmat], [sh2 * zmat, ch2 * eye]])
    amp_keep = np.sqrt(1.0 - cfg.eps_i)
    amp_leak = np.sqrt(cfg.eps_i)

    r_main_s = row(h_s, sig.main)
    r_main_i = row(h_i, idl.main)
    zeros = np.zeros(2, dtype=complex)

    # (row into signal readout, row into idler readout, port covariance)
    ports = [
        (
            np.concatenate([amp_keep * r_main_s, zeros]),
            np.concatenate([zeros, amp_keep * r_main_i]),
            pair_cov,
        ),
        (amp_leak * r_main_s, zeros, eye),
        (zeros, amp_leak * r_main_i, eye),
        (row(h_s, sig.filter_loss), zeros, eye),
        (zeros, row(h_i, idl.filter_loss), eye),
        (row(h_s, sig.src_loss), zeros, eye),
        (zeros, row(h_i, idl.src_loss), eye),
        (row(h_s, sig.arm_loss), zeros, eye),
        (zeros, row(h_i, idl.arm_loss), eye),
    ]

    s_aa = s_bb = 0.0
    s_ab = 0.0 + 0.0j
    for ra, rb, cov in ports:
        s_aa += (ra @ cov @ ra.conj()).real
        s_bb += (rb @ cov @ rb.conj()).real
        s_ab += ra @ cov @ rb.conj()
    pre = 1.0 - cfg.eps_r**2
    s_aa = pre * s_aa + cfg.eps_r**2
    s_bb = pre * s_bb + cfg.eps_r**2
    s_ab = pre * s_ab

    combined = s_aa - abs(s_ab) ** 2 / s_bb
    power = abs(h_s[0] * sig.response[0, 0] + h_s[1] * sig.response[0, 1]) ** 2
    return combined / power


def test_epr_psd_matches_covariance_oracle(cfg, epr_params):
    freqs = np.logspace(0.0, 2.0, 10)
    grid = TWO_PI * freqs
    curve = epr.sensitivity_curve(cfg, "epr", grid, params=epr_params)
    err = epr._detuning_error(cfg)
    for k, w in enumerate(grid):
        want = max(
            oracle_epr_psd(cfg, epr_params, w, err),
            oracle_epr_psd(cfg, epr_params, w, -err),
        )
        assert curve.psd_total[k] == pytest.approx(want, rel=1e-8)


def test_two_filter_psd_matches_covariance_oracle(cfg, solution):
    """Same propagation idea for the cascade scheme: a single squeezed-vacuum
    port plus one vacuum per loss channel, readout applied outside."""
    freqs = np.logspace(0.0, 2.0, 10)
    grid = TWO_PI * freqs
    curve = epr.sensitivity_curve(cfg, "two-filter", grid, solution=solution)
    err = epr._detuning_error(cfg)
    angle = epr.two_filter_input_angle(cfg, solution, grid)
    h_s = homodyne_vector(ifo.internal_homodyne_angle(cfg.zeta_s))

    def one_branch(w, det_err):
        Omega = np.array([w])
        t = ifo.interferometer_quad_transfer(cfg, Omega, "signal")[0]
        loss_rows = []
        carry = t
        for cav in reversed(solution.cavities):
            spec = cav.spec(loss=cfg.eps_f, detuning_offset=det_err)
            loss_rows.append(h_s @ (carry @ ifo.cavity_quad_loss(spec, Omega)[0]))
            carry = carry @ ifo.cavity_quad_reflection(spec, Omega)[0]
        r_main = h_s @ carry
        rot = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        cov = rot @ np.diag([np.exp(2 * cfg.r), np.exp(-2 * cfg.r)]) @ rot.T
        total = (1.0 - cfg.eps_i) * (r_main @ cov @ r_main.conj()).real
        total += cfg.eps_i * (r_main @ r_main.conj()).real
        for lr in loss_rows:
            total += (lr @ lr.conj()).real
        src = h_s @ (
            ifo.src_shot_block(cfg, Omega)[0] + ifo.ponderomotive_block(cfg, Omega, "SRC")[0]
        )
        arm = h_s @ (
            ifo.arm_shot_block(cfg, Omega)[0] + ifo.ponderomotive_block(cfg, Omega, "arm")[0]
        )
        total += cfg.eps_SRC * (src @ src.conj()).real
        total += cfg.eps_arm * (arm @ arm.conj()).real
        total = (1.0 - cfg.eps_r**2) * total + cfg.eps_r**2
        power = abs(h_s @ (ifo.strain_response(cfg, Omega)[0])) ** 2
        return total / power

    for k, w in enumerate(grid):
        want = max(one_branch(w, err), one_branch(w, -err))
        assert curve.psd_total[k] == pytest.approx(want, rel=1e-8)


# ---------------------------------------------------------------------------
# structural and physical properties

def test_budget_sums_to_total(cfg, solution, epr_params, grid):
    for scheme, kw in (
        ("epr", {"params": epr_params}),
        ("two-filter", {"solution": solution}),
        ("unsqueezed", {}),
    ):
        curve = epr.sensitivity_curve(cfg, scheme, grid, **kw)
        total = sum(curve.budget.values())
        np.testing.assert_allclose(total, curve.psd_total, rtol=1e-10)
        assert set(curve.budget) == set(epr.BUDGET_CHANNELS)
        for term in curve.budget.values():
            assert np.all(term > -1e-20 * curve.psd_total)


def test_wiener_combination_beats_random_filters(cfg, epr_params):
    grid = TWO_PI * np.array([3.0, 8.0, 30.0])
    s_a, s_b, c_ab, _ = epr._epr_raw(cfg, epr_params, grid)
    combined = epr.wiener_combine(s_a, s_b, c_ab)
    total_a = sum(s_a.values())
    total_b = sum(s_b.values())
    total_ab = sum(c_ab.values())
    rng = np.random.default_rng(29)
    for _ in range(20):
        g = rng.standard_normal() + 1j * rng.standard_normal()
        candidate = total_a + abs(g) ** 2 * total_b + 2.0 * (np.conj(g) * total_ab).real
        assert np.all(combined.psd <= candidate * (1.0 + 1e-12))


def test_unsqueezed_detected_squeezing_is_zero(cfg, grid):
    db = epr.detected_squeezing(cfg, "unsqueezed", grid)
    np.testing.assert_allclose(db, 0.0, atol=1e-12)


def test_vacuum_input_makes_schemes_coincide(cfg, solution, epr_params, grid):
    """With no squeezing every scheme is the plain interferometer: the
    lossy cavities and beamsplitters must reconstruct vacuum exactly."""
    quiet = cfg.replace(r=0.0)
    base = epr.sensitivity_curve(quiet, "unsqueezed", grid)
    two = epr.sensitivity_curve(quiet, "two-filter", grid, solution=solution)
    np.testing.assert_allclose(two.psd_total, base.psd_total, rtol=1e-12)

    # the EPR working point moves L_SRC, L_arm and Delta: compare against
    # the unsqueezed interferometer at the same lengths
    moved = epr._epr_config(quiet, epr_params)
    base_moved = epr.sensitivity_curve(moved, "unsqueezed", grid)
    pair = epr.sensitivity_curve(quiet, "epr", grid, params=epr_params)
    np.testing.assert_allclose(pair.psd_total, base_moved.psd_total, rtol=1e-12)


def test_arm_loss_monotonicity(cfg, solution, epr_params):
    grid = TWO_PI * np.logspace(0, 2, 40)
    for scheme, kw in (("two-filter", {"solution": solution}), ("epr", {"params": epr_params})):
        lo = epr.sensitivity_curve(cfg, scheme, grid, **kw)
        hi = epr.sensitivity_curve(cfg.replace(eps_arm=2 * cfg.eps_arm), scheme, grid, **kw)
        assert np.all(hi.psd_total >= lo.psd_total * (1.0 - 1e-12))


def test_lossless_epr_flat_and_near_seven_db(cfg, epr_params, grid):
    lossless = cfg.replace(
        eps_i=0.0, eps_r=0.0, eps_SRC=0.0, eps_arm=0.0, eps_f=0.0, dL_f=0.0
    )
    db = epr.detected_squeezing(lossless, "epr", grid, params=epr_params)
    assert db.min() > 6.7 and db.max() < 7.3
    assert db.max() - db.min() < 0.15


def test_lossless_two_filter_recovers_injected_level(cfg, solution, grid):
    lossless = cfg.replace(
        eps_i=0.0, eps_r=0.0, eps_SRC=0.0, eps_arm=0.0, eps_f=0.0, dL_f=0.0
    )
    db = epr.detected_squeezing(lossless, "two-filter", grid, solution=solution)
    injected = 10.0 * np.log10(np.exp(2.0 * cfg.r))
    assert db.max() - db.min() < 0.01
    assert db.mean() == pytest.approx(injected, abs=0.01)


def test_dephasing_penalty_grows_with_squeezing(cfg, solution):
    """A length-control offset dephases stronger squeezing harder; probed at
    the narrow filter stage's detuning frequency where rotation is steepest."""
    w = np.array([abs(solution.cavities[1].delta_omega)])
    penalties = []
    for r in (0.5, 1.15, 1.73):
        noisy = cfg.replace(r=r)
        clean = noisy.replace(dL_f=0.0)
        on = epr.detected_squeezing(noisy, "two-filter", w, solution=solution)[0]
        off = epr.detected_squeezing(clean, "two-filter", w, solution=solution)[0]
        penalties.append(off - on)
    assert penalties[0] < penalties[1] < penalties[2]
    assert penalties[0] > 0.0


def test_idler_beam_carries_no_signal(cfg, epr_params, grid):
    signal, idler = epr.assemble_output_fields(cfg, epr_params, grid)
    assert idler.response is None
    assert signal.response is not None


def test_lossless_blocks_symplectic(cfg, epr_params, grid):
    lossless = cfg.replace(
        eps_i=0.0, eps_r=0.0, eps_SRC=0.0, eps_arm=0.0, eps_f=0.0, dL_f=0.0
    )
    signal, idler = epr.assemble_output_fields(lossless, epr_params, grid)
    for block in (signal.main, idler.main):
        det = (
            block[..., 0, 0] * block[..., 1, 1] - block[..., 0, 1] * block[..., 1, 0]
        )
        np.testing.assert_allclose(np.abs(det), 1.0, atol=1e-12)


def test_scheme_dispatch_errors(cfg, grid):
    with pytest.raises(ConfigError):
        epr.sensitivity_curve(cfg, "epr", grid)
    with pytest.raises(ConfigError):
        epr.sensitivity_curve(cfg, "two-filter", grid)
    with pytest.raises(ConfigError):
        epr.sensitivity_curve(cfg, "three-beam", grid)


def test_noise_curve_asd_accessors(cfg, grid):
    curve = epr.sensitivity_curve(cfg, "unsqueezed", grid)
    np.testing.assert_allclose(curve.asd_total, np.sqrt(curve.psd_total))
    np.testing.assert_allclose(
        curve.asd("arm_loss"), np.sqrt(curve.budget["arm_loss"])
    )


@given(st.floats(min_value=0.0, max_value=30.0))
def test_squeeze_factor_round_trip(db):
    r = epr.squeeze_factor(db)
    assert 10.0 * np.log10(np.exp(2.0 * r)) == pytest.approx(db, abs=1e-9)
