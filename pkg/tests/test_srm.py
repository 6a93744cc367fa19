import numpy as np
import pytest

from cransec.analogbf import design_analog_bf
from cransec.model import SystemConfig, draw_instance, with_eves
from cransec.rates import secrecy_rates
from cransec.srm import (
    VARIANTS, PowerConstraintSpec, PowerMode, check_rank_certificates, constraint_residuals, evaluate_aux,
    final_secrecy, init_aux, kkt_residuals, max_violation, prepare_instance, solve_best_of, solve_srm,
)
from cransec.srm.state import fronthaul_slack, link_quantities, polish_feasibility

SIGMA = 0.05


def case(seed=1, **kw):
    cfg = SystemConfig(rng_seed=seed, csi_error_ratio=kw.pop("csi_error_ratio", SIGMA), **kw)
    _, ch = draw_instance(cfg)
    return cfg, ch, design_analog_bf(ch, cfg)


@pytest.fixture(scope="module")
def solved():
    cfg, ch, bf = case()
    return cfg, ch, bf, {v: solve_srm(v, ch, bf, cfg) for v in VARIANTS}


# -- instance preparation ------------------------------------------------------------

def test_scaled_instance_normalization():
    cfg, ch, bf = case()
    inst = prepare_instance("total", ch, bf, cfg)
    a2 = cfg.p_bs_total / (cfg.bw_mmwave * cfg.noise_psd)
    np.testing.assert_allclose(inst.hbar, ch.h @ bf.F * np.sqrt(a2))
    np.testing.assert_allclose(inst.G[0], np.outer(inst.g[0].conj(), inst.g[0]))     # g^H g for a row g
    assert inst.total_budget == pytest.approx(1.0)
    assert np.all(inst.sigma == 0) and not inst.robust
    rob = prepare_instance("robust", ch, bf, cfg)
    np.testing.assert_allclose(rob.sigma, [SIGMA])
    np.testing.assert_allclose(rob.he_hat, ch.he_est * np.sqrt(a2))
    per = prepare_instance("perbs", ch, bf, cfg)
    np.testing.assert_allclose(per.budgets, np.full(3, 1 / 3))
    with pytest.raises(ValueError):
        prepare_instance("nope", ch, bf, cfg)


def test_power_spec_validation():
    cfg = SystemConfig()
    assert PowerConstraintSpec.for_variant("perbs", cfg).mode == PowerMode.PER_BS
    assert PowerConstraintSpec.for_variant("robust", cfg).mode == PowerMode.TOTAL
    np.testing.assert_array_equal(PowerConstraintSpec.for_variant("perbs", cfg).selection(1, 3), np.diag([0, 1, 0]))


def test_seed_is_feasible_and_tight():
    for v in VARIANTS:
        cfg, ch, bf = case(2)
        inst = prepare_instance(v, ch, bf, cfg)
        (V0, Vk, Lam), aux = init_aux(inst)
        assert np.trace(V0).real == pytest.approx(1.0)
        assert fronthaul_slack(inst, V0, Vk, Lam) >= -1e-9
        q = link_quantities(inst, V0, Vk, Lam)
        np.testing.assert_allclose(aux.beta, q.S / (q.I + 1))
        if v == "robust":
            # certified Eve SINR bounds dominate the estimated-channel values
            assert np.all(aux.gamma_hat >= aux.gamma * (1 - 1e-9))


# -- the solver --------------------------------------------------------------------

def test_surrogate_is_monotone_and_bounded_by_the_true_rate(solved):
    for v, res in solved[3].items():
        tr = res.trace
        assert tr.is_monotone(1e-6), v
        assert tr.surrogate[0] >= tr.seed_value - 1e-6
        assert np.all(np.asarray(tr.surrogate) <= np.asarray(tr.true_secrecy) + 1e-6), v
        assert tr.iterations == len(tr.surrogate) <= 30
        assert max(tr.max_violation) <= 1e-6


def test_solutions_respect_every_budget(solved):
    cfg, ch, bf, results = solved
    for v, res in results.items():
        sol = res.solution
        sol.check()
        assert sol.cp_power() <= cfg.p_cp * (1 + 1e-9)
        if v == "perbs":
            assert np.all(sol.per_bs_power() <= np.asarray(cfg.p_bs_per) * (1 + 1e-9))
        else:
            assert sol.bs_power() <= cfg.p_bs_total * (1 + 1e-9)
        rep = secrecy_rates(sol, ch, bf, cfg)
        assert rep.sum_access <= rep.fronthaul_min * (1 + 1e-9)


def test_relaxed_rate_improves_on_the_seed(solved):
    cfg, ch, bf, results = solved
    for v, res in results.items():
        assert final_secrecy(res, ch, bf, cfg) >= res.trace.seed_value - 1e-6


def test_robust_point_is_certified_over_the_ball(solved):
    cfg, ch, bf, results = solved
    res = results["robust"]
    inst = res.inst
    fresh = evaluate_aux(inst, *res.point)
    # certified bounds at the returned point are no worse than what the solver used
    assert np.all(fresh.zeta_hat <= res.aux.zeta_hat * (1 + 1e-4) + 1e-6)
    assert np.all(fresh.chi >= res.aux.chi * (1 - 1e-4) - 1e-6)


def test_rank_certificates_and_kkt_residuals(solved):
    cfg, ch, bf, results = solved
    for v, res in results.items():
        rep = check_rank_certificates(res.duals, v, res.inst, res.point)
        assert rep.psi2_positive
        assert set(rep.user_certified) == {0, 1}
        assert "psi2>0" in rep.summary()
        V0 = res.point[0]
        # the reported multipliers are those of the last subproblem, solved at the previous anchors
        resid = kkt_residuals(res.duals, res.inst, V0)
        assert max(resid.values()) <= 1e-3, (v, resid)


def test_constraint_residuals_vanish_at_the_returned_point(solved):
    for v, res in solved[3].items():
        resid = constraint_residuals(res.inst, res.point, res.aux, res.anchors)
        assert max_violation(resid) <= 1e-5, v


def test_zero_error_robust_matches_nominal():
    cfg, ch, bf = case(4, csi_error_ratio=0.0)
    a = solve_srm("total", ch, bf, cfg)
    b = solve_srm("robust", ch, bf, cfg)
    assert final_secrecy(b, ch, bf, cfg) == pytest.approx(final_secrecy(a, ch, bf, cfg), rel=1e-3, abs=1e-4)


def test_no_eavesdropper_secrecy_is_the_capped_sum_rate():
    cfg, ch, bf = case(5, n_eves=0, csi_error_ratio=())
    for v in ("total", "robust"):
        res = solve_srm(v, ch, bf, cfg)
        rep = secrecy_rates(res.solution, ch, bf, cfg)
        assert rep.sum_secrecy == pytest.approx(rep.sum_access)
        assert rep.sum_access <= rep.fronthaul_min * (1 + 1e-9)
        assert res.trace.is_monotone()


def test_an_eve_on_a_user_channel_zeroes_that_user():
    cfg, ch, bf = case(6, n_eves=1, csi_error_ratio=0.0)
    ch2 = with_eves(ch, ch.h[:1])
    res = solve_srm("total", ch2, bf, cfg)
    rep = secrecy_rates(res.solution, ch2, bf, cfg)
    assert rep.secrecy[0] <= 1e-6 * cfg.bw_mmwave


def test_solver_argument_checks():
    cfg, ch, bf = case()
    with pytest.raises(ValueError):
        solve_srm("nope", ch, bf, cfg)
    with pytest.raises(ValueError):
        solve_srm("total", ch, bf, cfg, T_max=0)


def test_best_of_keeps_the_best_start(solved):
    cfg, ch, bf, results = solved
    best, rates = solve_best_of("total", ch, bf, cfg, seeds=(None, results["perbs"].point), T_max=5)
    assert len(rates) == 2
    assert final_secrecy(best, ch, bf, cfg) == pytest.approx(max(rates))
    with pytest.raises(ValueError):
        solve_best_of("total", ch, bf, cfg, seeds=())


def test_warm_start_from_a_feasible_point_does_not_lose_rate(solved):
    cfg, ch, bf, results = solved
    start = final_secrecy(results["perbs"], ch, bf, cfg)
    res = solve_srm("total", ch, bf, cfg, seed=results["perbs"].point)
    assert final_secrecy(res, ch, bf, cfg) >= start - 1e-4


# -- polishing -----------------------------------------------------------------------

def test_polish_scales_onto_budgets():
    cfg, ch, bf = case()
    inst = prepare_instance("total", ch, bf, cfg)
    (V0, Vk, Lam), _ = init_aux(inst)
    (P0, Pk, PL), s = polish_feasibility(inst, 2 * V0, 3 * Vk, 3 * Lam)
    assert np.trace(P0).real == pytest.approx(1.0)
    used = np.trace(Pk, axis1=1, axis2=2).sum().real + np.trace(PL).real
    assert used <= 1.0 + 1e-12
    assert s < 1 / 3 + 1e-2
    assert fronthaul_slack(inst, P0, Pk, PL) >= -1e-9


def test_polish_projects_out_negative_eigenvalues():
    cfg, ch, bf = case()
    inst = prepare_instance("perbs", ch, bf, cfg)
    (V0, Vk, Lam), _ = init_aux(inst)
    bad = Lam - 1e-3 * np.eye(3)
    (_, Pk, PL), _ = polish_feasibility(inst, V0, Vk, bad)
    assert np.linalg.eigvalsh(PL).min() >= -1e-15
    per = np.real(np.diagonal(Pk, axis1=1, axis2=2).sum(0) + np.diag(PL))
    assert np.all(per <= inst.budgets * (1 + 1e-12))


def test_polish_leaves_feasible_points_alone():
    cfg, ch, bf = case()
    inst = prepare_instance("total", ch, bf, cfg)
    (V0, Vk, Lam), _ = init_aux(inst)
    (P0, Pk, PL), s = polish_feasibility(inst, V0, Vk, Lam)
    assert s == 1.0
    np.testing.assert_allclose(Pk, Vk, atol=1e-15)
