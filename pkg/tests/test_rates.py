import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cransec.analogbf import AnalogBeamformer, design_analog_bf, effective_channel
from cransec.model import ChannelSet, SystemConfig, draw_instance
from cransec.rates import (
    BFSolution, RateReport, access_rate, eavesdrop_rate, fronthaul_cap_margin, fronthaul_feasibility, fronthaul_rate,
    secrecy_rates, sinr,
)

W_MM, W_MC, N0 = 50e6, 20e6, 1e-20


def crandn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2)


def random_solution(rng, K=2, L=3, N=8, scale=1e-9):
    vk = crandn(rng, K, L) * np.sqrt(scale)
    v0 = crandn(rng, N)
    A = crandn(rng, L, L) * np.sqrt(scale)
    return BFSolution.from_vectors(v0, vk, 0.1 * A @ A.conj().T)


def report(access, fh, eve=None):
    access = np.asarray(access, dtype=float)
    eve = np.zeros((access.size, 0)) if eve is None else np.asarray(eve, dtype=float)
    return RateReport(np.array([fh]), fh, access, eve, np.maximum(0, access - eve.max(axis=1, initial=0)),
                      np.zeros(access.size))


# -- fronthaul -------------------------------------------------------------------

def test_fronthaul_rate_examples():
    g = np.array([1.0, 1j])
    assert fronthaul_rate(g, np.zeros((2, 2)), W_MC, N0) == 0.0
    v0 = np.array([np.sqrt(W_MC * N0), 0.0])
    assert fronthaul_rate(g, v0, W_MC, N0) == pytest.approx(W_MC)
    with pytest.raises(ValueError):
        fronthaul_rate(g, -np.eye(2), W_MC, N0)


@given(seed=st.integers(0, 10_000))
def test_fronthaul_matrix_and_vector_forms_agree(seed):
    rng = np.random.default_rng(seed)
    g, v0 = crandn(rng, 8) * 1e-6, crandn(rng, 8)
    a = fronthaul_rate(g, np.outer(v0, v0.conj()), W_MC, N0)
    b = fronthaul_rate(g, v0, W_MC, N0)
    assert a == pytest.approx(b, rel=1e-9)


# -- access and eavesdropping ----------------------------------------------------------

def test_access_rate_examples():
    h = np.array([1.0, 0.0, 0.0])
    Vk = np.zeros((2, 3, 3))
    assert access_rate(0, h, Vk, np.zeros((3, 3)), W_MM, N0) == 0.0
    V = np.zeros((1, 3, 3))
    V[0, 0, 0] = W_MM * N0
    assert access_rate(0, h, V, np.zeros((3, 3)), W_MM, N0) == pytest.approx(W_MM)


def test_two_user_rates_by_hand():
    h = np.array([[1.0, 0.0], [0.0, 2.0]])
    he = np.array([[1.0, 1.0]])
    v = np.array([[1.0, 0.0], [0.5, 0.5]])
    Vk = np.einsum("ki,kj->kij", v, v.conj())
    Lam = 0.1 * np.eye(2)
    noise = 1.0
    bw = 1.0 / noise          # W N0 = 1 with N0 = 1
    r1 = np.log2(1 + 1.0 / (0.25 + 0.1 + 1))
    r2 = np.log2(1 + 1.0 / (0.0 + 0.4 + 1))
    e1 = np.log2(1 + 1.0 / (1.0 + 0.2 + 1))
    e2 = np.log2(1 + 1.0 / (1.0 + 0.2 + 1))
    assert access_rate(0, h[0], Vk, Lam, bw, 1.0) == pytest.approx(r1)
    assert access_rate(1, h[1], Vk, Lam, bw, 1.0) == pytest.approx(r2)
    assert eavesdrop_rate(0, 0, he[0], Vk, Lam, bw, 1.0) == pytest.approx(e1)
    assert eavesdrop_rate(1, 0, he[0], Vk, Lam, bw, 1.0) == pytest.approx(e2)
    assert sinr(h[0], 0, Vk, Lam, 1.0) == pytest.approx(1.0 / 1.35)
    # the same numbers through the full report: single-antenna BSs make F the identity
    cfg = SystemConfig(n_bs=2, n_bs_antennas=1, n_users=2, n_eves=1, bw_mmwave=1.0, noise_psd=1.0)
    bf = AnalogBeamformer.from_indices(np.zeros((2, 1), dtype=int), 3)
    ch = ChannelSet(g=np.ones((2, 8), dtype=complex), h=h.astype(complex), he_true=he.astype(complex),
                    he_est=he.astype(complex))
    rep = secrecy_rates(BFSolution(V0=np.eye(8), Vk=Vk, Lambda=Lam), ch, bf, cfg)
    np.testing.assert_allclose(rep.secrecy, [r1 - e1, r2 - e2], rtol=1e-12)
    assert rep.sum_secrecy == pytest.approx(0.4961721654523, rel=1e-10)


def test_eavesdrop_special_cases():
    rng = np.random.default_rng(0)
    sol = random_solution(rng)
    hk = crandn(rng, 3) * 1e-3
    assert eavesdrop_rate(0, 0, np.zeros(3), sol.Vk, sol.Lambda, W_MM, N0) == 0.0
    assert eavesdrop_rate(1, 0, hk, sol.Vk, sol.Lambda, W_MM, N0) == pytest.approx(
        access_rate(1, hk, sol.Vk, sol.Lambda, W_MM, N0))


def test_eavesdrop_rate_falls_with_artificial_noise():
    rng = np.random.default_rng(1)
    sol = random_solution(rng)
    he = crandn(rng, 3) * 1e-3
    rates = [eavesdrop_rate(0, 0, he, sol.Vk, c * 1e-9 * np.eye(3), W_MM, N0) for c in (1, 10, 100)]
    assert rates[0] > rates[1] > rates[2]


@given(seed=st.integers(0, 10_000))
def test_matrix_and_vector_access_rates_agree(seed):
    rng = np.random.default_rng(seed)
    sol = random_solution(rng)
    h = crandn(rng, 3) * 1e-3
    for k in range(2):
        a = access_rate(k, h, sol.Vk, sol.Lambda, W_MM, N0)
        b = access_rate(k, h, sol.vk, sol.Lambda, W_MM, N0)
        assert a == pytest.approx(b, rel=1e-9)


# -- solution container ----------------------------------------------------------------

def test_solution_checks():
    rng = np.random.default_rng(2)
    sol = random_solution(rng)
    sol.check()
    assert sol.n_users == 2
    assert sol.bs_power() == pytest.approx(np.sum(np.abs(sol.vk) ** 2) + np.trace(sol.Lambda).real)
    np.testing.assert_allclose(sol.per_bs_power().sum(), sol.bs_power())
    bad = BFSolution(V0=sol.V0, Vk=sol.Vk, Lambda=-np.eye(3))
    with pytest.raises(ValueError):
        bad.check()
    wrong = BFSolution(V0=sol.V0, Vk=sol.Vk * 2, Lambda=sol.Lambda, v0=sol.v0, vk=sol.vk)
    with pytest.raises(ValueError):
        wrong.check()


# -- full reports ----------------------------------------------------------------------

def instance(seed=0, **kw):
    cfg = SystemConfig(rng_seed=seed, **kw)
    _, ch = draw_instance(cfg)
    return cfg, ch, design_analog_bf(ch, cfg)


def feasible_solution(cfg, rng):
    vk = crandn(rng, cfg.n_users, cfg.n_bs)
    vk *= np.sqrt(0.5 * cfg.p_bs_total / np.sum(np.abs(vk) ** 2))
    v0 = crandn(rng, cfg.n_cp_antennas)
    v0 *= np.sqrt(cfg.p_cp) / np.linalg.norm(v0)
    return BFSolution.from_vectors(v0, vk, 0.5 * cfg.p_bs_total / cfg.n_bs * np.eye(cfg.n_bs))


def test_report_structure_and_clamp():
    cfg, ch, bf = instance(3, n_eves=2)
    sol = feasible_solution(cfg, np.random.default_rng(0))
    rep = secrecy_rates(sol, ch, bf, cfg)
    assert rep.fronthaul_min == pytest.approx(rep.fronthaul_per_bs.min())
    np.testing.assert_allclose(rep.secrecy, np.maximum(0, rep.access - rep.eavesdrop.max(axis=1)))
    assert rep.eavesdrop.shape == (2, 2)
    # an Eve sitting on user 0's channel overhears at user 0's rate
    he = ch.h[:1].copy()
    rep2 = secrecy_rates(sol, ch, bf, cfg, eve_channels=he)
    assert rep2.secrecy[0] == 0.0


def test_zero_channel_eves_give_secrecy_equal_to_access():
    cfg, ch, bf = instance(4)
    sol = feasible_solution(cfg, np.random.default_rng(1))
    rep = secrecy_rates(sol, ch, bf, cfg, eve_channels=np.zeros((1, 12)))
    np.testing.assert_allclose(rep.secrecy, rep.access)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), c=st.floats(1.0, 100.0))
def test_stronger_eves_never_raise_secrecy(seed, c):
    cfg, ch, bf = instance(seed)
    sol = feasible_solution(cfg, np.random.default_rng(seed))
    base = secrecy_rates(sol, ch, bf, cfg).secrecy
    scaled = secrecy_rates(sol, ch, bf, cfg, eve_channels=c * ch.he_true).secrecy
    assert np.all(scaled <= base + 1e-9 * cfg.bw_mmwave)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), delta=st.floats(1e-6, 1.0))
def test_more_artificial_noise_never_raises_any_rate(seed, delta):
    cfg, ch, bf = instance(seed)
    sol = feasible_solution(cfg, np.random.default_rng(seed))
    more = BFSolution(V0=sol.V0, Vk=sol.Vk, Lambda=sol.Lambda + delta * cfg.p_bs_total * np.eye(cfg.n_bs))
    a, b = secrecy_rates(sol, ch, bf, cfg), secrecy_rates(more, ch, bf, cfg)
    assert np.all(b.access <= a.access + 1e-6)
    assert np.all(b.eavesdrop <= a.eavesdrop + 1e-6)


def test_report_uses_vectors_when_present():
    cfg, ch, bf = instance(5)
    sol = feasible_solution(cfg, np.random.default_rng(2))
    mats = BFSolution(V0=sol.V0, Vk=sol.Vk, Lambda=sol.Lambda)
    a, b = secrecy_rates(sol, ch, bf, cfg), secrecy_rates(mats, ch, bf, cfg)
    np.testing.assert_allclose(a.access, b.access, rtol=1e-9)
    np.testing.assert_allclose(a.fronthaul_per_bs, b.fronthaul_per_bs, rtol=1e-9)


def test_effective_channels_enter_the_report():
    cfg, ch, bf = instance(6)
    sol = feasible_solution(cfg, np.random.default_rng(3))
    hbar = effective_channel(ch.h, bf)
    rep = secrecy_rates(sol, ch, bf, cfg)
    expected = access_rate(1, hbar[1], sol.Vk, sol.Lambda, cfg.bw_mmwave, cfg.noise_psd)
    assert rep.access[1] == pytest.approx(expected)
    other = AnalogBeamformer.from_indices(np.zeros_like(bf.phase_index), bf.bits)
    assert secrecy_rates(sol, ch, other, cfg).access[1] != pytest.approx(expected)


# -- time-share feasibility ----------------------------------------------------------------

def test_feasibility_boundary_and_examples():
    ok, t = fronthaul_feasibility(report([1.0, 2.0], 3.0))
    assert ok and t.sum() == pytest.approx(1.0)
    ok, t = fronthaul_feasibility(report([0.0, 0.0], 3.0))
    assert ok and np.all(t == 0)
    ok, t = fronthaul_feasibility(report([2.0, 2.5], 3.0))
    assert not ok and t.sum() == pytest.approx(1.5)


def test_feasibility_without_fronthaul():
    ok, t = fronthaul_feasibility(report([0.0, 1.0], 0.0))
    assert not ok and t[1] == np.inf and t[0] == 0
    ok, t = fronthaul_feasibility(report([0.0, 0.0], 0.0))
    assert ok


@given(acc=st.lists(st.floats(0, 10), min_size=1, max_size=5), fh=st.floats(0.1, 50))
def test_feasibility_matches_sum_constraint(acc, fh):
    rep = report(acc, fh)
    ok, t = fronthaul_feasibility(rep)
    assert ok == (sum(acc) / fh <= 1 + 1e-9)
    assert (fronthaul_cap_margin(rep) >= -1e-9 * fh) == (sum(acc) <= fh * (1 + 1e-9)) or abs(sum(acc) - fh) < 1e-6
    np.testing.assert_allclose(t * fh, acc, rtol=1e-12, atol=1e-12)


def test_channel_set_type_is_accepted():
    cfg, ch, bf = instance(7)
    assert isinstance(ch, ChannelSet)
