import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cransec.analogbf import design_analog_bf
from cransec.io import load_case, pack, save_case, solution_from_dict, solution_to_dict, unpack
from cransec.model import SystemConfig, draw_instance
from cransec.rates import BFSolution


@given(seed=st.integers(0, 10_000), shape=st.lists(st.integers(0, 4), min_size=0, max_size=3))
def test_pack_round_trip_is_exact(seed, shape):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    b = unpack(pack(a))
    assert b.shape == a.shape
    np.testing.assert_array_equal(b, a)


def test_case_round_trip(tmp_path):
    cfg = SystemConfig(rng_seed=8, n_eves=2, csi_error_ratio=(0.05, 0.01))
    _, ch = draw_instance(cfg)
    bf = design_analog_bf(ch, cfg)
    rng = np.random.default_rng(0)
    vk = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
    sol = BFSolution.from_vectors(np.ones(8) / np.sqrt(8), vk, 0.1 * np.eye(3))
    path = save_case(tmp_path / "sub" / "case.json", cfg, ch, bf, sol)
    cfg2, ch2, bf2, sol2 = load_case(path)
    assert cfg2 == cfg
    for name in ("g", "h", "he_true", "he_est", "user_gains", "user_angles"):
        np.testing.assert_array_equal(getattr(ch2, name), getattr(ch, name))
    assert ch2.user_angles.dtype == float
    np.testing.assert_array_equal(bf2.f, bf.f)
    np.testing.assert_array_equal(bf2.phase_index, bf.phase_index)
    assert bf2.bits == bf.bits
    np.testing.assert_array_equal(sol2.vk, sol.vk)
    np.testing.assert_array_equal(sol2.Vk, sol.Vk)


def test_case_without_optional_parts(tmp_path):
    cfg = SystemConfig(n_eves=0)
    _, ch = draw_instance(cfg)
    _, ch2, bf, sol = load_case(save_case(tmp_path / "c.json", cfg, ch))
    assert bf is None and sol is None
    assert ch2.he_true.shape == (0, 12)


def test_matrix_only_solution_round_trip():
    sol = BFSolution(V0=np.eye(2), Vk=np.zeros((1, 3, 3)), Lambda=np.eye(3))
    back = solution_from_dict(solution_to_dict(sol))
    assert back.v0 is None and back.vk is None
    np.testing.assert_array_equal(back.Lambda, sol.Lambda)
