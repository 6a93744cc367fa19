"""Noise-normalized problem data shared by the solvers.

Access-side matrices are scaled so that the receiver noise W_mm*N0 equals 1 and
powers are measured in units of the BS power reference; fronthaul matrices are
scaled so that W_mc*N0 equals 1 with V0 measured in units of the CP budget.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..analogbf import AnalogBeamformer, effective_channel
from ..model import ChannelSet, SystemConfig
from ..rates import BFSolution

VARIANTS = ("total", "perbs", "robust")


class PowerMode(str, Enum):
    TOTAL = "total"
    PER_BS = "perbs"


@dataclass(frozen=True)
class PowerConstraintSpec:
    mode: PowerMode
    budgets: tuple[float, ...]   # one entry for TOTAL, L entries for PER_BS (W)

    def __post_init__(self):
        if not self.budgets or any(b <= 0 for b in self.budgets):
            raise ValueError("power budgets must be positive")

    @classmethod
    def for_variant(cls, variant: str, cfg: SystemConfig) -> "PowerConstraintSpec":
        if variant == "perbs":
            return cls(PowerMode.PER_BS, tuple(cfg.p_bs_per))
        return cls(PowerMode.TOTAL, (cfg.p_bs_total,))

    def selection(self, l: int, L: int) -> np.ndarray:
        """Diagonal selector picking BS l's digital weight."""
        B = np.zeros((L, L))
        B[l, l] = 1.0
        return B


def outer(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex).ravel()
    return np.outer(h.conj(), h)


@dataclass
class ScaledInstance:
    variant: str
    K: int
    Z: int
    L: int
    N: int
    eta: float
    p_ref: float            # W per unit of access power
    p_cp: float             # W per unit of CP power
    hbar: np.ndarray        # (K, L) scaled effective user channels
    hebar: np.ndarray       # (Z, L) scaled effective Eve channels (true or estimated)
    H: np.ndarray           # (K, L, L)
    He: np.ndarray          # (Z, L, L)
    G: np.ndarray           # (L, N, N)
    g: np.ndarray           # (L, N) scaled fronthaul rows
    power: PowerConstraintSpec
    budgets: np.ndarray     # normalized budgets
    F: np.ndarray           # (M*L, L)
    he_hat: np.ndarray      # (Z, M*L) scaled estimated Eve channels
    sigma: np.ndarray       # (Z,)

    @property
    def robust(self) -> bool:
        return self.variant == "robust"

    @property
    def total_budget(self) -> float:
        return float(self.budgets.sum())

    def to_physical(self, V0n, Vkn, Lamn, v0n=None, vkn=None) -> BFSolution:
        sol = BFSolution(V0=V0n * self.p_cp, Vk=Vkn * self.p_ref, Lambda=Lamn * self.p_ref)
        if v0n is not None:
            sol.v0 = np.asarray(v0n) * np.sqrt(self.p_cp)
        if vkn is not None:
            sol.vk = np.asarray(vkn) * np.sqrt(self.p_ref)
        return sol

    def to_normalized(self, sol: BFSolution):
        return sol.V0 / self.p_cp, sol.Vk / self.p_ref, sol.Lambda / self.p_ref


def prepare_instance(variant: str, channels: ChannelSet, bf: AnalogBeamformer, cfg: SystemConfig,
                     power: PowerConstraintSpec | None = None) -> ScaledInstance:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    channels.check(cfg)
    if not np.any(channels.h) or not np.any(channels.g):
        raise ValueError("user or fronthaul channels are all zero")
    power = power or PowerConstraintSpec.for_variant(variant, cfg)
    p_ref = cfg.p_bs_total
    a = np.sqrt(p_ref / (cfg.bw_mmwave * cfg.noise_psd))
    b = np.sqrt(cfg.p_cp / (cfg.bw_microwave * cfg.noise_psd))
    hbar = effective_channel(channels.h, bf) * a
    he_src = channels.he_est if variant == "robust" else channels.he_true
    he_hat = np.asarray(he_src, dtype=complex) * a
    hebar = effective_channel(he_hat, bf) if cfg.n_eves else np.zeros((0, cfg.n_bs), dtype=complex)
    g = np.asarray(channels.g) * b
    return ScaledInstance(
        variant=variant, K=cfg.n_users, Z=cfg.n_eves, L=cfg.n_bs, N=cfg.n_cp_antennas, eta=cfg.eta,
        p_ref=p_ref, p_cp=cfg.p_cp, hbar=hbar, hebar=hebar,
        H=np.array([outer(h) for h in hbar]),
        He=np.array([outer(h) for h in hebar]).reshape(cfg.n_eves, cfg.n_bs, cfg.n_bs),
        G=np.array([outer(x) for x in g]), g=g, power=power,
        budgets=np.asarray(power.budgets, dtype=float) / p_ref,
        F=bf.F, he_hat=he_hat.reshape(cfg.n_eves, bf.F.shape[0]),
        sigma=np.asarray(cfg.csi_error_ratio if variant == "robust" else (0.0,) * cfg.n_eves, dtype=float),
    )
