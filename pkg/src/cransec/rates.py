"""Exact rate evaluation: fronthaul, access, wiretap and secrecy.

Everything here is a direct formula evaluation and serves as the reference
against which solver outputs are scored.  Rates are in bit/s.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analogbf import AnalogBeamformer, effective_channel
from .model import ChannelSet, SystemConfig

FEAS_TOL = 1e-9


@dataclass
class BFSolution:
    V0: np.ndarray              # (N, N)
    Vk: np.ndarray              # (K, L, L)
    Lambda: np.ndarray          # (L, L)
    v0: np.ndarray | None = None
    vk: np.ndarray | None = None  # (K, L)

    def __post_init__(self):
        self.V0 = np.asarray(self.V0, dtype=complex)
        self.Vk = np.asarray(self.Vk, dtype=complex)
        self.Lambda = np.asarray(self.Lambda, dtype=complex)

    @classmethod
    def from_vectors(cls, v0, vk, Lambda):
        v0 = np.asarray(v0, dtype=complex)
        vk = np.atleast_2d(np.asarray(vk, dtype=complex))
        return cls(V0=np.outer(v0, v0.conj()),
                   Vk=np.einsum("ki,kj->kij", vk, vk.conj()),
                   Lambda=Lambda, v0=v0, vk=vk)

    @property
    def n_users(self) -> int:
        return self.Vk.shape[0]

    def bs_power(self) -> float:
        return float(np.real(np.trace(self.Vk, axis1=1, axis2=2).sum() + np.trace(self.Lambda)))

    def per_bs_power(self) -> np.ndarray:
        return np.real(np.diagonal(self.Vk, axis1=1, axis2=2).sum(axis=0) + np.diag(self.Lambda))

    def cp_power(self) -> float:
        return float(np.real(np.trace(self.V0)))

    def check(self, herm_tol=1e-9, eig_tol=1e-8, rank1_tol=1e-6) -> None:
        mats = [("V0", self.V0), ("Lambda", self.Lambda)] + [(f"V{k + 1}", v) for k, v in enumerate(self.Vk)]
        for name, X in mats:
            scale = max(1.0, np.abs(X).max())
            if np.abs(X - X.conj().T).max() > herm_tol * scale:
                raise ValueError(f"{name} is not Hermitian")
            if np.linalg.eigvalsh((X + X.conj().T) / 2).min() < -eig_tol * scale:
                raise ValueError(f"{name} is not PSD")
        pairs = []
        if self.v0 is not None:
            pairs.append(("V0", self.V0, self.v0))
        if self.vk is not None:
            pairs += [(f"V{k + 1}", self.Vk[k], self.vk[k]) for k in range(self.n_users)]
        for name, X, v in pairs:
            ref = np.linalg.norm(X)
            if np.linalg.norm(X - np.outer(v, v.conj())) > rank1_tol * max(ref, 1e-300):
                raise ValueError(f"{name} does not match its vector factor")


@dataclass
class RateReport:
    fronthaul_per_bs: np.ndarray
    fronthaul_min: float
    access: np.ndarray
    eavesdrop: np.ndarray       # (K, Z)
    secrecy: np.ndarray
    time_shares: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def sum_secrecy(self) -> float:
        return float(self.secrecy.sum())

    @property
    def sum_access(self) -> float:
        return float(self.access.sum())


def _power_form(h, X):
    h = np.asarray(h, dtype=complex).ravel()
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        return float(abs(h @ X) ** 2)
    return float(np.real(h @ X @ h.conj()))


def fronthaul_rate(g_l, V0_or_v0, bw_microwave: float, noise_psd: float) -> float:
    """W_mc log2(1 + g V0 g^H / (W_mc N0)); accepts a matrix or a beam vector."""
    p = _power_form(g_l, V0_or_v0)
    if p < -1e-12 * max(1.0, np.abs(V0_or_v0).max() * np.linalg.norm(g_l) ** 2):
        raise ValueError(f"negative received fronthaul power {p}")
    return bw_microwave * np.log2(1.0 + max(p, 0.0) / (bw_microwave * noise_psd))


def _sinr_rate(hb, k, Vk, Lambda, bw, noise_psd) -> float:
    sig = _power_form(hb, Vk[k])
    interf = sum(_power_form(hb, Vk[i]) for i in range(len(Vk)) if i != k)
    interf += _power_form(hb, Lambda)
    return bw * np.log2(1.0 + sig / (interf + bw * noise_psd))


def access_rate(k: int, hbar_k, Vk, Lambda, bw_mmwave: float, noise_psd: float) -> float:
    """Rate of user k with interference from the other users' streams and the AN."""
    return _sinr_rate(hbar_k, k, Vk, Lambda, bw_mmwave, noise_psd)


def eavesdrop_rate(k: int, z: int | None, hbar_e, Vk, Lambda, bw_mmwave: float, noise_psd: float) -> float:
    """Rate at which an Eve with effective channel ``hbar_e`` overhears user k.

    ``z`` is carried only for bookkeeping; the channel fully determines the value.
    """
    return _sinr_rate(hbar_e, k, Vk, Lambda, bw_mmwave, noise_psd)


def sinr(hbar, k, Vk, Lambda, noise) -> float:
    sig = _power_form(hbar, Vk[k])
    interf = sum(_power_form(hbar, Vk[i]) for i in range(len(Vk)) if i != k) + _power_form(hbar, Lambda)
    return sig / (interf + noise)


def fronthaul_feasibility(report: RateReport, tol: float = FEAS_TOL):
    """Time shares t_k = R_k / R_FH and whether they fit in one frame."""
    acc = np.asarray(report.access, dtype=float)
    rfh = float(report.fronthaul_min)
    if rfh <= 0:
        if np.all(acc == 0):
            return True, np.zeros_like(acc)
        t = np.where(acc > 0, np.inf, 0.0)
        return False, t
    t = acc / rfh
    return bool(t.sum() <= 1.0 + tol), t


def secrecy_rates(solution: BFSolution, channels: ChannelSet, bf: AnalogBeamformer, cfg: SystemConfig,
                  eve_channels: np.ndarray | None = None) -> RateReport:
    """Full rate report; ``eve_channels`` overrides the true Eve channels (rows of length M*L)."""
    V0, Vk, Lam = solution.V0, solution.Vk, solution.Lambda
    if solution.v0 is not None:
        V0 = solution.v0
    vk_or_Vk = solution.vk if solution.vk is not None else Vk
    W, N0 = cfg.bw_mmwave, cfg.noise_psd
    fh = np.array([fronthaul_rate(channels.g[l], V0, cfg.bw_microwave, N0) for l in range(channels.n_bs)])
    hbar = effective_channel(channels.h, bf)
    he = channels.he_true if eve_channels is None else np.asarray(eve_channels)
    hebar = effective_channel(he, bf) if he.size else np.zeros((0, bf.n_bs), dtype=complex)
    K, Z = hbar.shape[0], hebar.shape[0]
    acc = np.array([access_rate(k, hbar[k], vk_or_Vk, Lam, W, N0) for k in range(K)])
    ev = np.array([[eavesdrop_rate(k, z, hebar[z], vk_or_Vk, Lam, W, N0) for z in range(Z)] for k in range(K)])
    ev = ev.reshape(K, Z)
    worst = ev.max(axis=1) if Z else np.zeros(K)
    sec = np.maximum(0.0, acc - worst)
    report = RateReport(fronthaul_per_bs=fh, fronthaul_min=float(fh.min()), access=acc,
                        eavesdrop=ev, secrecy=sec, time_shares=np.zeros(K))
    _, report.time_shares = fronthaul_feasibility(report)
    return report


def fronthaul_cap_margin(report: RateReport) -> float:
    """min_l R_l - sum_k R_k (bit/s); negative means the cap is violated."""
    return float(report.fronthaul_min - report.access.sum())
