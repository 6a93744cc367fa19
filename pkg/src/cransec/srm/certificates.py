"""Dual-based rank certificates and KKT stationarity checks.

All multipliers are in the normalized units of :mod:`.instance`.  Positive
scalings of the problem data leave the sign conditions unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import conic
from ..conic import DualInfo, numerical_rank
from .instance import PowerMode, ScaledInstance

DUAL_TOL = 1e-8


def _psd_dual_22(duals: DualInfo, tag: str, key) -> float:
    return float(np.asarray(duals.get(tag, key))[1, 1])


def _hf(inst: ScaledInstance, z: int) -> np.ndarray:
    return conic.sproc_blocks(inst.F, inst.he_hat[z], inst.sigma[z])[0]


def psi9(duals: DualInfo, inst: ScaledInstance, V0) -> np.ndarray:
    """Fronthaul multipliers in the trace form (the cone dual divided by 1 + SNR_l)."""
    fh = np.array([float(np.real(np.sum(inst.G[l] * V0.T))) for l in range(inst.L)])
    raw = np.array([duals.get("psi9", l) for l in range(inst.L)], dtype=float)
    return raw / (1.0 + fh)


def power_term(duals: DualInfo, inst: ScaledInstance) -> np.ndarray:
    L = inst.L
    if inst.power.mode == PowerMode.TOTAL:
        return duals.get("psi1", None) * np.eye(L)
    return np.diag([duals.get("psi_bs", l) for l in range(L)]).astype(complex)


def eve_term(duals: DualInfo, inst: ScaledInstance, k: int) -> np.ndarray:
    """The eavesdropper part of Y_k."""
    K, Z, L = inst.K, inst.Z, inst.L
    out = np.zeros((L, L), dtype=complex)
    for z in range(Z):
        if inst.robust:
            HF = _hf(inst, z)
            T1 = duals.get("T1", (k, z))
            out += HF.conj().T @ T1 @ HF
            for i in range(K):
                if i != k:
                    out -= HF.conj().T @ duals.get("T2", (i, z)) @ HF
        else:
            coef = duals.get("psi5", (k, z)) - sum(_psd_dual_22(duals, "psi6", (i, z)) for i in range(K) if i != k)
            out += coef * inst.He[z]
    return out


def compute_Y(duals: DualInfo, inst: ScaledInstance, k: int) -> np.ndarray:
    """Y_k: the part of the V_k stationarity condition that excludes the psi4 term."""
    K = inst.K
    Y = power_term(duals, inst).astype(complex)
    for i in range(K):
        if i != k:
            Y = Y + (duals.get("psi3", i) - _psd_dual_22(duals, "psi8", i)) * inst.H[i]
    Y = Y + eve_term(duals, inst, k)
    Y = Y + duals.get("psi7", k) * inst.H[k]
    return (Y + Y.conj().T) / 2


def kkt_residuals(duals: DualInfo, inst: ScaledInstance, V0) -> dict:
    """Relative Frobenius mismatch of Omega_k = Y_k - psi4 H_k and Omega_0 = psi2 I - sum psi9 G_l."""
    out = {}
    for k in range(inst.K):
        Om = duals.get("Omega", k + 1)
        rhs = compute_Y(duals, inst, k) - duals.get("psi4", k) * inst.H[k]
        out[k + 1] = float(np.linalg.norm(Om - rhs) / max(np.linalg.norm(rhs), np.linalg.norm(Om), 1e-12))
    p9 = psi9(duals, inst, V0)
    rhs0 = duals.get("psi2", None) * np.eye(inst.N) - np.einsum("l,lij->ij", p9, inst.G)
    Om0 = duals.get("Omega", 0)
    out[0] = float(np.linalg.norm(Om0 - rhs0) / max(np.linalg.norm(rhs0), np.linalg.norm(Om0), 1e-12))
    return out


@dataclass
class CertificateReport:
    variant: str
    psi2_positive: bool
    strict_min_channel: bool | None
    user_conditions: dict = field(default_factory=dict)   # k -> dict of named bools
    user_certified: dict = field(default_factory=dict)    # k -> bool
    ranks: dict = field(default_factory=dict)             # "V0", "V1", ... -> int
    notes: list = field(default_factory=list)

    @property
    def all_certified(self) -> bool:
        return self.psi2_positive and all(self.user_certified.values())

    def summary(self) -> str:
        parts = [f"psi2>0={self.psi2_positive}"]
        parts += [f"user{k + 1}={'ok' if v else 'fail'}" for k, v in self.user_certified.items()]
        parts += self.notes
        return "; ".join(parts)


REQUIRED = {
    "total": ("psi1", "psi2", "psi3", "psi4", "psi7", "psi8"),
    "perbs": ("psi_bs", "psi2", "psi3", "psi4", "psi7", "psi8"),
    "robust": ("psi1", "psi2", "psi3", "psi4", "psi7", "psi8"),
}


def check_rank_certificates(duals: DualInfo, variant: str, inst: ScaledInstance | None = None,
                            point=None, tol: float = DUAL_TOL, n_users: int | None = None,
                            n_eves: int | None = None) -> CertificateReport:
    """Evaluate the sufficient multiplier conditions for rank-one optimal matrices.

    ``inst`` is needed for the robust PSD condition and the fronthaul-channel
    condition; ``point`` (normalized V0, Vk, Lambda) adds measured ranks.
    """
    if variant not in REQUIRED:
        raise ValueError(f"unknown variant {variant!r}")
    tags = list(REQUIRED[variant])
    K = inst.K if inst is not None else n_users
    Z = inst.Z if inst is not None else n_eves
    if K is None or Z is None:
        raise ValueError("need an instance or explicit user/Eve counts")
    if Z:
        tags += ["T1", "T2"] if variant == "robust" else ["psi5", "psi6"]
    duals.require(*tags)
    if variant == "robust" and Z and inst is None:
        raise ValueError("robust certificate needs the instance")

    psi2 = duals.get("psi2", None)
    strict = None
    if inst is not None:
        norms = np.linalg.norm(inst.g, axis=1)
        order = np.sort(norms)
        strict = bool(order.size == 1 or order[0] < order[1])
    rep = CertificateReport(variant, bool(psi2 > tol), strict)

    if variant == "perbs":
        power_ok = all(duals.get("psi_bs", l) > tol for l in duals.values["psi_bs"])
    else:
        power_ok = bool(duals.get("psi1", None) > tol)
    for k in range(K):
        cond = {"power_multiplier_positive": power_ok}
        cond["interference_terms_nonneg"] = all(
            duals.get("psi3", i) - _psd_dual_22(duals, "psi8", i) >= -tol for i in range(K) if i != k)
        if Z:
            if variant == "robust":
                M = eve_term(duals, inst, k)
                cond["eve_matrix_psd"] = bool(np.linalg.eigvalsh(M).min() >= -tol * max(1.0, np.abs(M).max()))
            else:
                cond["eve_terms_nonneg"] = all(
                    duals.get("psi5", (k, z)) - sum(_psd_dual_22(duals, "psi6", (i, z)) for i in range(K) if i != k)
                    >= -tol for z in range(Z))
        rep.user_conditions[k] = cond
        rep.user_certified[k] = all(cond.values())

    if point is not None:
        V0, Vk, _ = point
        rep.ranks["V0"] = numerical_rank(V0)
        for k in range(K):
            rep.ranks[f"V{k + 1}"] = numerical_rank(Vk[k])
            if rep.ranks[f"V{k + 1}"] == 1 and not rep.user_certified[k]:
                rep.notes.append(f"V{k + 1} rank-one without certificate")
        if rep.ranks["V0"] == 1 and not (rep.psi2_positive and strict):
            rep.notes.append("V0 rank-one without certificate")
    if not any(rep.user_certified.values()) and not rep.psi2_positive:
        rep.notes.append("no sufficient condition holds")
    return rep
