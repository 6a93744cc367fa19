"""Plain-numpy evaluation of the subproblem constraints and surrogate objective.

Independent of cvxpy, so it can check seeds, feasibility transfer between
iterations and the effect of rank-recovery steps.  Each residual is g(x)
with g <= 0 meaning satisfied; PSD blocks report minus their smallest
eigenvalue.
"""
from __future__ import annotations

import numpy as np

from .. import conic
from .instance import PowerMode, ScaledInstance
from .state import Anchors, AuxState, link_quantities

LN2 = np.log(2.0)


def _min_eig(M) -> float:
    M = np.asarray(M)
    return float(np.linalg.eigvalsh((M + M.conj().T) / 2).min())


def sproc_matrix(inst: ScaledInstance, z: int, X, weight: float, scalar: float, form: str) -> np.ndarray:
    """Numeric complex version of the S-procedure block built by :func:`conic.sproc_lmi`."""
    HF, S1, e = conic.sproc_blocks(inst.F, inst.he_hat[z], inst.sigma[z])
    sign = -1.0 if form == "upper" else 1.0
    return weight * S1 + sign * HF @ X @ HF.conj().T + scalar * e


def constraint_residuals(inst: ScaledInstance, point, aux: AuxState, anchors: Anchors) -> dict:
    """Residual g (feasible iff g <= 0) and a magnitude scale for every constraint family."""
    V0, Vk, Lam = point
    K, Z = inst.K, inst.Z
    q = link_quantities(inst, V0, Vk, Lam)
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def put(tag, g, scale):
        out[tag] = (np.atleast_1d(np.asarray(g, dtype=float)), np.atleast_1d(np.abs(np.asarray(scale, dtype=float))))

    tr = np.real(np.trace(Vk, axis1=1, axis2=2)).sum() + np.real(np.trace(Lam))
    if inst.power.mode == PowerMode.TOTAL:
        put("psi1", tr - inst.budgets[0], inst.budgets[0])
    else:
        per = np.real(np.diagonal(Vk, axis1=1, axis2=2).sum(0) + np.diag(Lam))
        put("psi_bs", per - inst.budgets, inst.budgets)
    put("psi2", np.real(np.trace(V0)) - 1.0, 1.0)
    put("psi3", q.I + 1 - aux.eps, aux.eps)
    put("psi4", anchors.c1 * aux.eps ** 2 + anchors.c2 * aux.beta ** 2 - q.S, q.S)
    put("psi7", q.S - aux.tau - aux.theta, q.S)
    put("psi_lambda", aux.theta - 2 * anchors.lam_n * aux.lam + anchors.lam_n ** 2,
        np.maximum(np.abs(aux.theta), anchors.lam_n ** 2))
    put("psi8", [-_min_eig([[aux.tau[k], aux.lam[k]], [aux.lam[k], q.I[k]]]) for k in range(K)],
        np.maximum(aux.tau, q.I))
    put("psi9", aux.omega / inst.eta - np.log1p(q.fh), np.abs(aux.omega / inst.eta))
    tau_n = anchors.tau_n
    lin = np.sum(np.log1p(tau_n) + (aux.tau - tau_n) / (1 + tau_n))
    put("psi_fh", lin - aux.omega, abs(aux.omega))
    if Z:
        if inst.robust:
            t1 = np.zeros((K, Z))
            t2 = np.zeros((K, Z))
            tot = Vk.sum(0) + Lam
            for k in range(K):
                for z in range(Z):
                    A = sproc_matrix(inst, z, Vk[k], aux.kappa[k, z], aux.zeta_hat[k, z], "upper")
                    B = sproc_matrix(inst, z, tot - Vk[k], aux.upsilon[k, z], 1.0 - aux.chi[k, z], "lower")
                    t1[k, z] = -_min_eig(A)
                    t2[k, z] = -_min_eig(B)
            put("T1", t1, np.maximum(aux.zeta_hat, 1.0))
            put("T2", t2, np.maximum(aux.chi, 1.0))
            mu, zeta, gam, inter = aux.mu_hat, aux.zeta_hat, aux.gamma_hat, aux.chi
        else:
            put("psi5", q.Se - aux.gamma - aux.zeta, q.Se)
            mu, zeta, gam, inter = aux.mu, aux.zeta, aux.gamma, q.Ie
        mn = anchors.mu_n
        put("psi_mu", zeta - 2 * mn * mu + mn ** 2, np.maximum(np.abs(zeta), mn ** 2))
        put("psi6", [-_min_eig([[gam[k, z], mu[k, z]], [mu[k, z], inter[k, z]]]) for k in range(K) for z in range(Z)],
            np.maximum(gam, inter).ravel())
        put("psi_gbar", (gam - aux.gbar[:, None]).ravel(), np.maximum(gam, 1.0).ravel())
    put("Omega", [-_min_eig(V0)] + [-_min_eig(V) for V in Vk], [np.abs(V0).max()] + [np.abs(V).max() for V in Vk])
    put("Omega_L", -_min_eig(Lam), np.abs(Lam).max())
    return out


def max_violation(residuals: dict, relative: bool = True) -> float:
    worst = 0.0
    for g, scale in residuals.values():
        v = g / (1.0 + scale) if relative else g
        if v.size:
            worst = max(worst, float(v.max()))
    return worst


def surrogate_value(aux: AuxState, anchors: Anchors | None, n_eves: int) -> float:
    """Convexified objective in bit/s/Hz; with ``anchors=None`` the DC objective itself."""
    val = np.log1p(aux.beta).sum()
    if n_eves:
        if anchors is None:
            val -= np.log1p(aux.gbar).sum()
        else:
            gn = anchors.gbar_n
            val -= np.sum(np.log1p(gn) + (aux.gbar - gn) / (1 + gn))
    return float(val / LN2)
