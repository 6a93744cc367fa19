"""Auxiliary CCCP state, linearization anchors and the feasible seed."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .. import conic
from .instance import PowerMode, ScaledInstance

# Lower clamp on the beta anchor; beta -> 0 would make the AM-GM weights blow up.
BETA_FLOOR = 1e-9
# Relative inflation of the certified robust bounds so the seed is strictly inside the LMIs.
CERT_INFLATE = 1e-6
# Target fill of the fronthaul cap when the seed has to be scaled down.
SEED_FH_FILL = 0.999


@dataclass
class AuxState:
    beta: np.ndarray
    eps: np.ndarray
    gamma: np.ndarray        # (K, Z)
    gbar: np.ndarray         # (K,) worst-Eve epigraph
    zeta: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    omega: float
    gamma_hat: np.ndarray = None
    zeta_hat: np.ndarray = None
    mu_hat: np.ndarray = None
    chi: np.ndarray = None
    kappa: np.ndarray = None
    upsilon: np.ndarray = None

    def copy(self) -> "AuxState":
        return dataclasses.replace(self, **{f.name: (None if getattr(self, f.name) is None
                                                     else np.array(getattr(self, f.name), dtype=float))
                                            for f in dataclasses.fields(self)})

    def check(self) -> None:
        for name in ("beta", "gamma", "gbar", "tau", "omega"):
            if np.any(np.asarray(getattr(self, name)) < -1e-9):
                raise ValueError(f"{name} must be >= 0")
        if np.any(self.eps < 1 - 1e-9):
            raise ValueError("eps must be at least the noise power")


@dataclass
class Anchors:
    """Parameters of the convexified subproblem at the current iterate."""
    c1: np.ndarray           # beta^n / (2 eps^n)
    c2: np.ndarray           # eps^n / (2 beta^n)
    mu_n: np.ndarray         # (K, Z); mu or mu_hat
    lam_n: np.ndarray
    tau_n: np.ndarray
    gbar_n: np.ndarray

    @classmethod
    def from_aux(cls, aux: AuxState, robust: bool) -> "Anchors":
        beta = np.maximum(aux.beta, BETA_FLOOR)
        eps = np.maximum(aux.eps, 1.0)
        mu = aux.mu_hat if robust and aux.mu_hat is not None else aux.mu
        return cls(c1=beta / (2 * eps), c2=eps / (2 * beta), mu_n=np.maximum(np.asarray(mu), 0.0),
                   lam_n=np.maximum(aux.lam, 0.0), tau_n=np.maximum(aux.tau, 0.0),
                   gbar_n=np.maximum(aux.gbar, 0.0))


@dataclass
class LinkQuantities:
    S: np.ndarray      # (K,) desired power at each user
    I: np.ndarray      # (K,) interference + AN at each user (noise excluded)
    Se: np.ndarray     # (K, Z) user k's power at Eve z
    Ie: np.ndarray     # (K, Z) other users + AN at Eve z
    fh: np.ndarray     # (L,) fronthaul SNRs
    extra: dict = field(default_factory=dict)


def _re_tr(A, B) -> float:
    return float(np.real(np.sum(A * B.T)))


def link_quantities(inst: ScaledInstance, V0, Vk, Lam) -> LinkQuantities:
    K, Z = inst.K, inst.Z
    tot = Vk.sum(axis=0) + Lam
    S = np.array([_re_tr(inst.H[k], Vk[k]) for k in range(K)])
    I = np.array([_re_tr(inst.H[k], tot - Vk[k]) for k in range(K)])
    Se = np.array([[_re_tr(inst.He[z], Vk[k]) for z in range(Z)] for k in range(K)]).reshape(K, Z)
    Ie = np.array([[_re_tr(inst.He[z], tot - Vk[k]) for z in range(Z)] for k in range(K)]).reshape(K, Z)
    fh = np.array([_re_tr(inst.G[l], V0) for l in range(inst.L)])
    return LinkQuantities(S, I, Se, Ie, fh)


# -- certified robust bounds ---------------------------------------------------

def _psd_part(X):
    X = (X + X.conj().T) / 2
    w, U = np.linalg.eigh(X)
    return (U * np.maximum(w, 0)) @ U.conj().T


def certified_signal_bound(inst: ScaledInstance, z: int, Vk_single, tol=1e-9):
    """Smallest zeta with an S-procedure certificate of h V h^H <= zeta over Eve z's error ball.

    Returns (zeta, kappa).  Exact for a single ball constraint.
    """
    prob = conic.ConicProblem("sup_signal")
    zeta = prob.scalar("zeta")
    kappa = prob.scalar("kappa", nonneg=True)
    X = conic.embed_complex_psd(_psd_part(Vk_single))
    conic.sproc_lmi(prob, "T1", 0, kappa, X, inst.F, inst.he_hat[z], zeta, inst.sigma[z], "upper")
    prob.minimize(zeta)
    res = conic.solve(prob, tol=tol)
    if not res.ok:
        raise RuntimeError(f"certified signal bound failed: {res.status}")
    return float(res.primal["zeta"]), float(res.primal["kappa"])


def certified_interference_bound(inst: ScaledInstance, z: int, Q, tol=1e-9):
    """Largest chi with a certificate of h Q h^H + 1 >= chi over Eve z's error ball. Returns (chi, upsilon)."""
    # when the ball holds a channel with (h_hat + dh) F = 0 the bound is exactly 1, certified by upsilon = 0;
    # the SDP is degenerate there and tends to overshoot
    h = inst.he_hat[z]
    seen = np.linalg.norm(h @ np.linalg.qr(inst.F)[0]) ** 2
    if inst.sigma[z] * np.linalg.norm(h) ** 2 >= seen:
        return 1.0, 0.0
    prob = conic.ConicProblem("inf_interference")
    chi = prob.scalar("chi")
    ups = prob.scalar("upsilon", nonneg=True)
    X = conic.embed_complex_psd(_psd_part(Q))
    conic.sproc_lmi(prob, "T2", 0, ups, X, inst.F, inst.he_hat[z], 1.0 - chi, inst.sigma[z], "lower")
    prob.maximize(chi)
    res = conic.solve(prob, tol=tol)
    if not res.ok:
        raise RuntimeError(f"certified interference bound failed: {res.status}")
    return float(res.primal["chi"]), float(res.primal["upsilon"])


def robust_bounds(inst: ScaledInstance, Vk, Lam, inflate: float = CERT_INFLATE):
    """Certified (zeta_hat, kappa, chi, upsilon) arrays of shape (K, Z), slightly loosened."""
    K, Z = inst.K, inst.Z
    zh, ka, ch, up = (np.zeros((K, Z)) for _ in range(4))
    tot = Vk.sum(axis=0) + Lam
    for k in range(K):
        for z in range(Z):
            zeta, kappa = certified_signal_bound(inst, z, Vk[k])
            chi, ups = certified_interference_bound(inst, z, tot - Vk[k])
            zh[k, z] = max(zeta, 0.0) * (1 + inflate) + inflate
            ka[k, z] = kappa * (1 + inflate) + inflate
            ch[k, z] = chi * (1 - inflate)
            up[k, z] = ups
    return zh, ka, ch, up


# -- aux evaluation and seed ---------------------------------------------------

def evaluate_aux(inst: ScaledInstance, V0, Vk, Lam, certify: bool = True) -> AuxState:
    """Set every auxiliary variable to its tight value at the given matrices."""
    q = link_quantities(inst, V0, Vk, Lam)
    K, Z = inst.K, inst.Z
    beta = q.S / (q.I + 1)
    eps = q.I + 1
    gamma = q.Se / (q.Ie + 1)
    zeta = np.maximum(q.Se - gamma, 0.0)
    mu = np.sqrt(zeta)
    tau = beta.copy()
    theta = np.maximum(q.S - tau, 0.0)
    lam = np.sqrt(theta)
    omega = inst.eta * float(np.log1p(max(q.fh.min(), 0.0)))
    aux = AuxState(beta=beta, eps=eps, gamma=gamma, gbar=gamma.max(axis=1) if Z else np.zeros(K),
                   zeta=zeta, mu=mu, tau=tau, theta=theta, lam=lam, omega=omega)
    if inst.robust and Z and certify:
        zh, ka, ch, up = robust_bounds(inst, Vk, Lam)
        aux.zeta_hat, aux.kappa, aux.chi, aux.upsilon = zh, ka, ch, up
        aux.gamma_hat = zh / ch
        aux.mu_hat = np.sqrt(zh)
        aux.gbar = aux.gamma_hat.max(axis=1)
    return aux


def fronthaul_slack(inst: ScaledInstance, V0, Vk, Lam) -> float:
    """eta * min_l ln(1+fh_l) - sum_k ln(1+SINR_k), in nats per unit mmWave bandwidth."""
    q = link_quantities(inst, V0, Vk, Lam)
    return inst.eta * float(np.log1p(q.fh.min())) - float(np.log1p(q.S / (q.I + 1)).sum())


def fit_fronthaul(inst: ScaledInstance, V0, Vk, Lam, fill: float = SEED_FH_FILL, iters: int = 100):
    """Scale access powers (Vk and Lam together) so the sum rate fits under the fronthaul cap.

    Returns the scale factor in (0, 1]; 1 if no scaling was needed.
    """
    cap = inst.eta * float(np.log1p(link_quantities(inst, V0, Vk, Lam).fh.min()))

    def used(s):
        q = link_quantities(inst, V0, s * Vk, s * Lam)
        return float(np.log1p(q.S / (q.I + 1)).sum())

    if used(1.0) <= cap:
        return 1.0
    target = fill * cap
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if used(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def polish_feasibility(inst: ScaledInstance, V0, Vk, Lam):
    """Remove solver-tolerance violations by scaling.

    Every matrix is projected onto the PSD cone, then access powers (Vk and
    Lambda together) are scaled onto the BS budget and under the fronthaul
    cap, and V0 onto unit trace.  Returns the point and the access scale applied.
    """
    V0, Lam = _psd_part(V0), _psd_part(Lam)
    Vk = np.array([_psd_part(V) for V in Vk])
    tr0 = float(np.real(np.trace(V0)))
    if tr0 > 1.0:
        V0 = V0 / tr0
    if inst.power.mode == PowerMode.TOTAL:
        used = float(np.real(np.trace(Vk, axis1=1, axis2=2).sum() + np.trace(Lam)))
        ratio = used / inst.budgets[0]
    else:
        per = np.real(np.diagonal(Vk, axis1=1, axis2=2).sum(0) + np.diag(Lam))
        ratio = float(np.max(per / inst.budgets))
    scale = 1.0 / ratio if ratio > 1.0 else 1.0
    Vk, Lam = Vk * scale, Lam * scale
    s = fit_fronthaul(inst, V0, Vk, Lam, fill=1.0 - 1e-9)
    return (V0, Vk * s, Lam * s), scale * s


def seed_point(inst: ScaledInstance):
    """MRT beams at 90% of the budget, isotropic AN with the rest, isotropic multicast beam."""
    K, L, N = inst.K, inst.L, inst.N
    budget = inst.total_budget
    Vk = np.zeros((K, L, L), dtype=complex)
    for k in range(K):
        h = inst.hbar[k]
        nrm = np.linalg.norm(h)
        if nrm == 0:
            raise ValueError(f"user {k} has a zero effective channel; cannot build a feasible seed")
        d = h.conj() / nrm
        Vk[k] = 0.9 * budget / K * np.outer(d, d.conj())
    Lam = 0.1 * budget / L * np.eye(L, dtype=complex)
    if inst.power.mode == PowerMode.PER_BS:
        per = np.real(np.diagonal(Vk, axis1=1, axis2=2).sum(0) + np.diag(Lam))
        ratio = float(np.max(per / inst.budgets))
        if ratio > 1:
            Vk, Lam = Vk / ratio, Lam / ratio
    V0 = np.eye(N, dtype=complex) / N
    return V0, Vk, Lam


def init_aux(inst: ScaledInstance):
    """Feasible seed matrices and their tight auxiliary values (normalized units)."""
    if not np.any(inst.g):
        raise ValueError("all fronthaul channels are zero; cannot build a feasible seed")
    V0, Vk, Lam = seed_point(inst)
    s = fit_fronthaul(inst, V0, Vk, Lam)
    Vk, Lam = s * Vk, s * Lam
    return (V0, Vk, Lam), evaluate_aux(inst, V0, Vk, Lam)
