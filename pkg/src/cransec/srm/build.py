"""Assembly of the convexified subproblem solved at each CCCP iteration.

The problem is built once per instance with the linearization anchors as
cvxpy parameters; each iteration only updates the parameter values and
re-solves.  Multipliers are registered under these tags:

  psi1 / psi_bs[l]   BS power (total / per BS)
  psi2               CP power
  psi3[k]            eps_k >= interference + noise
  psi4[k]            AM-GM upper bound on beta_k * eps_k
  psi5[k,z]          Eve signal split
  psi_mu[k,z]        tangent bound on mu^2 (or mu_hat^2)
  psi6[k,z]          2x2 LMI [[gamma, mu], [mu, Eve interference]]
  psi_gbar[k,z]      gamma_kz <= gbar_k (worst-Eve epigraph)
  psi7[k]            user SINR upper split
  psi_lambda[k]      tangent bound on lambda^2
  psi8[k]            2x2 LMI [[tau, lambda], [lambda, interference]]
  psi9[l]            omega / eta <= ln(1 + fronthaul SNR_l)
  psi_fh             omega >= linearized sum_k ln(1 + tau_k)
  T1[k,z], T2[k,z]   robust S-procedure LMIs
  Omega[k], Omega_L  PSD constraints (k = 0 is the multicast matrix)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .. import conic
from .instance import PowerMode, ScaledInstance
from .state import Anchors, AuxState


class FixedDirection:
    """a * D with a >= 0 scalar variable and a fixed Hermitian PSD direction D."""

    def __init__(self, a: cp.Variable, D: np.ndarray):
        self.a = a
        self.D = np.asarray(D, dtype=complex)
        self.n = self.D.shape[0]
        self.E = a * conic.embed(self.D)

    def re_trace(self, H):
        return self.a * float(np.real(np.sum(np.asarray(H) * self.D.T)))

    def trace(self):
        return self.a * float(np.real(np.trace(self.D)))

    def diag(self, i):
        return self.a * float(np.real(self.D[i, i]))

    @property
    def value(self):
        return float(self.a.value) * self.D


class ParamDirection:
    """Multicast matrix a0 * D0 with the direction entering only through parameters.

    Lets one compiled problem serve every randomization candidate.
    """

    def __init__(self, problem: conic.ConicProblem, L: int):
        self.a = problem.scalar("a0", nonneg=True)
        self.coef = problem.parameter("d0_fh", (L,), nonneg=True)
        self.tr = problem.parameter("d0_tr", (), nonneg=True)
        self.D = None

    def set_direction(self, D0, G):
        self.D = np.asarray(D0, dtype=complex)
        self.coef.value = np.array([max(float(np.real(np.sum(Gl * self.D.T))), 0.0) for Gl in G])
        self.tr.value = float(np.real(np.trace(self.D)))

    def fh(self, l):
        return self.a * self.coef[l]

    def trace(self):
        return self.a * self.tr

    @property
    def value(self):
        return float(self.a.value) * self.D


@dataclass
class Subproblem:
    inst: ScaledInstance
    problem: conic.ConicProblem
    V0: object
    Vk: list
    Lam: conic.HermitianVar
    x: dict                 # auxiliary cvxpy variables
    p: dict                 # anchor parameters
    restricted: bool = False
    info: dict = field(default_factory=dict)

    def set_anchors(self, anchors: Anchors) -> None:
        inst, p = self.inst, self.p
        p["c1"].value = np.asarray(anchors.c1, dtype=float)
        p["c2"].value = np.asarray(anchors.c2, dtype=float)
        p["lam_n"].value = np.asarray(anchors.lam_n, dtype=float)
        p["lam_n_sq"].value = np.asarray(anchors.lam_n, dtype=float) ** 2
        tn = np.asarray(anchors.tau_n, dtype=float)
        p["tau_w"].value = 1.0 / (1.0 + tn)
        p["tau_c"].value = float(np.sum(np.log1p(tn) - tn / (1.0 + tn)))
        if inst.Z:
            mu = np.asarray(anchors.mu_n, dtype=float).reshape(inst.K, inst.Z)
            p["mu_n"].value = mu
            p["mu_n_sq"].value = mu ** 2
            gn = np.asarray(anchors.gbar_n, dtype=float)
            p["gbar_w"].value = 1.0 / (1.0 + gn)
            p["obj_c"].value = float(np.sum(-np.log1p(gn) + gn / (1.0 + gn)))

    def fh_expr(self, l):
        if isinstance(self.V0, ParamDirection):
            return self.V0.fh(l)
        return self.V0.re_trace(self.inst.G[l])

    def matrices(self):
        V0 = self.V0.value
        Vk = np.array([v.value for v in self.Vk])
        Lam = self.Lam.value
        return V0, Vk, Lam

    def extract_aux(self) -> AuxState:
        x, K, Z = self.x, self.inst.K, self.inst.Z

        def val(name, shape):
            v = x.get(name)
            return np.zeros(shape) if v is None else np.array(v.value, dtype=float).reshape(shape)

        aux = AuxState(beta=val("beta", K), eps=val("eps", K), gamma=val("gamma", (K, Z)),
                       gbar=val("gbar", K), zeta=val("zeta", (K, Z)), mu=val("mu", (K, Z)),
                       tau=val("tau", K), theta=val("theta", K), lam=val("lam", K),
                       omega=float(x["omega"].value))
        if self.inst.robust and Z:
            aux.gamma_hat = val("gamma_hat", (K, Z))
            aux.zeta_hat = val("zeta_hat", (K, Z))
            aux.mu_hat = val("mu_hat", (K, Z))
            aux.chi = val("chi", (K, Z))
            aux.kappa = val("kappa", (K, Z))
            aux.upsilon = val("upsilon", (K, Z))
        return aux


def build_subproblem(inst: ScaledInstance, anchors: Anchors | None = None,
                     directions: np.ndarray | None = None) -> Subproblem:
    """Convexified subproblem for ``inst.variant``.

    With ``directions`` (K x L x L fixed user directions) the user matrices are
    restricted to nonnegative multiples of them and the multicast matrix to a
    multiple of a parameterized direction; this is the power re-optimization
    used after randomization.
    """
    K, Z, L, N = inst.K, inst.Z, inst.L, inst.N
    prob = conic.ConicProblem(f"srm-{inst.variant}")
    restricted = directions is not None

    # matrices
    if restricted:
        a = prob.scalar("a", (K,), nonneg=True)
        Vk = [FixedDirection(a[k], directions[k]) for k in range(K)]
        V0 = ParamDirection(prob, L)
    else:
        Vk = [prob.hermitian(L, f"V{k + 1}") for k in range(K)]
        V0 = prob.hermitian(N, "V0")
    Lam = prob.hermitian(L, "Lambda")

    x = {
        "beta": prob.scalar("beta", (K,), nonneg=True),
        "eps": prob.scalar("eps", (K,)),
        "tau": prob.scalar("tau", (K,), nonneg=True),
        "theta": prob.scalar("theta", (K,)),
        "lam": prob.scalar("lam", (K,)),
        "omega": prob.scalar("omega"),
    }
    p = {
        "c1": prob.parameter("c1", (K,), nonneg=True),
        "c2": prob.parameter("c2", (K,), nonneg=True),
        "lam_n": prob.parameter("lam_n", (K,), nonneg=True),
        "lam_n_sq": prob.parameter("lam_n_sq", (K,), nonneg=True),
        "tau_w": prob.parameter("tau_w", (K,), nonneg=True),
        "tau_c": prob.parameter("tau_c", ()),
    }
    sub = Subproblem(inst, prob, V0, Vk, Lam, x, p, restricted)

    # power
    pw_terms = [v.trace() for v in Vk] + [Lam.trace()]
    if inst.power.mode == PowerMode.TOTAL:
        prob.add("psi1", None, cp.sum(cp.hstack(pw_terms)) <= inst.budgets[0])
    else:
        for l in range(L):
            prob.add("psi_bs", l, cp.sum(cp.hstack([v.diag(l) for v in Vk] + [Lam.diag(l)])) <= inst.budgets[l])
    prob.add("psi2", None, V0.trace() <= 1.0)

    # user-side quantities
    def interference(Hm, k):
        terms = [Vk[i].re_trace(Hm) for i in range(K) if i != k] + [Lam.re_trace(Hm)]
        return cp.sum(cp.hstack(terms))

    beta, eps, tau, theta, lam, omega = (x[n] for n in ("beta", "eps", "tau", "theta", "lam", "omega"))
    for k in range(K):
        Ik = interference(inst.H[k], k)
        Sk = Vk[k].re_trace(inst.H[k])
        prob.add("psi3", k, eps[k] >= Ik + 1.0)
        prob.add("psi4", k, p["c1"][k] * cp.square(eps[k]) + p["c2"][k] * cp.square(beta[k]) <= Sk)
        prob.add("psi7", k, Sk - tau[k] <= theta[k])
        prob.add("psi_lambda", k, theta[k] <= 2 * cp.multiply(p["lam_n"][k], lam[k]) - p["lam_n_sq"][k])
        conic.lmi_2x2(prob, "psi8", k, tau[k], lam[k], Ik)

    # fronthaul
    for l in range(L):
        prob.add("psi9", l, omega / inst.eta <= cp.log(1.0 + sub.fh_expr(l)))
    prob.add("psi_fh", None, omega >= p["tau_c"] + p["tau_w"] @ tau)

    # eavesdroppers
    objective = cp.sum(cp.log(1.0 + beta))
    if Z:
        x["gbar"] = prob.scalar("gbar", (K,), nonneg=True)
        p["mu_n"] = prob.parameter("mu_n", (K, Z), nonneg=True)
        p["mu_n_sq"] = prob.parameter("mu_n_sq", (K, Z), nonneg=True)
        p["gbar_w"] = prob.parameter("gbar_w", (K,), nonneg=True)
        p["obj_c"] = prob.parameter("obj_c", ())
        gbar = x["gbar"]
        if inst.robust:
            _add_robust_eve(sub)
        else:
            _add_perfect_eve(sub, interference)
        objective = objective - p["gbar_w"] @ gbar + p["obj_c"]

    # cones
    if not restricted:
        prob.psd("Omega", 0, V0.E)
        for k in range(K):
            prob.psd("Omega", k + 1, Vk[k].E)
    prob.psd("Omega_L", None, Lam.E)
    prob.maximize(objective)
    if anchors is not None:
        sub.set_anchors(anchors)
    return sub


def _add_perfect_eve(sub: Subproblem, interference):
    inst, prob, x, p = sub.inst, sub.problem, sub.x, sub.p
    K, Z = inst.K, inst.Z
    gamma = x["gamma"] = prob.scalar("gamma", (K, Z), nonneg=True)
    zeta = x["zeta"] = prob.scalar("zeta", (K, Z))
    mu = x["mu"] = prob.scalar("mu", (K, Z))
    for k in range(K):
        for z in range(Z):
            Se = sub.Vk[k].re_trace(inst.He[z])
            prob.add("psi5", (k, z), Se - gamma[k, z] <= zeta[k, z])
            prob.add("psi_mu", (k, z),
                     zeta[k, z] <= 2 * cp.multiply(p["mu_n"][k, z], mu[k, z]) - p["mu_n_sq"][k, z])
            conic.lmi_2x2(prob, "psi6", (k, z), gamma[k, z], mu[k, z], interference(inst.He[z], k))
            prob.add("psi_gbar", (k, z), gamma[k, z] <= x["gbar"][k])


def _add_robust_eve(sub: Subproblem):
    inst, prob, x, p = sub.inst, sub.problem, sub.x, sub.p
    K, Z = inst.K, inst.Z
    gh = x["gamma_hat"] = prob.scalar("gamma_hat", (K, Z), nonneg=True)
    zh = x["zeta_hat"] = prob.scalar("zeta_hat", (K, Z))
    mh = x["mu_hat"] = prob.scalar("mu_hat", (K, Z))
    chi = x["chi"] = prob.scalar("chi", (K, Z))
    kappa = x["kappa"] = prob.scalar("kappa", (K, Z), nonneg=True)
    ups = x["upsilon"] = prob.scalar("upsilon", (K, Z), nonneg=True)
    for k in range(K):
        others = sum(sub.Vk[i].E for i in range(K) if i != k) + sub.Lam.E
        for z in range(Z):
            conic.sproc_lmi(prob, "T1", (k, z), kappa[k, z], sub.Vk[k].E, inst.F, inst.he_hat[z],
                            zh[k, z], inst.sigma[z], "upper")
            conic.sproc_lmi(prob, "T2", (k, z), ups[k, z], others, inst.F, inst.he_hat[z],
                            1.0 - chi[k, z], inst.sigma[z], "lower")
            prob.add("psi_mu", (k, z),
                     zh[k, z] <= 2 * cp.multiply(p["mu_n"][k, z], mh[k, z]) - p["mu_n_sq"][k, z])
            conic.lmi_2x2(prob, "psi6", (k, z), gh[k, z], mh[k, z], chi[k, z])
            prob.add("psi_gbar", (k, z), gh[k, z] <= x["gbar"][k])
