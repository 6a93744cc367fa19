"""Rank-one beamformer recovery from SDP-relaxed solutions.

All routines work on normalized matrices of a :class:`ScaledInstance`
(V0 in CP-power units, V_k and Lambda in BS-power units, unit noise).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .analogbf import AnalogBeamformer
from .conic import DualInfo, numerical_rank
from .model import ChannelSet, SystemConfig
from .rates import secrecy_rates
from .srm.build import build_subproblem
from .srm.certificates import compute_Y
from .srm.evaluate import constraint_residuals
from .srm.solve import SRMResult, run_cccp
from .srm.state import evaluate_aux, fit_fronthaul, link_quantities
from .srm.instance import PowerMode, ScaledInstance

log = logging.getLogger(__name__)

ACTIVE_TOL = 1e-6
FACTOR_CUTOFF = 1e-14
NULL_TOL = 1e-6
DEFAULT_CANDIDATES = 50

__all__ = [
    "RankReport", "active_fronthaul_set", "exact_factor", "numerical_rank", "randomize_v0",
    "gaussian_candidates", "recover_rank_one", "reconstruct_vk", "reduce_rank_v0",
]


def exact_factor(X, cutoff: float = FACTOR_CUTOFF) -> np.ndarray:
    """X = F F^H keeping every eigenvalue above ``cutoff`` times the largest (columns by decreasing eigenvalue)."""
    X = np.asarray(X)
    w, U = np.linalg.eigh((X + X.conj().T) / 2)
    top = w.max(initial=0.0)
    keep = w > cutoff * top if top > 0 else np.zeros_like(w, dtype=bool)
    order = np.argsort(-w[keep])
    return (U[:, keep] * np.sqrt(w[keep]))[:, order]


def principal_vector(X) -> np.ndarray:
    w, U = np.linalg.eigh((np.asarray(X) + np.asarray(X).conj().T) / 2)
    return U[:, -1] * np.sqrt(max(w[-1], 0.0))


# -- multicast matrix: rank reduction ------------------------------------------

def active_fronthaul_set(G, V0, omega: float, eta: float, tol: float = ACTIVE_TOL) -> list[int]:
    """Fronthaul links whose constraint omega/eta <= ln(1 + Tr(G_l V0)) holds with equality.

    The test is on Tr(G_l V0) against e^(omega/eta) - 1, relative ``tol``.
    Falls back to the weakest link when nothing is within tolerance.
    """
    snr = np.array([float(np.real(np.sum(Gl * np.asarray(V0).T))) for Gl in G])
    need = np.expm1(omega / eta)
    active = [l for l in range(len(G)) if abs(snr[l] - need) <= tol * max(need, 1e-12)]
    return active or [int(np.argmin(snr))]


def _hermitian_basis(r: int):
    """Real basis of r x r Hermitian matrices (r^2 elements) in a fixed order."""
    basis = []
    for i in range(r):
        E = np.zeros((r, r), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(r):
        for j in range(i + 1, r):
            E = np.zeros((r, r), dtype=complex)
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
            E = np.zeros((r, r), dtype=complex)
            E[i, j], E[j, i] = 1j, -1j
            basis.append(E)
    return basis


def reduce_rank_v0(V0, G, active_set, max_passes: int | None = None):
    """Shrink rank(V0) while keeping Tr(G_l V0), l in ``active_set``, fixed.

    Each pass factors V0 = X X^H, picks a nonzero Hermitian Gamma with
    Tr(X^H G_l X Gamma) = 0 on the active set, orients it so that
    Tr(X^H X Gamma) >= 0, and replaces V0 by X (I - Gamma / rho) X^H with rho
    the largest eigenvalue of Gamma.  That keeps the active traces, does not
    increase the trace and zeroes at least one direction.  Stops once
    rank^2 <= |active_set|.

    Returns (V0_new, passes) where passes lists the rank after each pass.
    """
    active = list(active_set)
    if not active:
        raise ValueError("active_set must not be empty")
    X = exact_factor(V0)
    passes = []
    limit = max_passes if max_passes is not None else X.shape[1]
    while X.shape[1] ** 2 > len(active) and len(passes) < limit:
        r = X.shape[1]
        basis = _hermitian_basis(r)
        A = np.array([[float(np.real(np.trace(X.conj().T @ G[l] @ X @ B))) for B in basis] for l in active])
        null = scipy.linalg.null_space(A)
        if null.shape[1] == 0:
            raise RuntimeError(f"no nonzero Gamma for rank {r} with {len(active)} active constraints")
        Gam = sum(c * B for c, B in zip(null[:, 0], basis))
        Gam = (Gam + Gam.conj().T) / 2
        if np.real(np.trace(X.conj().T @ X @ Gam)) < 0:
            Gam = -Gam
        w, U = np.linalg.eigh(Gam)
        rho = w[-1]
        if rho <= 0:
            raise RuntimeError("Gamma has no positive eigenvalue")
        scale = np.clip(1.0 - w / rho, 0.0, None)
        keep = scale > 1e-12
        keep[-1] = False
        X = (X @ U[:, keep]) * np.sqrt(scale[keep])
        passes.append(X.shape[1])
    return X @ X.conj().T, passes


# -- user matrices: reconstruction ---------------------------------------------

def _null_basis(Y, tol: float = NULL_TOL) -> np.ndarray:
    w, U = np.linalg.eigh((Y + Y.conj().T) / 2)
    scale = max(np.abs(w).max(initial=0.0), 1e-300)
    return U[:, np.abs(w) <= tol * scale]


def reconstruct_vk(inst: ScaledInstance, point, duals: DualInfo | None = None, aux=None, anchors=None,
                   null_tol: float = NULL_TOL, channel_tol: float = 1e-4, check_tol: float = 1e-6):
    """Make every V_k rank one by moving the part invisible to user k into the AN covariance.

    V_k is split as V_k h^H h V_k / (h V_k h^H) plus a PSD remainder W with
    h W = 0; W is added to Lambda.  Signal, interference at every user and
    every power constraint are unchanged; the user's own leakage to each Eve
    can only shrink and the Eve interference can only grow.

    With ``duals`` the null space of Y_k is formed and h_k Upsilon_k = 0 is
    checked (raises ValueError when violated; ``channel_tol=None`` only
    records the measured leak, since it reflects dual accuracy rather than
    anything the construction relies on).  With ``aux`` and ``anchors``
    the subproblem constraint residuals are compared before and after
    (raises RuntimeError if any gets worse by more than ``check_tol``).

    Returns (new_point, info).
    """
    V0, Vk, Lam = (np.array(x, dtype=complex) for x in point)
    info = {"changed": [], "null_dims": {}, "channel_in_null": {}}
    for k in range(inst.K):
        h = inst.hbar[k]
        if duals is not None:
            Ups = _null_basis(compute_Y(duals, inst, k), null_tol)
            info["null_dims"][k] = Ups.shape[1]
            if Ups.shape[1]:
                leak = float(np.linalg.norm(h @ Ups) / max(np.linalg.norm(h), 1e-300))
                info["channel_in_null"][k] = leak
                if channel_tol is not None and leak > channel_tol:
                    raise ValueError(f"user {k + 1}: channel not orthogonal to the null space of Y (|hU|/|h| = {leak:.2e})")
        if numerical_rank(Vk[k]) <= 1:
            continue
        Vh = Vk[k] @ h.conj()
        S = float(np.real(h @ Vh))
        if S <= 0:
            raise ValueError(f"user {k + 1} receives no signal power; nothing to reconstruct")
        Vnew = np.outer(Vh, Vh.conj()) / S
        rest = Vk[k] - Vnew
        Lam = Lam + (rest + rest.conj().T) / 2
        Vk[k] = Vnew
        info["changed"].append(k)
    new = (V0, Vk, Lam)
    if aux is not None and anchors is not None and info["changed"]:
        before = constraint_residuals(inst, point, aux, anchors)
        after = constraint_residuals(inst, new, aux, anchors)
        worse, largest = {}, 0.0
        for tag, (g1, s1) in after.items():
            g0, s0 = before[tag]
            d = np.maximum(g1, 0) / (1 + s1) - np.maximum(g0, 0) / (1 + s0)
            if d.size:
                largest = max(largest, float(d.max()))
                if d.max() > check_tol:
                    worse[tag] = float(d.max())
        info["worsened"] = worse
        info["max_worsening"] = largest
        if worse:
            raise RuntimeError(f"reconstruction worsened constraints: {worse}")
    return new, info


# -- multicast matrix: randomization -------------------------------------------

def _dc_value(inst: ScaledInstance, point) -> float:
    """Sum over users of ln(1+SINR) - ln(1+max Eve SINR), nats, at the nominal channels of ``inst``."""
    q = link_quantities(inst, *point)
    val = np.log1p(q.S / (q.I + 1))
    if inst.Z:
        val = val - np.log1p((q.Se / (q.Ie + 1)).max(axis=1))
    return float(val.sum())


def gaussian_candidates(V0, n: int, rng) -> np.ndarray:
    """n rows distributed as CN(0, V0): X D^(1/2) s with V0 = X D X^H and s standard complex Gaussian."""
    w, U = np.linalg.eigh((V0 + V0.conj().T) / 2)
    root = U * np.sqrt(np.clip(w, 0.0, None))
    m = V0.shape[0]
    # drawn row by row, so the first n candidates do not depend on how many are requested
    z = rng.standard_normal((n, m, 2))
    return ((z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)) @ root.T


def randomize_v0(inst: ScaledInstance, point, n_candidates: int = DEFAULT_CANDIDATES, rng=None,
                 score=None, T_max: int = 30, tol_rel: float = 1e-4):
    """Gaussian randomization for V0 followed by power re-optimization along fixed directions.

    ``point`` is a normalized (V0, Vk, Lambda) with rank-one V_k.  Candidates
    are X D^(1/2) s with V0 = X D X^H and s standard complex Gaussian.  For each
    candidate, the scalar powers of the multicast and user beams and the AN
    covariance are re-optimized with the CCCP loop on the restricted
    subproblem.  ``score(point) -> float`` ranks candidates (default: the DC
    objective at the nominal channels); the best one is returned.

    Returns (v0, point, info) with v0 the chosen unit-norm multicast direction.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    rng = np.random.default_rng(rng)
    score = score or (lambda pt: _dc_value(inst, pt))
    V0, Vk, Lam = point
    user_dirs = []
    for k in range(inst.K):
        v = principal_vector(Vk[k])
        user_dirs.append(np.outer(v, v.conj()) / max(np.real(np.vdot(v, v)), 1e-300))
    user_pow = np.real(np.trace(Vk, axis1=1, axis2=2))
    sub = build_subproblem(inst, directions=np.array(user_dirs))
    best, scores, failures = None, [], 0
    cands = gaussian_candidates(V0, n_candidates, rng)
    for i in range(n_candidates):
        v = cands[i]
        nv = np.linalg.norm(v)
        if nv == 0:
            failures += 1
            scores.append(-np.inf)
            continue
        v = v / nv
        D0 = np.outer(v, v.conj())
        sub.V0.set_direction(D0, inst.G)
        start_vk = np.array([p * d for p, d in zip(user_pow, user_dirs)])
        s = fit_fronthaul(inst, D0, start_vk, Lam)
        start = (D0, s * start_vk, s * Lam)
        try:
            aux = evaluate_aux(inst, *start)
            pt, _, _, _, trace = run_cccp(sub, start, aux, T_max, tol_rel, retighten=True)
        except RuntimeError as exc:
            log.info("candidate %d failed: %s", i, exc)
            failures += 1
            scores.append(-np.inf)
            continue
        val = score(pt)
        scores.append(val)
        if best is None or val > best[0]:
            best = (val, v, pt, trace.iterations)
    if best is None:
        raise RuntimeError("all randomization candidates failed")
    return best[1], best[2], {"scores": scores, "failures": failures, "best_index": int(np.argmax(scores)),
                              "best_iterations": best[3]}


# -- full pipeline -------------------------------------------------------------

@dataclass
class RankReport:
    ranks_before: dict
    ranks_after: dict
    paths: dict                    # matrix name -> recovery path
    objective_before: float        # true secrecy rate of the relaxed solution, bit/s/Hz
    objective_after: float         # same for the recovered vectors
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def row(self) -> dict:
        out = {f"rank_before_{k}": v for k, v in self.ranks_before.items()}
        out.update({f"rank_after_{k}": v for k, v in self.ranks_after.items()})
        out.update({f"path_{k}": v for k, v in self.paths.items()})
        out.update(objective_before=self.objective_before, objective_after=self.objective_after,
                   max_residual=self.max_residual)
        return out


def _ranks(V0, Vk) -> dict:
    out = {"V0": numerical_rank(V0)}
    out.update({f"V{k + 1}": numerical_rank(V) for k, V in enumerate(Vk)})
    return out


def feasibility_residuals(inst: ScaledInstance, point, cfg: SystemConfig, channels, bf) -> dict:
    """Relative power violations and the fronthaul-cap violation (in units of W_mm) of a normalized point."""
    V0, Vk, Lam = point
    res = {}
    if inst.power.mode == PowerMode.TOTAL:
        tr = float(np.real(np.trace(Vk, axis1=1, axis2=2).sum() + np.trace(Lam)))
        res["power"] = max(tr - inst.budgets[0], 0.0) / inst.budgets[0]
    else:
        per = np.real(np.diagonal(Vk, axis1=1, axis2=2).sum(0) + np.diag(Lam))
        res["power"] = float(np.max(np.maximum(per - inst.budgets, 0.0) / inst.budgets))
    res["cp_power"] = max(float(np.real(np.trace(V0))) - 1.0, 0.0)
    rep = secrecy_rates(inst.to_physical(*point), channels, bf, cfg)
    res["fronthaul_cap"] = max(rep.sum_access - rep.fronthaul_min, 0.0) / cfg.bw_mmwave
    res["psd"] = max(0.0, -min(np.linalg.eigvalsh(Lam).min() / max(1.0, np.abs(Lam).max()), 0.0))
    return res


def recover_rank_one(result: SRMResult, channels: ChannelSet, bf: AnalogBeamformer, cfg: SystemConfig,
                     n_candidates: int = DEFAULT_CANDIDATES, rng=None, use_randomization: bool | None = None):
    """Turn a relaxed SRM solution into beamforming vectors.

    Steps: reconstruct rank-one V_k; reduce V0 over the active fronthaul set
    (re-running with every link if an inactive one would be violated);
    randomize when V0 is still not rank one or when ``use_randomization`` is
    True; scale v0 to full CP power; if the fronthaul cap is exceeded after
    rounding, scale the access powers down.

    Returns (BFSolution with vectors, RankReport).
    """
    inst = result.inst
    V0, Vk, Lam = result.point
    ranks_before = _ranks(V0, Vk)
    paths, details = {}, {}
    rate = lambda sol: secrecy_rates(sol, channels, bf, cfg).sum_secrecy / cfg.bw_mmwave  # noqa: E731
    before = rate(inst.to_physical(V0, Vk, Lam))

    (V0, Vk, Lam), rinfo = reconstruct_vk(inst, (V0, Vk, Lam), result.duals, result.aux, result.anchors,
                                  channel_tol=None)
    details["reconstruct"] = rinfo
    for k in range(inst.K):
        paths[f"V{k + 1}"] = "reconstructed" if k in rinfo["changed"] else "already_rank_one"

    q = link_quantities(inst, V0, Vk, Lam)
    omega = inst.eta * float(np.log1p(q.fh.min()))
    if numerical_rank(V0) > 1 and not use_randomization:
        active = active_fronthaul_set(inst.G, V0, omega, inst.eta)
        V0r, passes = reduce_rank_v0(V0, inst.G, active)
        fh = np.array([float(np.real(np.sum(Gl * V0r.T))) for Gl in inst.G])
        if fh.min() < np.expm1(omega / inst.eta) * (1 - ACTIVE_TOL) and len(active) < inst.L:
            active = list(range(inst.L))
            V0r, passes = reduce_rank_v0(V0, inst.G, active)
        details["reduction"] = {"active_set": active, "passes": passes}
        V0 = V0r
        paths["V0"] = "reduced"
    else:
        paths["V0"] = "already_rank_one" if numerical_rank(V0) <= 1 else "randomized"

    vk = np.array([principal_vector(V) for V in Vk])
    Vk1 = np.einsum("ki,kj->kij", vk, vk.conj())
    if numerical_rank(V0) > 1 or use_randomization:
        def score(pt):
            return rate(inst.to_physical(*pt))
        v0, (V0p, Vkp, Lamp), rinfo2 = randomize_v0(inst, (V0, Vk1, Lam), n_candidates, rng, score=score)
        details["randomization"] = rinfo2
        paths["V0"] = "randomized"
        a0 = float(np.real(np.trace(V0p)))
        v0 = v0 * np.sqrt(a0)
        vk = np.array([principal_vector(V) for V in Vkp])
        Lam = Lamp
    else:
        v0 = principal_vector(V0)
    # full CP power only raises fronthaul rates
    v0 = v0 / np.linalg.norm(v0)
    Vk1 = np.einsum("ki,kj->kij", vk, vk.conj())
    V0 = np.outer(v0, v0.conj())
    s = fit_fronthaul(inst, V0, Vk1, Lam, fill=1.0 - 1e-9)
    if s < 1.0:
        vk, Lam = vk * np.sqrt(s), Lam * s
        details["access_scale"] = s
    Vk1 = np.einsum("ki,kj->kij", vk, vk.conj())
    point = (V0, Vk1, (Lam + Lam.conj().T) / 2)
    sol = inst.to_physical(*point, v0n=v0, vkn=vk)
    report = RankReport(ranks_before, _ranks(V0, Vk1), paths, before, rate(sol),
                        feasibility_residuals(inst, point, cfg, channels, bf), details)
    return sol, report
