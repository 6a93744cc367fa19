"""CCCP loop over the convexified subproblem."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .. import conic
from ..analogbf import AnalogBeamformer
from ..model import ChannelSet, SystemConfig
from ..rates import BFSolution, secrecy_rates
from .build import Subproblem, build_subproblem
from .evaluate import constraint_residuals, max_violation, surrogate_value
from .instance import PowerConstraintSpec, ScaledInstance, prepare_instance
from .state import Anchors, AuxState, evaluate_aux, init_aux, polish_feasibility

log = logging.getLogger(__name__)

DEFAULT_T_MAX = 30
DEFAULT_TOL_REL = 1e-4


@dataclass
class SolveTrace:
    surrogate: list = field(default_factory=list)      # bit/s/Hz
    true_secrecy: list = field(default_factory=list)   # bit/s/Hz, [.]^+ summed over users
    max_violation: list = field(default_factory=list)
    seed_value: float = float("nan")
    iterations: int = 0
    reason: str = ""
    statuses: list = field(default_factory=list)
    solve_seconds: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.reason == "converged"

    def is_monotone(self, slack: float = 1e-6) -> bool:
        s = np.asarray(self.surrogate)
        return bool(np.all(np.diff(s) >= -slack)) if s.size > 1 else True

    def rows(self):
        for n, (s, t, v) in enumerate(zip(self.surrogate, self.true_secrecy, self.max_violation), 1):
            yield {"iteration": n, "surrogate": s, "true_secrecy": t, "max_violation": v}


@dataclass
class SRMResult:
    variant: str
    solution: BFSolution        # physical units, relaxed matrices
    aux: AuxState
    duals: conic.DualInfo | None
    trace: SolveTrace
    inst: ScaledInstance
    point: tuple                # normalized (V0, Vk, Lambda)
    anchors: Anchors            # anchors of the last solved subproblem
    polish_scale: float = 1.0   # access-power scale applied to clear solver-tolerance violations

    def __iter__(self):
        return iter((self.solution, self.aux, self.duals, self.trace))


ROBUST_EVE_FIELDS = ("gamma_hat", "zeta_hat", "mu_hat", "chi", "kappa", "upsilon", "gbar")


def retightened(inst: ScaledInstance, point, aux: AuxState) -> AuxState:
    """Tight auxiliary values at ``point``.

    For the robust variant the certified Eve quantities are kept from ``aux``:
    re-certifying would add the small safety inflation and could nudge the
    surrogate down by about that much.
    """
    tight = evaluate_aux(inst, *point, certify=False)
    if inst.robust and inst.Z:
        for name in ROBUST_EVE_FIELDS:
            setattr(tight, name, np.array(getattr(aux, name), dtype=float))
    return tight


def run_cccp(sub: Subproblem, point, aux: AuxState, T_max: int = DEFAULT_T_MAX,
             tol_rel: float = DEFAULT_TOL_REL, true_rate=None, tol: float = conic.DEFAULT_TOL,
             retighten: bool = True):
    """Iterate solve -> anchor update on a built subproblem.

    With ``retighten`` the next anchors are the tight auxiliary values at the
    optimal matrices instead of the (possibly slack) auxiliary part of the
    optimum.  Both choices keep the previous optimum feasible; the tight one
    has a DC objective at least as large, so progress per iteration is larger.

    Returns (point, aux, duals, anchors_used, trace).
    """
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    inst = sub.inst
    trace = SolveTrace()
    anchors = Anchors.from_aux(aux, inst.robust)
    s_prev = surrogate_value(aux, None, inst.Z)
    trace.seed_value = s_prev
    duals = None
    used = anchors
    for n in range(1, T_max + 1):
        sub.set_anchors(anchors)
        t0 = time.perf_counter()
        res = conic.solve(sub.problem, tol=tol)
        trace.solve_seconds.append(time.perf_counter() - t0)
        trace.statuses.append(res.status)
        if not res.ok:
            if n == 1:
                raise RuntimeError(f"first subproblem not solved: {res.status}")
            log.warning("subproblem %d failed with status %s; keeping iterate %d", n, res.status, n - 1)
            trace.reason = f"solver_failure:{res.status}"
            break
        new_point = sub.matrices()
        new_aux = sub.extract_aux()
        s = surrogate_value(new_aux, anchors, inst.Z)
        trace.surrogate.append(s)
        trace.max_violation.append(max_violation(constraint_residuals(inst, new_point, new_aux, anchors)))
        trace.true_secrecy.append(true_rate(new_point) if true_rate else float("nan"))
        trace.iterations = n
        point, aux, duals, used = new_point, new_aux, res.duals, anchors
        if abs(s - s_prev) <= tol_rel * max(abs(s_prev), 1.0):
            trace.reason = "converged"
            break
        s_prev = s
        if retighten:
            aux = retightened(inst, point, aux)
        anchors = Anchors.from_aux(aux, inst.robust)
    else:
        trace.reason = "max_iterations"
    return point, aux, duals, used, trace


def solve_srm(variant: str, channels: ChannelSet, bf: AnalogBeamformer, cfg: SystemConfig,
              T_max: int = DEFAULT_T_MAX, tol_rel: float = DEFAULT_TOL_REL,
              power: PowerConstraintSpec | None = None, seed=None) -> SRMResult:
    """Run the CCCP secrecy-rate maximization for one variant ('total', 'perbs' or 'robust').

    ``seed`` optionally replaces the default starting matrices with a normalized
    (V0, Vk, Lambda) triple; it is scaled onto the power budgets and under the
    fronthaul cap before use.
    """
    inst = prepare_instance(variant, channels, bf, cfg, power)
    if seed is None:
        point, aux = init_aux(inst)
    else:
        point, _ = polish_feasibility(inst, *(np.array(x, dtype=complex) for x in seed))
        aux = evaluate_aux(inst, *point)
    sub = build_subproblem(inst)

    def true_rate(pt):
        sol = inst.to_physical(*pt)
        return secrecy_rates(sol, channels, bf, cfg).sum_secrecy / cfg.bw_mmwave

    point, aux, duals, used, trace = run_cccp(sub, point, aux, T_max, tol_rel, true_rate)
    point, scale = polish_feasibility(inst, *point)
    sol = inst.to_physical(*point)
    return SRMResult(variant, sol, aux, duals, trace, inst, point, used, scale)


def final_secrecy(result: SRMResult, channels: ChannelSet, bf: AnalogBeamformer, cfg: SystemConfig) -> float:
    """True sum secrecy rate (bit/s/Hz) of the returned relaxed solution."""
    return secrecy_rates(result.solution, channels, bf, cfg).sum_secrecy / cfg.bw_mmwave


def solve_best_of(variant: str, channels: ChannelSet, bf: AnalogBeamformer, cfg: SystemConfig,
                  seeds=(None,), **kwargs):
    """Run ``solve_srm`` from several starting points and keep the best true secrecy rate.

    ``seeds`` holds normalized (V0, Vk, Lambda) triples, with None for the default
    seed.  Returns (best result, list of per-start rates).
    """
    if not seeds:
        raise ValueError("need at least one starting point")
    best, rates = None, []
    for seed in seeds:
        res = solve_srm(variant, channels, bf, cfg, seed=seed, **kwargs)
        rates.append(final_secrecy(res, channels, bf, cfg))
        if best is None or rates[-1] > rates[best[1]]:
            best = (res, len(rates) - 1)
    return best[0], rates
