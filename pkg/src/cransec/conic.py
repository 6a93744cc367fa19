"""Conic problem container on top of cvxpy, with a complex-to-real SDP embedding.

Complex Hermitian matrices are represented by their real embedding

    E(H) = [[Re H, -Im H],
            [Im H,  Re H]]

so that H >= 0 iff E(H) >= 0, Tr E(H) = 2 Tr H, E(AB) = E(A) E(B) and
E(A^H) = E(A)^T.  Dual matrices of embedded PSD constraints are mapped back
to complex Hermitian multipliers T with Re Tr(T M) = Tr(Z E(M)) for every
Hermitian M.

Every constraint is registered under a (tag, key) pair so that multipliers
can be looked up by name after a solve.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import cvxpy as cp
import numpy as np

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
HERM_TOL = 1e-9


def embed_complex_psd(H: np.ndarray) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    if np.abs(H - H.conj().T).max() > HERM_TOL * max(1.0, np.abs(H).max()):
        raise ValueError("matrix is not Hermitian")
    return embed(H)


def embed(A: np.ndarray) -> np.ndarray:
    """Real embedding of any complex matrix (no Hermitian check)."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def deembed(X: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed` for a structured real matrix, averaging the redundant blocks."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0] // 2
    re = (X[:n, :n] + X[n:, n:]) / 2
    im = (X[n:, :n] - X[:n, n:]) / 2
    return re + 1j * im


def dual_to_complex(Z: np.ndarray) -> np.ndarray:
    """Complex multiplier T with Re Tr(T M) = Tr(Z E(M)); PSD whenever Z is."""
    Z = np.asarray(Z, dtype=float)
    Z = (Z + Z.T) / 2
    n = Z.shape[0] // 2
    return (Z[:n, :n] + Z[n:, n:]) + 1j * (Z[n:, :n] - Z[:n, n:])


class HermitianVar:
    """An n x n complex Hermitian decision matrix V = A + jB.

    ``A`` is a symmetric cvxpy variable and ``B`` a skew-symmetric one; the
    embedded form ``E`` is an affine cvxpy expression.
    """

    def __init__(self, n: int, name: str):
        self.n = n
        self.name = name
        self.A = cp.Variable((n, n), symmetric=True, name=f"{name}_re")
        if n > 1:
            self._Bfree = cp.Variable((n, n), name=f"{name}_im")
            self.B = (self._Bfree - self._Bfree.T) / 2
        else:
            self._Bfree = None
            self.B = cp.Constant(np.zeros((1, 1)))
        self.E = cp.bmat([[self.A, -self.B], [self.B, self.A]])

    def re_trace(self, H) -> cp.Expression:
        """Re Tr(H V) for a constant Hermitian H."""
        H = np.atleast_2d(np.asarray(H, dtype=complex))
        expr = cp.sum(cp.multiply(H.real, self.A))
        if self.n > 1 and np.any(H.imag):
            expr = expr + cp.sum(cp.multiply(H.imag, self.B))
        return expr

    def trace(self) -> cp.Expression:
        return cp.trace(self.A)

    def diag(self, i: int) -> cp.Expression:
        return self.A[i, i]

    @property
    def value(self) -> np.ndarray:
        A = self.A.value
        B = self.B.value if self.n > 1 else np.zeros((1, 1))
        V = A + 1j * B
        return (V + V.conj().T) / 2


@dataclass
class _Entry:
    constraint: Any
    kind: str   # "scalar" | "psd_embedded" | "psd_real" | "vector"
    info: dict = field(default_factory=dict)


class ConicProblem:
    """Variables, constraints and a tag registry; compiled lazily to a cvxpy Problem."""

    def __init__(self, name: str = ""):
        self.name = name
        self.constraints: list = []
        self.registry: dict[str, dict[Any, _Entry]] = {}
        self.params: dict[str, cp.Parameter] = {}
        self.vars: dict[str, Any] = {}
        self.objective: cp.Expression | None = None
        self.sense = "max"
        self._cvx: cp.Problem | None = None

    # construction -----------------------------------------------------
    def hermitian(self, n: int, name: str) -> HermitianVar:
        v = HermitianVar(n, name)
        self.vars[name] = v
        return v

    def scalar(self, name: str, shape=(), nonneg=False) -> cp.Variable:
        v = cp.Variable(shape, name=name, nonneg=nonneg)
        self.vars[name] = v
        return v

    def parameter(self, name: str, shape=(), value=None, nonneg=False) -> cp.Parameter:
        p = cp.Parameter(shape, name=name, nonneg=nonneg)
        if value is not None:
            p.value = value
        self.params[name] = p
        return p

    def add(self, tag: str, key, constraint, kind: str = "scalar", **info):
        if self._cvx is not None:
            raise RuntimeError("problem already compiled")
        self.registry.setdefault(tag, {})
        if key in self.registry[tag]:
            raise KeyError(f"duplicate constraint {tag}[{key}]")
        self.registry[tag][key] = _Entry(constraint, kind, info)
        self.constraints.append(constraint)
        return constraint

    def psd(self, tag: str, key, embedded_expr, **info):
        """Register ``embedded_expr >= 0`` where the expression is a real embedding."""
        return self.add(tag, key, embedded_expr >> 0, kind="psd_embedded", **info)

    def maximize(self, expr):
        self.objective, self.sense = expr, "max"

    def minimize(self, expr):
        self.objective, self.sense = expr, "min"

    @property
    def cvx(self) -> cp.Problem:
        if self._cvx is None:
            if self.objective is None:
                raise ValueError("objective not set")
            obj = cp.Maximize(self.objective) if self.sense == "max" else cp.Minimize(self.objective)
            self._cvx = cp.Problem(obj, self.constraints)
        return self._cvx

    def tags(self) -> list[str]:
        return list(self.registry)

    def dimensions(self) -> dict:
        """Counts of scalar variables and constraint blocks by kind (for reporting)."""
        n_var = sum(v.size for v in self.cvx.variables())
        blocks: dict[str, int] = {}
        for entries in self.registry.values():
            for e in entries.values():
                blocks[e.kind] = blocks.get(e.kind, 0) + 1
        return {"n_scalar_vars": int(n_var), "n_constraints": len(self.constraints), "blocks": blocks}

    def dump(self) -> str:
        """Sparse-triplet text dump of the compiled conic data (c, A, b and cone sizes)."""
        data, _, _ = self.cvx.get_problem_data(cp.CLARABEL)
        A = data["A"].tocoo()
        lines = [f"# problem {self.name}", f"n {A.shape[1]} m {A.shape[0]}"]
        lines.append("c " + " ".join(f"{i}:{v!r}" for i, v in enumerate(data["c"]) if v != 0))
        lines.append("b " + " ".join(f"{i}:{v!r}" for i, v in enumerate(data["b"]) if v != 0))
        for r, c, v in zip(A.row, A.col, A.data):
            lines.append(f"A {r} {c} {v!r}")
        dims = data["dims"]
        lines.append(f"cones zero={dims.zero} nonneg={dims.nonneg} soc={list(dims.soc)} "
                     f"psd={list(dims.psd)} exp={dims.exp}")
        return "\n".join(lines) + "\n"


def lmi_2x2(problem: ConicProblem, tag: str, key, a, b, c):
    """[[a, b], [b, c]] >= 0, i.e. a, c >= 0 and a c >= b^2."""
    blk = cp.bmat([[cp.reshape(a, (1, 1), order="F"), cp.reshape(b, (1, 1), order="F")],
                   [cp.reshape(b, (1, 1), order="F"), cp.reshape(c, (1, 1), order="F")]])
    return problem.add(tag, key, blk >> 0, kind="psd_real")


def sproc_blocks(outer: np.ndarray, h_hat: np.ndarray, sigma: float):
    """Complex constant pieces (Hhat F, S1, e e^T) of the compressed S-procedure LMI.

    The quadratic form only sees the error through dh F, so with the thin QR
    factorization F = Q R the error can be restricted to range(Q) without
    changing the certified bound.  The blocks therefore live in C^(r+1), with
    r = rank(F):  Hhat F = [R; h_hat F] and S1 = diag(I_r, -sigma ||h_hat||^2).
    Conjugating the full (len(h_hat)+1)-sized LMI by diag(Q, 1) gives exactly
    this one; the discarded block is weight * I, which is PSD for weight >= 0.
    """
    outer = np.asarray(outer, dtype=complex)
    h_hat = np.asarray(h_hat, dtype=complex).ravel()
    P = outer.shape[0]
    if h_hat.size != P:
        raise ValueError("channel length does not match the outer factor")
    R = np.linalg.qr(outer, mode="r")
    r = R.shape[0]
    HF = np.vstack([R, (h_hat @ outer)[None, :]])
    S1 = np.zeros((r + 1, r + 1))
    S1[:r, :r] = np.eye(r)
    S1[r, r] = -sigma * np.linalg.norm(h_hat) ** 2
    e = np.zeros((r + 1, r + 1))
    e[r, r] = 1.0
    return HF, S1, e


def expand_sproc_dual(T: np.ndarray, outer: np.ndarray) -> np.ndarray:
    """Map a multiplier of the compressed LMI back to the full error space: diag(Q,1) T diag(Q,1)^H."""
    Q = np.linalg.qr(np.asarray(outer, dtype=complex), mode="reduced")[0]
    P = np.zeros((Q.shape[0] + 1, Q.shape[1] + 1), dtype=complex)
    P[:-1, :-1] = Q
    P[-1, -1] = 1.0
    return P @ T @ P.conj().T


def sproc_matrices(outer: np.ndarray, h_hat: np.ndarray, sigma: float):
    """Real embeddings E(Hhat F), E(S1), E(e e^T) of :func:`sproc_blocks`."""
    HF, S1, e = sproc_blocks(outer, h_hat, sigma)
    return embed(HF), embed(S1), embed(e)


def sproc_lmi(problem: ConicProblem, tag: str, key, weight, inner_embedded, outer, h_hat, scalar,
              sigma: float, form: str):
    """S-procedure LMI certifying a quadratic bound over the error ball ||dh||^2 <= sigma ||h_hat||^2.

    With X the Hermitian matrix whose embedding is ``inner_embedded`` and
    Q = outer X outer^H:

    * ``form='upper'``:  weight*S1 - Hhat Q Hhat^H + scalar*e e^T >= 0
      certifies (h_hat+dh) Q (h_hat+dh)^H <= scalar for every dh in the ball.
    * ``form='lower'``:  weight*S1 + Hhat Q Hhat^H + scalar*e e^T >= 0
      certifies (h_hat+dh) Q (h_hat+dh)^H + scalar >= 0 for every dh in the ball.
    """
    if form not in ("upper", "lower"):
        raise ValueError(f"form must be 'upper' or 'lower', got {form!r}")
    EG, ES, Ee = sproc_matrices(outer, h_hat, sigma)
    sign = -1.0 if form == "upper" else 1.0
    expr = weight * ES + sign * (EG @ inner_embedded @ EG.T) + scalar * Ee
    expr = (expr + expr.T) / 2
    return problem.add(tag, key, expr >> 0, kind="psd_embedded", form=form)


RANK_RATIO = 1e-6


def numerical_rank(X, ratio_tol: float = RANK_RATIO, psd_tol: float = 1e-8) -> int:
    """Number of eigenvalues at least ``ratio_tol`` times the largest one.

    Raises if X has a negative eigenvalue below ``-psd_tol * max(1, lambda_max)``.
    """
    X = np.asarray(X)
    w = np.linalg.eigvalsh((X + X.conj().T) / 2)
    top = float(w.max(initial=0.0))
    if w.size and w.min() < -psd_tol * max(1.0, top):
        raise ValueError(f"matrix is not PSD (smallest eigenvalue {w.min():.3e})")
    return int(np.sum(w >= ratio_tol * top)) if top > 0 else 0


@dataclass
class DualInfo:
    values: dict[str, dict[Any, Any]]

    def has(self, tag: str) -> bool:
        return tag in self.values

    def get(self, tag: str, key=None):
        if tag not in self.values:
            raise KeyError(f"no multipliers for tag {tag!r}")
        entries = self.values[tag]
        if key is None:
            if len(entries) != 1:
                raise KeyError(f"tag {tag!r} has several entries; give a key")
            return next(iter(entries.values()))
        return entries[key]

    def require(self, *tags):
        missing = [t for t in tags if t not in self.values]
        if missing:
            raise KeyError(f"missing multiplier tags: {missing}")

    def min_scalar(self) -> float:
        vals = [float(v) for e in self.values.values() for v in e.values() if np.ndim(v) == 0]
        return min(vals) if vals else 0.0


@dataclass
class SolveResult:
    status: str
    value: float | None
    primal: dict
    duals: DualInfo | None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "optimal_inaccurate")


def _dual_value(entry: _Entry):
    d = entry.constraint.dual_value
    if d is None:
        return None
    if entry.kind == "psd_embedded":
        return dual_to_complex(np.asarray(d))
    if entry.kind == "psd_real":
        d = np.asarray(d, dtype=float)
        return (d + d.T) / 2
    d = np.asarray(d, dtype=float)
    return float(d) if d.size == 1 else d


# Fallback settings tried in order when Clarabel stalls on a badly scaled instance.
RETRY_SETTINGS = ({}, {"max_step_fraction": 0.9}, {"tol_scale": 10.0})


def solve(problem: ConicProblem, tol: float = DEFAULT_TOL, retries: bool = True, **solver_opts) -> SolveResult:
    """Solve with Clarabel and collect primal values and named multipliers.

    Each attempt builds a fresh solver (no reuse of cvxpy's cached instance).
    On a solver error the settings in ``RETRY_SETTINGS`` are tried in turn.
    """
    prob = problem.cvx
    attempts = RETRY_SETTINGS if retries else RETRY_SETTINGS[:1]
    error = None
    for n_try, extra in enumerate(attempts, 1):
        extra = dict(extra)
        t = tol * extra.pop("tol_scale", 1.0)
        opts = dict(tol_gap_abs=t, tol_gap_rel=t, tol_feas=t, max_iter=200)
        opts.update(extra)
        opts.update(solver_opts)
        try:
            prob.solve(solver=cp.CLARABEL, warm_start=False, **opts)
            break
        except cp.error.SolverError as exc:
            error = str(exc)
            log.info("attempt %d failed in %s: %s", n_try, problem.name, exc)
    else:
        log.warning("solver failure in %s: %s", problem.name, error)
        return SolveResult("solver_error", None, {}, None, {"error": error, "attempts": len(attempts)})
    status = prob.status
    stats = {"solve_time": prob.solver_stats.solve_time, "iterations": prob.solver_stats.num_iters,
             "attempts": n_try}
    if status not in ("optimal", "optimal_inaccurate"):
        return SolveResult(status, None, {}, None, stats)
    primal = {}
    for name, v in problem.vars.items():
        primal[name] = v.value if isinstance(v, HermitianVar) else (None if v.value is None else np.array(v.value))
    duals = {tag: {key: _dual_value(e) for key, e in entries.items()} for tag, entries in problem.registry.items()}
    return SolveResult(status, float(prob.value), primal, DualInfo(duals), stats)
