"""Seeded Monte-Carlo sweeps: spec loading, trial execution, CSV and summary output."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from ..analogbf import design_analog_bf
from ..model import SystemConfig, dbm_to_watt, draw_instance
from ..rankrec import recover_rank_one
from ..rates import secrecy_rates
from ..srm import VARIANTS, solve_srm

log = logging.getLogger(__name__)

# experiment id -> (swept quantity, description of grid values)
EXPERIMENTS = {
    "convergence": (None, "ignored; one point"),
    "sweep_pbs": ("p_bs_total", "total BS power in dBm"),
    "sweep_pcp": ("p_cp", "CP power in dBm"),
    "sweep_users": ("n_users", "number of users"),
    "sweep_eves": ("n_eves", "number of eavesdroppers"),
    "sweep_sigma": ("csi_error_ratio", "CSI error ratio"),
}

ROW_FIELDS = (
    "experiment", "grid_value", "trial", "variant", "status", "seed", "config_hash",
    "secrecy", "secrecy_relaxed", "access_sum", "fronthaul_min", "surrogate_final", "iterations",
    "reason", "monotone", "rank_V0", "rank_Vk_max", "path_V0", "max_residual", "power_residual",
    "fronthaul_margin",
)
TRACE_FIELDS = ("experiment", "grid_value", "trial", "variant", "iteration", "surrogate", "true_secrecy",
                "max_violation")


def apply_grid(cfg: SystemConfig, experiment: str, value) -> SystemConfig:
    """Config for one grid point; powers are given in dBm."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    name = EXPERIMENTS[experiment][0]
    if name is None:
        return cfg
    if name in ("p_bs_total", "p_cp"):
        return cfg.replace(**{name: dbm_to_watt(float(value))})
    if name in ("n_users", "n_eves"):
        return cfg.replace(**{name: int(value)})
    return cfg.replace(csi_error_ratio=float(value))


@dataclass
class ExperimentSpec:
    experiment: str
    grid: list = field(default_factory=lambda: [0])
    n_trials: int = 20
    base: SystemConfig = field(default_factory=SystemConfig)
    variants: tuple = VARIANTS
    outdir: str = "results"
    master_seed: int = 0
    name: str | None = None
    recover: bool = True
    n_candidates: int = 50
    crn: bool = False           # common random numbers: the same channels at every grid point
    T_max: int = 30
    tol_rel: float = 1e-4
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {sorted(EXPERIMENTS)}")
        self.grid = list(self.grid)
        if not self.grid:
            raise ValueError("grid must not be empty")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        self.variants = tuple(self.variants)
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise ValueError(f"variants must be a non-empty subset of {VARIANTS}, got {self.variants}")
        if isinstance(self.base, dict):
            self.base = SystemConfig.from_dict(self.base)
        if self.name is None:
            self.name = self.experiment

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["base"] = self.base.to_dict()
        d["variants"] = list(self.variants)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        base = data.pop("base", {}) or {}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown spec keys: {sorted(unknown)}")
        cfg = SystemConfig.from_dict(_config_from_user(base))
        return cls(base=cfg, **data)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        text = Path(path).read_text()
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        return cls.from_dict(data or {})


def _config_from_user(base: dict) -> dict:
    """Accept *_dbm convenience keys for powers and noise in spec files."""
    out = {}
    for key, value in base.items():
        if key.endswith("_dbm"):
            name = {"noise_psd_dbm": "noise_psd"}.get(key, key[:-4])
            out[name] = [dbm_to_watt(v) for v in value] if isinstance(value, list) else dbm_to_watt(value)
        else:
            out[key] = value
    return out


def trial_seed(master: int, point: int, trial: int, crn: bool = False) -> int:
    entropy = [master, trial] if crn else [master, point, trial]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if not np.isfinite(x) else f"{float(x):.10g}"
    return str(x)


def run_trial(spec: ExperimentSpec, point: int, trial: int):
    """All variants on one drawn instance.  Returns (rows, trace_rows)."""
    value = spec.grid[point]
    seed = trial_seed(spec.master_seed, point, trial, spec.crn)
    cfg = apply_grid(spec.base, spec.experiment, value).replace(rng_seed=seed)
    rows, traces = [], []
    head = {"experiment": spec.experiment, "grid_value": value, "trial": trial, "seed": seed,
            "config_hash": cfg.digest()}
    try:
        _, channels = draw_instance(cfg)
        bf = design_analog_bf(channels, cfg)
    except Exception as exc:  # noqa: BLE001 - recorded per row
        return [dict(head, variant=v, status=f"error:{type(exc).__name__}") for v in spec.variants], []
    for variant in spec.variants:
        row = dict(head, variant=variant)
        try:
            res = solve_srm(variant, channels, bf, cfg, T_max=spec.T_max, tol_rel=spec.tol_rel)
            tr = res.trace
            relaxed = secrecy_rates(res.solution, channels, bf, cfg)
            row.update(secrecy_relaxed=relaxed.sum_secrecy / cfg.bw_mmwave, surrogate_final=tr.surrogate[-1],
                       iterations=tr.iterations, reason=tr.reason, monotone=tr.is_monotone())
            final, sol = relaxed, res.solution
            if spec.recover:
                sol, rep = recover_rank_one(res, channels, bf, cfg, n_candidates=spec.n_candidates, rng=seed)
                final = secrecy_rates(sol, channels, bf, cfg)
                row.update(rank_V0=rep.ranks_before["V0"],
                           rank_Vk_max=max(v for k, v in rep.ranks_before.items() if k != "V0"),
                           path_V0=rep.paths["V0"], max_residual=rep.max_residual)
            row.update(secrecy=final.sum_secrecy / cfg.bw_mmwave, access_sum=final.sum_access / cfg.bw_mmwave,
                       fronthaul_min=final.fronthaul_min / cfg.bw_mmwave,
                       power_residual=power_residual(res.inst, sol, cfg, variant),
                       fronthaul_margin=(final.fronthaul_min - final.sum_access) / cfg.bw_mmwave,
                       status="ok")
            for t in tr.rows():
                traces.append({"experiment": spec.experiment, "grid_value": value, "trial": trial,
                               "variant": variant, **t})
        except Exception as exc:  # noqa: BLE001 - recorded per row
            log.warning("trial %s/%s/%s failed: %s", value, trial, variant, exc)
            row["status"] = f"error:{type(exc).__name__}"
        rows.append(row)
    return rows, traces


def power_residual(inst, sol, cfg: SystemConfig, variant: str) -> float:
    """Largest relative excess of the BS power constraints (0 when satisfied)."""
    if inst.power.mode.value == "perbs":
        per = sol.per_bs_power()
        return float(np.max(np.maximum(per - np.asarray(cfg.p_bs_per), 0.0) / np.asarray(cfg.p_bs_per)))
    return max(sol.bs_power() - cfg.p_bs_total, 0.0) / cfg.p_bs_total


def _task(args):
    spec, point, trial = args
    return point, trial, run_trial(spec, point, trial)


def summarize(rows: list[dict], spec: ExperimentSpec) -> dict:
    groups: dict = {}
    for r in rows:
        groups.setdefault((spec.grid.index(r["grid_value"]), r["variant"]), []).append(r)
    points = []
    for (p, variant), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], spec.variants.index(kv[0][1]))):
        ok = [r for r in rs if r.get("status") == "ok"]
        vals = np.array([r["secrecy"] for r in ok], dtype=float)
        entry = {"grid_value": spec.grid[p], "variant": variant, "n": len(rs), "n_ok": len(ok)}
        if len(ok):
            entry.update(mean=float(vals.mean()), std=float(vals.std(ddof=1)) if len(ok) > 1 else 0.0,
                         ci95=ci_halfwidth(vals),
                         mean_relaxed=float(np.mean([r["secrecy_relaxed"] for r in ok])),
                         mean_iterations=float(np.mean([r["iterations"] for r in ok])),
                         converged_fraction=float(np.mean([r["reason"] == "converged" for r in ok])),
                         monotone_fraction=float(np.mean([bool(r["monotone"]) for r in ok])))
        points.append(entry)
    # the output location is left out so identical runs give identical files
    meta = {k: v for k, v in spec.to_dict().items() if k != "outdir"}
    return {"spec": meta, "config_hash": spec.base.digest(), "points": points}


def ci_halfwidth(values, level: float = 0.95) -> float:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return 0.0
    return float(stats.t.ppf(0.5 + level / 2, n - 1) * values.std(ddof=1) / np.sqrt(n))


def rows_to_csv(rows: list[dict], fields) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f, "")) for f in fields])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list
    traces: list
    summary: dict
    paths: dict
    seconds: float


def run_experiment(spec: ExperimentSpec, write: bool = True, progress=None) -> ExperimentResult:
    """Run every grid point x trial x variant; write ``<name>.csv``, ``<name>_traces.csv`` and
    ``<name>_summary.json`` under ``spec.outdir``.  Failures become rows with an error status."""
    t0 = time.perf_counter()
    tasks = [(spec, p, t) for p in range(len(spec.grid)) for t in range(spec.n_trials)]
    results = []
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            for out in ex.map(_task, tasks):
                results.append(out)
                if progress:
                    progress(out[0], out[1])
    else:
        for task in tasks:
            out = _task(task)
            results.append(out)
            if progress:
                progress(out[0], out[1])
    results.sort(key=lambda x: (x[0], x[1]))
    rows = [r for _, _, (rs, _) in results for r in rs]
    traces = [t for _, _, (_, ts) in results for t in ts]
    summary = summarize(rows, spec)
    paths = {}
    if write:
        out = Path(spec.outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths["csv"] = out / f"{spec.name}.csv"
        paths["traces"] = out / f"{spec.name}_traces.csv"
        paths["summary"] = out / f"{spec.name}_summary.json"
        paths["csv"].write_text(rows_to_csv(rows, ROW_FIELDS))
        paths["traces"].write_text(rows_to_csv(traces, TRACE_FIELDS))
        paths["summary"].write_text(json.dumps(summary, indent=1, sort_keys=True))
    return ExperimentResult(spec, rows, traces, summary, paths, time.perf_counter() - t0)
