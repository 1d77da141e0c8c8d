"""Experiment pipelines behind the command-line interface.

Each ``cmd_*`` function takes a resolved config, writes CSV files into an
output directory and returns the paths (plus any summary the caller needs).
All CSVs are UTF-8, comma separated, floats at 17 significant digits, with
``#`` comment lines carrying the resolved config.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import logging
import math
import os
import tempfile
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar

import numpy as np

from treecoca import config as cfgmod
from treecoca.delay import DelayScenario, optimal_h
from treecoca.local_sdca import local_sdca
from treecoca.losses import LossKind, dual_objective, ridge_optimum
from treecoca.model import Dataset
from treecoca.solver import leaf_rng, run_root, simulated_round_time
from treecoca.theory import node_bounds

log = logging.getLogger(__name__)

T = TypeVar("T")


class BoundViolation(RuntimeError):
    def __init__(self, rounds: list[int], result: OverlayResult | None = None):
        super().__init__(f"empirical suboptimality exceeds the bound at rounds {rounds}")
        self.rounds = rounds
        self.result = result


# --------------------------------------------------------------------------
# output helpers


def fmt(x: float | int | str) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def render_csv(
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    cfg: dict[str, Any],
    *,
    deterministic: bool,
    notes: Sequence[str] = (),
) -> str:
    buf = io.StringIO()
    if not deterministic:
        buf.write(f"# generated: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")
    buf.write(cfgmod.CONFIG_PREFIX + cfgmod.to_json(cfg) + "\n")
    for note in notes:
        buf.write(f"# {note}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Header and data rows of a harness CSV, skipping ``#`` lines."""
    with Path(path).open(encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def thread_count() -> int:
    env = os.environ.get("TREECOCA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer TREECOCA_THREADS=%r", env)
    return 1


def pmap(fn: Callable[[Any], T], items: Sequence[Any]) -> list[T]:
    """Map in input order, on up to TREECOCA_THREADS threads."""
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# run


TRACE_HEADER = ("round", "sim_time_seconds", "dual_obj", "primal_obj", "gap")


@dataclass
class RunOutput:
    paths: list[Path]
    time_to_target: dict[tuple[str, int], float] = field(default_factory=dict)


def cmd_run(cfg: dict[str, Any], out_dir: Path, *, deterministic: bool = False, check: bool = False,
            base_dir: Path | None = None) -> RunOutput:
    """One trace CSV per (topology, seed), plus a time-to-target summary."""
    dataset = cfgmod.build_dataset(cfg, base_dir)
    experiments = cfgmod.build_experiments(cfg, dataset)
    seeds = cfgmod.seeds_of(cfg)
    solver = cfg["solver"]
    R = int(solver["R"])
    target_rel = float(solver["target"])

    jobs = [(e, s) for e in experiments for s in seeds]

    def one(job):
        exp, seed = job
        stop = None
        if solver.get("stop_at_target"):
            stop = target_rel * _initial_gap(dataset)
        return run_root(exp.topology, dataset, exp.partition, R, seed, check=check, stop_gap=stop)

    results = pmap(one, jobs)
    out = RunOutput([])
    multi = len(jobs) > 1
    for (exp, seed), res in zip(jobs, results):
        tr = res.trace
        target = target_rel * tr.initial.gap
        out.time_to_target[(exp.name, seed)] = tr.time_to_gap(target)
        rows = [(r.round, r.sim_time, r.dual_obj, r.primal_obj, r.gap) for r in tr.rows]
        notes = [
            f"topology={exp.name} seed={seed} m={dataset.m} d={dataset.d} scale={fmt(dataset.scale)}",
            f"initial: dual_obj={fmt(tr.initial.dual_obj)} primal_obj={fmt(tr.initial.primal_obj)} gap={fmt(tr.initial.gap)}",
        ]
        name = "trace.csv" if not multi else f"trace_{exp.name}_seed{seed}.csv"
        path = out_dir / name
        resolved = cfgmod.merge(cfg, {"solver": {"seed": seed}})
        resolved["solver"].pop("seeds", None)
        if len(experiments) > 1:
            resolved.pop("topologies", None)
            resolved["topology"] = cfg["topologies"][exp.name]
        write_atomic(path, render_csv(TRACE_HEADER, rows, resolved, deterministic=deterministic, notes=notes))
        out.paths.append(path)
    summary = [(name, seed, t) for (name, seed), t in out.time_to_target.items()]
    path = out_dir / "time_to_target.csv"
    write_atomic(path, render_csv(("topology", "seed", "time_to_target"), summary, cfg,
                                  deterministic=deterministic, notes=[f"target={fmt(target_rel)} x initial gap"]))
    out.paths.append(path)
    return out


def _initial_gap(dataset: Dataset) -> float:
    from treecoca.losses import duality_gap

    return duality_gap(dataset, np.zeros(dataset.m))


# --------------------------------------------------------------------------
# sweep-h


def _with_edge_delay(cfg: dict[str, Any], r: float) -> dict[str, Any]:
    c = cfgmod.merge(cfg, {"delay": {"r": r}})
    c["delay"].pop("t_delay", None)
    return c


@dataclass
class SweepResult:
    long_path: Path
    summary_path: Path
    time_to_target: dict[tuple[float, int, int], float]

    def best_h(self, r: float, seed: int) -> int:
        """H with the smallest time-to-target for one (r, seed); ties go to smaller H."""
        cands = sorted((t, H) for (rr, H, s), t in self.time_to_target.items() if rr == r and s == seed)
        return cands[0][1]


def cmd_sweep_h(cfg: dict[str, Any], out_dir: Path, *, deterministic: bool = False, check: bool = False,
                base_dir: Path | None = None) -> SweepResult:
    """Time-to-target for every (r, H, seed).

    The iterate sequence does not depend on the delay, so each (H, seed) is
    solved once and its rounds are re-timed under every r.
    """
    sweep = cfg.get("sweep", {})
    hs = [int(h) for h in sweep.get("H", [])]
    rs = sorted(float(r) for r in sweep.get("r", []))
    if not hs or not rs:
        raise cfgmod.ConfigError("sweep.H and sweep.r must be nonempty lists")
    dataset = cfgmod.build_dataset(cfg, base_dir)
    seeds = cfgmod.seeds_of(cfg)
    target_rel = float(cfg["solver"]["target"])
    max_rounds = int(sweep["max_rounds"])
    g0 = _initial_gap(dataset)

    jobs = [(H, s) for H in hs for s in seeds]

    def one(job):
        H, seed = job
        (exp,) = cfgmod.build_experiments(cfg, dataset, H=H)[:1]
        res = run_root(exp.topology, dataset, exp.partition, max_rounds, seed, check=check, stop_gap=target_rel * g0)
        return res.trace

    traces = dict(zip(jobs, pmap(one, jobs)))
    long_rows, summary, ttt = [], [], {}
    for r in rs:
        rcfg = _with_edge_delay(cfg, r)
        for H in hs:
            (exp,) = cfgmod.build_experiments(rcfg, dataset, H=H)[:1]
            per_round = simulated_round_time(exp.topology.root, exp.topology)
            for seed in seeds:
                tr = traces[(H, seed)]
                times = per_round * np.arange(1, len(tr) + 1)
                for row, t in zip(tr.rows, times):
                    long_rows.append((seed, r, H, row.round, t, row.gap))
                hit = next((t for row, t in zip(tr.rows, times) if row.gap <= target_rel * tr.initial.gap), math.inf)
                ttt[(r, H, seed)] = hit
                summary.append((seed, r, H, len(tr), hit))
    long_path = out_dir / "sweep_h.csv"
    summary_path = out_dir / "sweep_h_summary.csv"
    note = [f"target={fmt(target_rel)} x initial gap; unreached targets are inf"]
    write_atomic(long_path, render_csv(("seed", "r", "H", "round", "sim_time", "gap"), long_rows, cfg,
                                       deterministic=deterministic, notes=note))
    write_atomic(summary_path, render_csv(("seed", "r", "H", "rounds", "time_to_target"), summary, cfg,
                                          deterministic=deterministic, notes=note))
    return SweepResult(long_path, summary_path, ttt)


# --------------------------------------------------------------------------
# optimize-h


def scenario_from(cfg: dict[str, Any], r: float) -> DelayScenario:
    o = cfg.get("optimize", {})
    try:
        return DelayScenario.with_ratio(
            r, C=float(o["C"]), K=int(o["K"]), delta=float(o["delta"]),
            t_total=float(o["t_total"]), t_lp=float(o["t_lp"]), t_cp=float(o["t_cp"]),
        )
    except KeyError as exc:
        raise cfgmod.ConfigError(f"optimize.{exc.args[0]} is required") from None


def cmd_optimize_h(cfg: dict[str, Any], out_dir: Path, *, deterministic: bool = False) -> tuple[Path, list[tuple[float, int, float]]]:
    o = cfg.get("optimize", {})
    rs = sorted(float(r) for r in o.get("r", []))
    if not rs:
        raise cfgmod.ConfigError("optimize.r must be a nonempty list")
    h_max = int(o["h_max"])
    rows = []
    for r in rs:
        best = optimal_h(scenario_from(cfg, r), h_max)
        rows.append((r, best.h_star, best.value))
    path = out_dir / "optimal_h.csv"
    write_atomic(path, render_csv(("r", "h_star", "log_objective"), rows, cfg, deterministic=deterministic))
    return path, rows


# --------------------------------------------------------------------------
# bound-overlay

REFERENCE_STEPS = 1_000_000


def reference_dual_optimum(dataset: Dataset, cache_dir: Path | None = None) -> float:
    """``D(alpha*)``: closed form for squared loss, else a long single-machine SDCA run.

    The SDCA value is cached under ``cache_dir`` keyed by the dataset fingerprint.
    """
    if dataset.loss.kind is LossKind.SQUARED:
        _, alpha = ridge_optimum(dataset)
        return dual_objective(dataset, alpha)
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"dual_opt_{dataset.fingerprint()}.txt"
        if cache.exists():
            return float(cache.read_text().strip())
    everything = np.arange(dataset.m)
    upd = local_sdca(dataset, everything, np.zeros(dataset.m), np.zeros(dataset.d), REFERENCE_STEPS,
                     leaf_rng(0, 0, 0))
    alpha = np.zeros(dataset.m)
    alpha[upd.indices] = upd.delta_alpha
    value = dual_objective(dataset, alpha)
    if cache is not None:
        write_atomic(cache, fmt(value) + "\n")
    return value


@dataclass
class OverlayResult:
    path: Path
    empirical: np.ndarray
    bound: np.ndarray
    violations: list[int]


def cmd_bound_overlay(cfg: dict[str, Any], out_dir: Path, *, deterministic: bool = False, check: bool = False,
                      base_dir: Path | None = None) -> OverlayResult:
    """Mean dual suboptimality over seeds next to the theoretical bound.

    Raises :class:`BoundViolation` (after writing the CSV) when the mean
    exceeds ``bound * (1 + tolerance)`` at any round.
    """
    seeds = cfgmod.seeds_of(cfg)
    if len(seeds) < 20:
        raise cfgmod.ConfigError(f"bound-overlay needs at least 20 seeds, got {len(seeds)}")
    bcfg = cfg["bound"]
    rounds = int(bcfg["rounds"])
    tol = float(bcfg["tolerance"])
    dataset = cfgmod.build_dataset(cfg, base_dir)
    (exp,) = cfgmod.build_experiments(cfg, dataset)[:1]
    bounds = node_bounds(exp.topology, dataset, exp.partition)
    root = bounds[exp.topology.root]
    if not root.factor < 1.0:
        raise cfgmod.ConfigError("configuration gives no guaranteed progress (contraction factor is 1)")
    d_star = reference_dual_optimum(dataset, out_dir / ".cache")

    def one(seed):
        tr = run_root(exp.topology, dataset, exp.partition, rounds, seed, check=check).trace
        return [d_star - tr.initial.dual_obj] + [d_star - r.dual_obj for r in tr.rows]

    subopt = np.array(pmap(one, seeds))
    mean = subopt.mean(axis=0)
    bound = mean[0] * root.factor ** np.arange(rounds + 1)
    violations = [t for t in range(rounds + 1) if mean[t] > bound[t] * (1.0 + tol)]
    rows = [(t, mean[t], bound[t]) for t in range(rounds + 1)]
    notes = [
        f"seeds={len(seeds)} rho_root={fmt(root.rho)} per_round_factor={fmt(root.factor)} D_star={fmt(d_star)}",
        f"violations={violations}",
    ]
    path = out_dir / "bound_overlay.csv"
    write_atomic(path, render_csv(("round", "empirical_mean_gap_over_seeds", "theorem_bound"), rows, cfg,
                                  deterministic=deterministic, notes=notes))
    result = OverlayResult(path, mean, bound, violations)
    if violations:
        raise BoundViolation(violations, result)
    return result
