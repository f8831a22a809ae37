"""Experiment runner, tree metrics and run-time invariant checks.

Output layout of one experiment directory::

    manifest.json            spec, cell list, seeds and relative paths
    summary.csv              one row per cell; tree-derived metrics only
    depth_histogram.csv      cell, depth, count
    invariants.csv           cell, check, violations
    timing.csv               wall-clock per iteration (not reproducible)
    cells/<cell>/tree.txt    tree snapshot
    cells/<cell>/root_value.csv
    cells/<cell>/q_trace.jsonl   {iteration, action, q, u, event} per expanded root action
    cells/<cell>/events.jsonl    full per-iteration path and events (verbosity "full")

``summary.csv`` and ``depth_histogram.csv`` are pure functions of the snapshots and
can be rebuilt with :func:`report_from_snapshots`.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import statistics
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .duals import ZERO_PENALTY, value_function_penalty
from .engine import EngineConfig, IterationTrace, PrimalDualMCTS, recommend
from .errors import ConfigurationError, NotReadyError
from .oracle import solve_exact
from .policies import SelectionConfig
from .problems import resolve_problem
from .tree import SearchTree, _text, tree_from_text, tree_to_text

VALUE_TOL = 1e-9
VERBOSITY = ("none", "root", "full")


# ----------------------------------------------------------------------------
# tree metrics


def subtree_depths(tree: SearchTree) -> list[int]:
    """Per state node, the deepest state-node layer below it (0 when childless)."""
    depth = [0] * len(tree.x_nodes)
    # children always have larger ids than their parents, so a reverse sweep suffices
    for x in reversed(tree.x_nodes):
        if x.parent is None:
            continue
        y = tree.y_nodes[x.parent]
        p = y.parent
        if depth[x.id] + 1 > depth[p]:
            depth[p] = depth[x.id] + 1
    return depth


def depth_histogram(tree: SearchTree) -> dict[int, int]:
    return dict(sorted(Counter(subtree_depths(tree)).items()))


def median_depth(tree: SearchTree) -> float:
    return float(statistics.median(subtree_depths(tree)))


def expansions_per_node(tree: SearchTree) -> float:
    """Mean number of expanded actions over visited state nodes."""
    counts = [len(x.children) for x in tree.x_nodes if x.visits >= 1]
    if not counts:
        raise NotReadyError("no visited state nodes")
    return sum(counts) / len(counts)


def tree_summary(tree: SearchTree) -> dict:
    depths = subtree_depths(tree)
    try:
        rec = recommend(tree)
        rec = rec if tree.from_snapshot else _text(rec)
        epn = expansions_per_node(tree)
    except NotReadyError:
        rec, epn = "", math.nan
    kids = tree.root_children()
    return {
        "recommendation": rec,
        "root_value": tree.root_node.value,
        "root_best_q": max((k.q_value for k in kids), default=math.nan),
        "root_expanded": len(kids),
        "state_nodes": len(tree.x_nodes),
        "state_action_nodes": len(tree.y_nodes),
        "expansions_per_node": epn,
        "median_depth": float(statistics.median(depths)),
        "max_depth": max(depths),
    }


# ----------------------------------------------------------------------------
# invariants


class InvariantMonitor:
    """Checks the search after every iteration and tallies violations by name."""

    CHECKS = ("expansion_guard", "convex_mixture", "value_bounds", "counter_monotonicity",
              "stepsize_schedule")

    def __init__(self, search: PrimalDualMCTS):
        self.search = search
        self.violations = {k: 0 for k in self.CHECKS}
        self.messages: list[str] = []
        self._visits_x: list[int] = []
        self._visits_y: list[int] = []
        self._lookaheads: dict = {}

    def _fail(self, check: str, msg: str) -> None:
        self.violations[check] += 1
        if len(self.messages) < 50:
            self.messages.append(f"{check}: {msg}")

    def observe(self, trace: IterationTrace) -> None:
        search, tree = self.search, self.search.tree
        for rec in trace.expansions:
            if rec.best_u is None or rec.forced:
                continue
            if rec.expanded != (rec.best_u > rec.value_before):
                self._fail("expansion_guard", f"iteration {trace.iteration} node {rec.node}")
        for x, a, _, _, l in trace.dual_samples:
            prev = self._lookaheads.get((x, a), 0)
            if l != prev + 1:
                self._fail("stepsize_schedule", f"node {x} action {a!r}: {prev} -> {l}")
            self._lookaheads[(x, a)] = l

        horizon, bound = search.problem.horizon, search.problem.contribution_bound
        for x in tree.x_nodes:
            limit = (horizon - x.stage) * bound + VALUE_TOL
            if abs(x.value) > limit or abs(x.value_mean) > limit:
                self._fail("value_bounds", f"state node {x.id}")
            if x.children:
                best = max(tree.y_nodes[c].q_value for c in x.children)
                lo, hi = min(best, x.value_mean), max(best, x.value_mean)
                if not lo - VALUE_TOL <= x.value <= hi + VALUE_TOL:
                    self._fail("convex_mixture", f"state node {x.id}")
        for y in tree.y_nodes:
            if abs(y.q_value) > (horizon - y.stage) * bound + VALUE_TOL:
                self._fail("value_bounds", f"state-action node {y.id}")

        vx = [x.visits for x in tree.x_nodes]
        vy = [y.visits for y in tree.y_nodes]
        if any(a < b for a, b in zip(vx, self._visits_x)) or \
                any(a < b for a, b in zip(vy, self._visits_y)):
            self._fail("counter_monotonicity", f"iteration {trace.iteration}")
        if tree.iteration != trace.iteration or tree.root_node.visits != trace.iteration:
            self._fail("counter_monotonicity", f"root count at iteration {trace.iteration}")
        self._visits_x, self._visits_y = vx, vy

    @property
    def total(self) -> int:
        return sum(self.violations.values())


# ----------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentSpec:
    problem: str
    variants: tuple = ("primal_dual",)
    seeds: tuple = (0,)
    iterations: tuple = (1000,)
    out_dir: Optional[str] = None
    verbosity: str = "root"
    jobs: int = 1
    selection: str = "ucb1"
    penalty: str = "zero"  # or "oracle": nu = V* from the exact solver
    rollout: str = "rolling_horizon"
    c_lambda: float = 100.0

    def __post_init__(self):
        self.variants, self.seeds, self.iterations = (tuple(self.variants), tuple(self.seeds),
                                                      tuple(self.iterations))
        if not (self.variants and self.seeds and self.iterations):
            raise ConfigurationError("experiment needs at least one cell")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds must be distinct")
        if self.verbosity not in VERBOSITY:
            raise ConfigurationError(f"verbosity must be one of {VERBOSITY}")
        if self.penalty not in ("zero", "oracle"):
            raise ConfigurationError(f"unknown penalty {self.penalty!r}")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        for v in self.variants:
            EngineConfig(variant=v)
        SelectionConfig(self.selection)

    def cells(self) -> list[tuple[str, int, int]]:
        return [(v, s, n) for v in self.variants for s in self.seeds for n in self.iterations]


@dataclass
class CellResult:
    cell: str
    variant: str
    seed: int
    iterations: int
    summary: dict
    histogram: dict
    root_values: list
    q_traces: list
    invariants: dict
    invariant_messages: list
    seconds: list
    snapshot: str = field(repr=False, default="")

    @property
    def recommendation(self) -> str:
        return self.summary["recommendation"]


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    cells: list

    def cell(self, variant: str, seed: int, iterations: Optional[int] = None) -> CellResult:
        for c in self.cells:
            if c.variant == variant and c.seed == seed and iterations in (None, c.iterations):
                return c
        raise KeyError((variant, seed, iterations))


def _slug(ref: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", Path(ref).stem if "/" in ref else ref).strip("-")


def cell_name(problem: str, variant: str, seed: int, iterations: int) -> str:
    return f"{_slug(problem)}__{variant}__s{seed}__n{iterations}"


def engine_config(spec: ExperimentSpec, problem, variant: str, seed: int,
                  iterations: int) -> EngineConfig:
    penalty = ZERO_PENALTY
    if spec.penalty == "oracle":
        table = solve_exact(problem)
        penalty = value_function_penalty(table.v)
    return EngineConfig(variant=variant, selection=SelectionConfig(spec.selection),
                        penalty=penalty, iterations=iterations, seed=seed,
                        rollout=spec.rollout, c_lambda=spec.c_lambda, keep_traces=False)


def run_cell(spec: ExperimentSpec, variant: str, seed: int, iterations: int) -> CellResult:
    problem = resolve_problem(spec.problem)
    search = PrimalDualMCTS(problem, engine_config(spec, problem, variant, seed, iterations))
    monitor = InvariantMonitor(search)
    tree = search.tree
    root_values, q_traces, seconds = [], [], []
    for _ in range(iterations):
        start = time.perf_counter()
        trace = search.run_iteration()
        seconds.append(time.perf_counter() - start)
        monitor.observe(trace)
        root_values.append(tree.root_node.value)
        if spec.verbosity != "none":
            event = trace.events[-1]
            for y in tree.root_children():
                q_traces.append({"iteration": trace.iteration, "action": _text(y.action),
                                 "q": y.q_value, "u": search.retired_u.get(y.id),
                                 "event": event})
            if spec.verbosity == "full":
                q_traces.append({"iteration": trace.iteration, "path": trace.path,
                                 "events": trace.events, "rollout": trace.rollout_value})
    return CellResult(cell_name(spec.problem, variant, seed, iterations), variant, seed,
                      iterations, tree_summary(tree), depth_histogram(tree), root_values,
                      q_traces, dict(monitor.violations), monitor.messages, seconds,
                      tree_to_text(tree))


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    resolve_problem(spec.problem)  # fail fast on a bad reference
    out = Path(spec.out_dir) if spec.out_dir else None
    if out is not None:
        try:
            (out / "cells").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigurationError(f"cannot write to {out}: {exc}") from exc
    jobs = [(spec, v, s, n) for v, s, n in spec.cells()]
    if spec.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [run_cell(*j) for j in jobs]
    report = ExperimentReport(spec, results)
    if out is not None:
        write_report(report, out)
    return report


# ----------------------------------------------------------------------------
# output files

SUMMARY_FIELDS = ("cell", "variant", "seed", "iterations", "recommendation", "root_value",
                  "root_best_q", "root_expanded", "state_nodes", "state_action_nodes",
                  "expansions_per_node", "median_depth", "max_depth")


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _summary_rows(cells) -> tuple[str, str]:
    """``(summary.csv, depth_histogram.csv)`` for ``(cell, variant, seed, n, summary, hist)``."""
    summary = _csv(SUMMARY_FIELDS, [(c, v, s, n, *(m[k] for k in SUMMARY_FIELDS[4:]))
                                    for c, v, s, n, m, _ in cells])
    hist = _csv(("cell", "depth", "count"),
                [(c, d, k) for c, _, _, _, _, h in cells for d, k in h.items()])
    return summary, hist


def write_report(report: ExperimentReport, out: Path) -> None:
    out = Path(out)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    summary, hist = _summary_rows([(c.cell, c.variant, c.seed, c.iterations, c.summary,
                                    c.histogram) for c in report.cells])
    (out / "summary.csv").write_text(summary)
    (out / "depth_histogram.csv").write_text(hist)
    (out / "invariants.csv").write_text(_csv(
        ("cell", "check", "violations"),
        [(c.cell, k, v) for c in report.cells for k, v in c.invariants.items()]))
    (out / "timing.csv").write_text(_csv(
        ("cell", "iterations", "mean_seconds", "median_seconds", "max_seconds", "total_seconds"),
        [(c.cell, c.iterations, *_time_stats(c.seconds)) for c in report.cells]))
    for c in report.cells:
        d = cells_dir / c.cell
        d.mkdir(exist_ok=True)
        (d / "tree.txt").write_text(c.snapshot)
        (d / "root_value.csv").write_text(_csv(("iteration", "root_value"),
                                               enumerate(c.root_values, 1)))
        if report.spec.verbosity != "none":
            (d / "q_trace.jsonl").write_text("".join(json.dumps(r) + "\n" for r in c.q_traces))
    manifest = {
        "format": "pdmcts experiment v1",
        "spec": {k: (list(v) if isinstance(v, tuple) else v)
                 for k, v in asdict(report.spec).items() if k != "out_dir"},
        "cells": [{"cell": c.cell, "variant": c.variant, "seed": c.seed,
                   "iterations": c.iterations, "dir": f"cells/{c.cell}"} for c in report.cells],
        "files": ["summary.csv", "depth_histogram.csv", "invariants.csv", "timing.csv"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _time_stats(seconds: list) -> tuple:
    if not seconds:
        return (0.0, 0.0, 0.0, 0.0)
    return (statistics.fmean(seconds), statistics.median(seconds), max(seconds), math.fsum(seconds))


def report_from_snapshots(run_dir, out_dir=None) -> tuple[str, str]:
    """Recompute ``summary.csv`` and ``depth_histogram.csv`` from tree snapshots."""
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"{run_dir}: no readable manifest.json") from exc
    rows = []
    for c in manifest["cells"]:
        tree = tree_from_text((run_dir / c["dir"] / "tree.txt").read_text())
        rows.append((c["cell"], c["variant"], c["seed"], c["iterations"], tree_summary(tree),
                     depth_histogram(tree)))
    summary, hist = _summary_rows(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.csv").write_text(summary)
        (out / "depth_histogram.csv").write_text(hist)
    return summary, hist
