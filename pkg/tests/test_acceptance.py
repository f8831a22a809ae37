"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line, printed in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from pdmcts.duals import value_function_penalty
from pdmcts.harness import ExperimentSpec, run_experiment
from pdmcts.oracle import exact_dual_expectation, solve_exact
from pdmcts.problems import generate_random_mdp, resolve_problem

from conftest import ACCEPTANCE_LINES

EXAMPLE1_EDGES = ((1, 2), (1, 3), (1, 4), (1, 5))
EXAMPLE1_COSTS = (4.0, 5.0, 3.5, 5.5)
OPTIMAL_EDGE = "(1, 4)"
METRIC_FILES = ("summary.csv", "depth_histogram.csv", "invariants.csv", "manifest.json")


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


def root_spec(out_dir=None):
    return ExperimentSpec("example1", ("primal_dual",), tuple(range(20)), (5000,),
                          out_dir=out_dir, verbosity="root")


def d5_spec(out_dir=None, seeds=tuple(range(10))):
    return ExperimentSpec("D5", ("primal_dual", "vanilla"), seeds, (2000,),
                          out_dir=out_dir, verbosity="root")


@pytest.fixture(scope="module")
def root_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("root_runs")
    start = time.perf_counter()
    report = run_experiment(root_spec(str(out)))
    return report, out, time.perf_counter() - start


@pytest.fixture(scope="module")
def d5_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("d5_runs")
    start = time.perf_counter()
    report = run_experiment(d5_spec(str(out)))
    return report, out, time.perf_counter() - start


def d5_pairs(report):
    return [(report.cell("primal_dual", s, 2000), report.cell("vanilla", s, 2000))
            for s in range(10)]


def test_criterion_1_example1_oracle():
    start = time.perf_counter()
    table = solve_exact(resolve_problem("example1-two-point"))
    elapsed = time.perf_counter() - start
    costs = [-table.q(0, 1, e) for e in EXAMPLE1_EDGES]
    err = max([abs(-table.v(0, 1) - 3.5)] + [abs(c - e) for c, e in zip(costs, EXAMPLE1_COSTS)])
    record(1, "shortest-path oracle values", err <= 1e-9 and elapsed < 1.0,
           f"max error {err:.1e}, {elapsed:.3f}s")


def random_regime_sizes(k):
    rng = np.random.default_rng([2024, k])
    return (int(rng.integers(1, 7)), int(rng.integers(1, 5)),
            int(rng.integers(1, 4)), int(rng.integers(1, 5)))


def test_criterion_2_duality_suite():
    start = time.perf_counter()
    weak_gap, strong_err, pairs = math.inf, 0.0, 0
    for k in range(100):
        sizes = random_regime_sizes(k)
        p = generate_random_mdp(sizes, k)
        table = solve_exact(p, roots=range(sizes[0]))
        pen = value_function_penalty(table.v)
        for s in range(sizes[0]):
            for a in range(sizes[1]):
                q = table.q(0, s, a)
                weak_gap = min(weak_gap, exact_dual_expectation(p, 0, s, a) - q)
                strong_err = max(strong_err, abs(exact_dual_expectation(p, 0, s, a, pen) - q))
                pairs += 1
    elapsed = time.perf_counter() - start
    ok = weak_gap >= -1e-9 and strong_err <= 1e-6 and elapsed < 120
    record(2, "weak and strong duality on 100 random MDPs", ok,
           f"{pairs} pairs, min u0-Q* {weak_gap:.1e}, max |uV*-Q*| {strong_err:.1e}, "
           f"{elapsed:.1f}s")


def test_criterion_3_root_convergence(root_runs):
    report, _, elapsed = root_runs
    hits = [c for c in report.cells if c.recommendation == OPTIMAL_EDGE]
    worst = max((abs(c.summary["root_value"] + 3.5) for c in hits), default=math.inf)
    ok = len(hits) >= 18 and worst <= 0.2 and elapsed < 60
    record(3, "shortest-path root convergence", ok,
           f"e14 in {len(hits)}/20 seeds, max |V+3.5| {worst:.3f}, {elapsed:.1f}s")


def test_criterion_4_partial_expansion(root_runs):
    report, _, _ = root_runs
    hits = [c for c in report.cells if c.recommendation == OPTIMAL_EDGE]
    partial = sum(c.summary["root_expanded"] < len(EXAMPLE1_EDGES) for c in hits)
    ok = bool(hits) and partial >= 0.5 * len(hits)
    record(4, "partial root expansion", ok,
           f"{partial}/{len(hits)} converged seeds leave a root action unexpanded")


@pytest.mark.slow
def test_criterion_5_expansion_breadth(d5_runs):
    report, _, elapsed = d5_runs
    pairs = d5_pairs(report)
    wins = sum(pd.summary["expansions_per_node"] <= va.summary["expansions_per_node"]
               for pd, va in pairs)
    means = [np.mean([c.summary["expansions_per_node"] for c in side]) for side in zip(*pairs)]
    record(5, "D5 expansions per node, primal-dual <= vanilla", wins >= 8 and elapsed < 600,
           f"{wins}/10 pairs, mean {means[0]:.3f} vs {means[1]:.3f}, {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_6_depth_shift(d5_runs):
    report, _, _ = d5_runs
    pairs = d5_pairs(report)
    wins = sum(pd.summary["median_depth"] >= va.summary["median_depth"] for pd, va in pairs)
    strict = sum(pd.summary["median_depth"] > va.summary["median_depth"] for pd, va in pairs)
    record(6, "D5 median subtree depth, primal-dual >= vanilla", wins >= 8,
           f"{wins}/10 pairs ({strict} strictly deeper)")


@pytest.mark.slow
def test_criterion_7_invariants(root_runs, d5_runs):
    cells = list(root_runs[0].cells) + list(d5_runs[0].cells)
    totals = {}
    for c in cells:
        for name, count in c.invariants.items():
            totals[name] = totals.get(name, 0) + count
    required = ("expansion_guard", "convex_mixture", "value_bounds", "counter_monotonicity")
    ok = all(name in totals for name in required) and sum(totals.values()) == 0
    record(7, "backpropagation invariants", ok,
           f"{len(cells)} runs, violations {totals}")


def same_bytes(a, b):
    names = list(METRIC_FILES)
    for cell_dir in sorted((a / "cells").iterdir()):
        names += [f"cells/{cell_dir.name}/{f.name}" for f in sorted(cell_dir.iterdir())]
    diffs = [n for n in names if (a / n).read_bytes() != (b / n).read_bytes()]
    return len(names), diffs


@pytest.mark.slow
def test_criterion_8_determinism(root_runs, d5_runs, tmp_path):
    checked, diffs = 0, []
    run_experiment(root_spec(str(tmp_path / "root")))
    n, d = same_bytes(root_runs[1], tmp_path / "root")
    checked, diffs = checked + n, diffs + d
    # one D5 pair repeated in a fresh directory against a fresh first run
    first, again = tmp_path / "d5a", tmp_path / "d5b"
    run_experiment(d5_spec(str(first), seeds=(0,)))
    run_experiment(d5_spec(str(again), seeds=(0,)))
    n, d = same_bytes(first, again)
    checked, diffs = checked + n, diffs + d
    # the grid run's cell files match the standalone rerun of the same cell
    for cell_dir in (first / "cells").iterdir():
        for f in cell_dir.iterdir():
            twin = d5_runs[1] / "cells" / cell_dir.name / f.name
            checked += 1
            if twin.read_bytes() != f.read_bytes():
                diffs.append(str(twin))
    record(8, "byte-identical metric files on repeat", not diffs,
           f"{checked} files compared, {len(diffs)} differ")
