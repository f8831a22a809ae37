"""Single ride-share driver on a toroidal grid.

State ``(loc, status, requests)``. ``status`` is ``(0, None)`` idle, ``(1, (i, j))``
heading to pick up trip ``(i, j)``, or ``(2, j)`` carrying a passenger to ``j``.
An idle driver either moves within its neighborhood (staying put included) or accepts
one of the shown requests; a busy driver has the single action ``CONTINUE``.
Requests are only kept in the state while the driver is idle.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, stats

from ..errors import ConfigurationError, ContractViolation
from ..mdp import ProblemDefinition

IDLE = (0, None)
CONTINUE = "continue"

NEIGHBORHOODS = {
    "D5": ((0, 0), (0, 1), (1, 0)),
    "D10": ((0, 0), (0, 1), (1, 0), (0, -1), (-1, 0), (1, 1)),
    "D15": ((0, 0), (0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1), (0, 2)),
}
R_MAX = {"D5": 2, "D10": 4, "D15": 5}
ENUMERATION_LIMIT = 200_000


class DriverState(NamedTuple):
    loc: int
    status: tuple
    requests: tuple = ()


@dataclass(frozen=True)
class RideShareConfig:
    rows: int = 5
    cols: int = 5
    horizon: int = 12
    r_max: int = 2
    neighborhood: tuple = NEIGHBORHOODS["D5"]
    w_base: float = 2.40
    w_dist: float = 2.02
    move_cost: float = 0.05
    pool_size: int = 7056
    pool_seed: int = 0
    request_rate: Optional[float] = None
    max_trip_distance: int = 4
    hotspots: int = 3
    start: Optional[int] = None
    literal_status: bool = False

    def __post_init__(self):
        if self.r_max < 0:
            raise ConfigurationError("r_max must be >= 0")
        if min(self.w_base, self.w_dist, self.move_cost) < 0:
            raise ConfigurationError("fares and movement cost must be nonnegative")
        if self.rows < 1 or self.cols < 1 or self.horizon < 0:
            raise ConfigurationError("grid and horizon must be positive")
        if (0, 0) not in self.neighborhood:
            raise ConfigurationError("neighborhood must include staying in place")
        if self.pool_size < 1 or self.max_trip_distance < 1:
            raise ConfigurationError("pool_size and max_trip_distance must be >= 1")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @cached_property
    def mean_requests(self) -> float:
        """Poisson intensity: given, or solved so that ``E|R| = r_max / 2``."""
        if self.request_rate is not None:
            return float(self.request_rate)
        if self.r_max == 0:
            return 0.0
        target = self.r_max / 2.0
        return optimize.brentq(lambda mu: expected_truncated_count(mu, self.r_max) - target,
                               1e-9, 10.0 * self.r_max + 10.0)


def expected_truncated_count(mu: float, cap: int) -> float:
    """``E[min(Poisson(mu), cap)]``."""
    ks = np.arange(cap)
    return float(np.sum(ks * stats.poisson.pmf(ks, mu)) + cap * stats.poisson.sf(cap - 1, mu))


class Grid:
    """Directed torus: moves follow the neighborhood offsets (the stay offset excluded)."""

    def __init__(self, rows: int, cols: int, neighborhood):
        self.rows, self.cols = rows, cols
        n = rows * cols
        self.neighbors = []
        for cell in range(n):
            r, c = divmod(cell, cols)
            cells = [((r + dr) % rows) * cols + (c + dc) % cols for dr, dc in neighborhood]
            if len(set(cells)) != len(cells):
                raise ConfigurationError("neighborhood offsets collide on this grid")
            self.neighbors.append(tuple(cells))
        self.dist = [self._bfs(j) for j in range(n)]  # dist[j][i] = d(i, j)
        self.next_hop = [[self._first_step(i, j) for j in range(n)] for i in range(n)]

    def _bfs(self, target: int) -> list:
        rev = [[] for _ in range(len(self.neighbors))]
        for i, nb in enumerate(self.neighbors):
            for j in nb:
                if j != i:
                    rev[j].append(i)
        d = [math.inf] * len(self.neighbors)
        d[target] = 0
        queue = deque([target])
        while queue:
            u = queue.popleft()
            for v in rev[u]:
                if d[v] == math.inf:
                    d[v] = d[u] + 1
                    queue.append(v)
        return d

    def d(self, i: int, j: int) -> int:
        return self.dist[j][i]

    def _first_step(self, i: int, j: int) -> int:
        if i == j:
            return i
        want = self.d(i, j) - 1
        return min(k for k in self.neighbors[i] if k != i and self.d(k, j) == want)

    def p1(self, i: int, j: int) -> int:
        """Next cell on the canonical shortest path from ``i`` to ``j`` (smallest index wins)."""
        return self.next_hop[i][j]


def build_trip_pool(config: RideShareConfig, grid: Grid) -> tuple:
    """Seeded synthetic trips: hotspot-weighted origins, destinations within range."""
    rng = np.random.default_rng([config.pool_seed, 7056])
    n = config.n_cells
    hot = rng.choice(n, size=min(config.hotspots, n), replace=False)
    weights = np.ones(n)
    weights[hot] += 4.0
    weights /= weights.sum()
    dests = [[j for j in range(n) if 1 <= grid.d(i, j) <= config.max_trip_distance] for i in range(n)]
    if not any(dests):
        raise ConfigurationError("no origin-destination pair within max_trip_distance")
    n_pairs = sum(len(ds) for ds in dests)
    distinct = config.pool_size <= n_pairs // 2
    pool, seen = [], set()
    while len(pool) < config.pool_size:
        i = int(rng.choice(n, p=weights))
        if not dests[i]:
            continue
        trip = (i, int(dests[i][rng.integers(len(dests[i]))]))
        if distinct and trip in seen:
            continue
        seen.add(trip)
        pool.append(trip)
    return tuple(pool)


class RequestModel:
    """``|R| = min(Poisson(mu), r_max)`` trips drawn without replacement from the pool."""

    def __init__(self, config: RideShareConfig, pool: tuple):
        self.pool = pool
        self.mu = config.mean_requests
        self.cap = min(config.r_max, len(pool))
        n_sets = sum(math.comb(len(pool), k) for k in range(self.cap + 1))
        self.enumerable = n_sets <= ENUMERATION_LIMIT
        self._rows: Optional[list] = None

    def count_pmf(self) -> list[float]:
        if self.cap == 0:
            return [1.0]
        ks = np.arange(self.cap)
        pmf = list(stats.poisson.pmf(ks, self.mu)) + [float(stats.poisson.sf(self.cap - 1, self.mu))]
        return [float(p) for p in pmf]

    def sample(self, t: int, rng: np.random.Generator) -> tuple:
        if self.cap == 0:
            return ()
        k = min(int(rng.poisson(self.mu)), self.cap)
        idx = rng.choice(len(self.pool), size=k, replace=False)
        return tuple(sorted({self.pool[i] for i in idx.tolist()}))

    def enumerate(self, t: int) -> list:
        if not self.enumerable:
            raise ConfigurationError("request pool too large to enumerate")
        if self._rows is None:
            law: dict = {}
            for k, pk in enumerate(self.count_pmf()):
                share = pk / math.comb(len(self.pool), k)
                for idx in itertools.combinations(range(len(self.pool)), k):
                    key = tuple(sorted({self.pool[i] for i in idx}))
                    law[key] = law.get(key, 0.0) + share
            total = math.fsum(law.values())
            self._rows = [(key, p / total) for key, p in sorted(law.items())]
        return self._rows


@dataclass(frozen=True, eq=False)
class RideShareModel:
    config: RideShareConfig
    grid: Grid = field(init=False)
    pool: tuple = field(init=False)

    def __post_init__(self):
        grid = Grid(self.config.rows, self.config.cols, self.config.neighborhood)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "pool", build_trip_pool(self.config, grid))

    def actions(self, t: int, s: DriverState) -> tuple:
        if s.status[0] != 0:
            return (CONTINUE,)
        return self.grid.neighbors[s.loc] + s.requests

    def next_location(self, s: DriverState, a) -> int:
        kind = s.status[0]
        p1 = self.grid.p1
        if kind == 0:
            if isinstance(a, tuple):
                i, j = a
                if s.loc == i and not self.config.literal_status:
                    return p1(i, j)
                return p1(s.loc, i)
            return a
        if kind == 1:
            i, j = s.status[1]
            if s.loc == i and not self.config.literal_status:
                return p1(i, j)
            return p1(s.loc, i)
        return p1(s.loc, s.status[1])

    def next_status(self, s: DriverState, a, new_loc: int) -> tuple:
        kind = s.status[0]
        if kind == 0 and not isinstance(a, tuple):
            return IDLE
        if self.config.literal_status:
            j = a[1] if kind == 0 else (s.status[1][1] if kind == 1 else s.status[1])
            if kind == 2:
                return (2, j) if self.grid.d(s.loc, j) > 1 else IDLE
            trip = a if kind == 0 else s.status[1]
            return (1, trip) if self.grid.d(s.loc, j) > 1 else (2, j)
        trip = a if kind == 0 else (s.status[1] if kind == 1 else None)
        if trip is not None:
            i, j = trip
            if s.loc != i:
                return (1, trip)
            # pickup happened this step; heading to j now
            return IDLE if new_loc == j else (2, j)
        j = s.status[1]
        return IDLE if new_loc == j else (2, j)

    def check_action(self, s: DriverState, a) -> None:
        if a not in self.actions(0, s):
            raise ContractViolation(f"action {a!r} infeasible in {s!r}")

    def transition(self, s: DriverState, a, w: tuple) -> DriverState:
        loc = self.next_location(s, a)
        status = self.next_status(s, a, loc)
        return DriverState(loc, status, w if status[0] == 0 else ())

    def contribution(self, t: int, s: DriverState, a, w=None) -> float:
        cfg = self.config
        r = 0.0
        if s.status[0] == 0 and isinstance(a, tuple):
            r += cfg.w_base + cfg.w_dist * self.grid.d(*a)
        if self.next_location(s, a) != s.loc:
            r -= cfg.move_cost
        return r

    def initial_state(self) -> DriverState:
        cfg = self.config
        start = cfg.start if cfg.start is not None else (cfg.rows // 2) * cfg.cols + cfg.cols // 2
        reqs = tuple(sorted(set(self.pool[: min(cfg.r_max, len(self.pool))])))
        return DriverState(start, IDLE, reqs)

    def to_problem(self) -> ProblemDefinition:
        cfg = self.config
        requests = RequestModel(cfg, self.pool)
        bound = cfg.w_base + cfg.w_dist * cfg.max_trip_distance + cfg.move_cost
        return ProblemDefinition(
            horizon=cfg.horizon,
            initial_state=self.initial_state(),
            actions=self.actions,
            transition=self.transition,
            contribution=self.contribution,
            outcomes=requests,
            contribution_bound=bound,
            name="rideshare",
            metadata={"model": self, "config": cfg},
        )


def rideshare_transition(model: RideShareModel, state: DriverState, action, outcome: tuple) -> DriverState:
    model.check_action(state, action)
    return model.transition(state, action, outcome)


def rideshare_contribution(model: RideShareModel, state: DriverState, action) -> float:
    model.check_action(state, action)
    return model.contribution(0, state, action)


def generate_requests(config: RideShareConfig, t: int, rng: np.random.Generator,
                      model: Optional[RideShareModel] = None) -> tuple:
    model = model or RideShareModel(config)
    return RequestModel(config, model.pool).sample(t, rng)


DESK = dict(rows=5, cols=5, horizon=12, pool_size=8, max_trip_distance=4)
FULL = dict(rows=10, cols=10, horizon=40, pool_size=7056, max_trip_distance=8)


def build_instance(tag: str, desk_scale: bool = True, seed: int = 0,
                   **overrides) -> tuple[ProblemDefinition, RideShareConfig]:
    """Instances ``D5``, ``D10``, ``D15``; desk scale is a 5x5 grid with ``T = 12``."""
    if tag not in NEIGHBORHOODS:
        raise ConfigurationError(f"unknown instance tag {tag!r}")
    base = dict(DESK if desk_scale else FULL)
    base.update(neighborhood=NEIGHBORHOODS[tag], r_max=R_MAX[tag], pool_seed=seed)
    base.update(overrides)
    config = RideShareConfig(**base)
    problem = RideShareModel(config).to_problem()
    if desk_scale and not problem.enumerable:
        raise ConfigurationError(f"desk-scale {tag} request law is not enumerable")
    return replace(problem, name=f"rideshare-{tag}{'-desk' if desk_scale else ''}"), config
