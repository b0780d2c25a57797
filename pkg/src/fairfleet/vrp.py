"""Weighted-VRP solver layer.

Solves  argmax_schedule  w . x(schedule)  subject to per-vehicle budget,
deadline, and pickup/dropoff constraints, where x is the per-customer
throughput allocation.  Three entry points:

* exact_vrp       -- branch and bound over task sequences with an
                     admissible remaining-weight bound and dominance
                     pruning; provably optimal on small instances.
* heuristic_vrp   -- warm-start seeding, cheapest insertion by marginal
                     weighted gain per second, then 2-opt / relocate /
                     swap local search; never worse than its best seed.
* greedy_alpha_heuristic -- fairness-guided construction by greatest
                     return-on-investment, then a final packing pass.

Ties on the weighted objective are broken toward larger unweighted total
throughput.  All solvers are deterministic for a fixed (instance, weights,
seed, backend, time limit).
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .fairness import alpha_fair_utility, is_leximin
from .model import (
    Instance,
    Schedule,
    Task,
    TravelModel,
    Vehicle,
    allocation_of,
    build_path,
    empty_schedule,
    path_violation,
    travel_time,
)

logger = logging.getLogger(__name__)

# Weight ratio used to force inclusion of committed tasks during packing
# and replanning.
COMMIT_WEIGHT_RATIO = 1e6

# Local-search effort per configured solver second; the budget is derived
# numerically from time_limit so results never depend on wall-clock speed.
_EVALS_PER_SECOND = 60_000

_VALUE_TOL = 1e-9


@dataclass
class SolverConfig:
    """Backend selection and limits (config keys under `solver.`)."""

    backend: str = "auto"
    time_limit_s: float = 10.0
    seed: int = 0
    exact_task_limit: int = 10
    exact_vehicle_limit: int = 3
    parallel: bool = False

    def __post_init__(self) -> None:
        if self.backend not in ("exact", "heuristic", "auto"):
            raise ValueError(f"unknown solver backend {self.backend!r}")


@dataclass(frozen=True)
class SolverRequest:
    """One weighted-VRP instance.

    `weights` aligns with `customers` (canonical sorted order).  Negative
    weights are clamped to zero before solving.  `weight_overrides` maps a
    task_id to an absolute weight replacing its customer's; `pinned` maps
    a task_id to the only vehicle allowed to serve it.
    """

    tasks: tuple[Task, ...]
    vehicles: tuple[Vehicle, ...]
    travel: TravelModel
    budget: float
    customers: tuple[str, ...]
    weights: np.ndarray
    round_start: float = 0.0
    weight_overrides: Optional[dict[str, float]] = None
    pinned: Optional[dict[str, str]] = None
    warm_starts: tuple[Schedule, ...] = ()
    time_limit: float = 10.0
    seed: int = 0
    ride_counts_as: int = 1

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ValueError("budget must be > 0")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.customers),):
            raise ValueError("weights must align with customers")
        if np.any(w < 0):
            logger.warning("negative weights clamped to 0: %s", w)
            w = np.maximum(w, 0.0)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "vehicles", tuple(self.vehicles))


def _customer_index(req: SolverRequest) -> dict[str, int]:
    return {c: i for i, c in enumerate(req.customers)}


def _task_weight(req: SolverRequest, task: Task, cindex: dict[str, int]) -> float:
    if req.weight_overrides and task.task_id in req.weight_overrides:
        return float(req.weight_overrides[task.task_id])
    idx = cindex.get(task.customer_id)
    return float(req.weights[idx]) if idx is not None else 0.0


def _count_increment(task: Task, ride_counts_as: int) -> float:
    """Throughput count contributed by completing this task on a path."""
    if task.is_pickup:
        return 1.0 if ride_counts_as == 2 else 0.0
    if task.is_dropoff:
        return 1.0 if ride_counts_as == 2 else float(ride_counts_as)
    return 1.0


def _contribution(req: SolverRequest, task: Task, cindex: dict[str, int]) -> float:
    """Weighted objective gain of completing this task (w . x terms)."""
    minutes = req.budget / 60.0
    return _task_weight(req, task, cindex) * _count_increment(task, req.ride_counts_as) / minutes


def schedule_value(req: SolverRequest, schedule: Schedule) -> tuple[float, float]:
    """(weighted objective, unweighted total count) of a schedule."""
    cindex = _customer_index(req)
    value = 0.0
    count = 0.0
    for t in schedule.all_tasks():
        value += _contribution(req, t, cindex)
        count += _count_increment(t, req.ride_counts_as)
    return value, count


def _schedule_feasible(req: SolverRequest, schedule: Schedule) -> bool:
    by_vehicle = {v.vehicle_id: v for v in req.vehicles}
    for p in schedule.paths:
        v = by_vehicle.get(p.vehicle_id)
        if v is None:
            return False
        if path_violation(p.tasks, v, req.travel, req.budget, req.round_start):
            return False
    return True


# ---------------------------------------------------------------------------
# Exact branch and bound
# ---------------------------------------------------------------------------


class ExactSizeError(ValueError):
    """Instance exceeds the exact solver's size cutoff."""


def exact_vrp(
    req: SolverRequest,
    task_limit: int = 10,
    vehicle_limit: int = 3,
) -> Schedule:
    """Provably optimal weighted schedule by branch and bound.

    Branches append one task at a time to the current vehicle's path, in
    canonical task order.  Pruning: budget/deadline/pair feasibility, the
    admissible remaining-weight bound, and a dominance table keyed on
    (vehicle, served-set, last-task) keeping the earliest completion
    clock.  Ties on w . x resolve toward larger total task count, then
    first-found in canonical order.
    """
    if len(req.tasks) > task_limit or len(req.vehicles) > vehicle_limit:
        raise ExactSizeError(
            f"{len(req.tasks)} tasks / {len(req.vehicles)} vehicles exceed the "
            f"exact cutoff ({task_limit} tasks, {vehicle_limit} vehicles)"
        )

    tasks = sorted(req.tasks, key=lambda t: t.task_id)
    vehicles = list(req.vehicles)
    n = len(tasks)
    nv = len(vehicles)
    cindex = _customer_index(req)
    tindex = {t.task_id: i for i, t in enumerate(tasks)}
    contrib = [_contribution(req, t, cindex) for t in tasks]
    counts = [_count_increment(t, req.ride_counts_as) for t in tasks]
    pin: list[Optional[int]] = [None] * n
    if req.pinned:
        vid_index = {v.vehicle_id: i for i, v in enumerate(vehicles)}
        for tid, vid in req.pinned.items():
            if tid in tindex:
                pin[tindex[tid]] = vid_index.get(vid)

    # dropoff index -> its pickup index (same-path enforcement); pickup
    # index -> dropoff index (to derive open pairs).
    pickup_of_dropoff = [
        tindex.get(t.dropoff_of) if t.is_dropoff else None for t in tasks
    ]
    dropoff_of_pickup = [
        tindex.get(t.pickup_of) if t.is_pickup else None for t in tasks
    ]

    # Travel seconds: leg[v][i][j], from_start[v][i], to_home[v][i].
    leg = [
        [
            [travel_time(a.location, b.location, req.travel, v) for b in tasks]
            for a in tasks
        ]
        for v in vehicles
    ]
    from_start = [
        [travel_time(v.start_location, t.location, req.travel, v) for t in tasks]
        for v in vehicles
    ]
    to_home = [
        [travel_time(t.location, v.start_location, req.travel, v) for t in tasks]
        for v in vehicles
    ]

    total_contrib = sum(contrib)
    total_count = sum(counts)

    best = {
        "value": -np.inf,
        "count": -1.0,
        "paths": None,
    }
    seq_memo: dict[tuple[int, int, int], float] = {}
    closed_memo: set[tuple[int, int]] = set()

    budget_end = req.round_start + req.budget + 1e-9

    def leaf(value: float, count: float, paths: tuple) -> None:
        if value > best["value"] + _VALUE_TOL or (
            value > best["value"] - _VALUE_TOL and count > best["count"]
        ):
            best["value"] = value
            best["count"] = count
            best["paths"] = paths

    def remaining(mask: int) -> tuple[float, float]:
        rv = rc = 0.0
        for i in range(n):
            if not mask & (1 << i):
                rv += contrib[i]
                rc += counts[i]
        return rv, rc

    def close_ok(v: int, last: int, clock: float) -> bool:
        if last < 0:
            return True
        if vehicles[v].return_home:
            return clock + to_home[v][last] <= budget_end
        return True

    def search(
        v: int,
        mask: int,
        last: int,
        clock: float,
        value: float,
        count: float,
        open_pairs: int,
        paths: tuple,
        current: tuple,
    ) -> None:
        rem_v, rem_c = remaining(mask)
        if value + rem_v < best["value"] - _VALUE_TOL:
            return
        if value + rem_v < best["value"] + _VALUE_TOL and count + rem_c <= best["count"]:
            return

        # Close this vehicle and move on (or finish).
        if open_pairs == 0 and close_ok(v, last, clock):
            done = paths + (current,)
            if v + 1 == nv:
                leaf(value, count, done)
            elif (v + 1, mask) not in closed_memo:
                closed_memo.add((v + 1, mask))
                nxt = vehicles[v + 1]
                search(
                    v + 1, mask, -1,
                    req.round_start + nxt.ready_offset,
                    value, count, 0, done, (),
                )

        veh = vehicles[v]
        for i in range(n):
            bit = 1 << i
            if mask & bit:
                continue
            if pin[i] is not None and pin[i] != v:
                continue
            t = tasks[i]
            p = pickup_of_dropoff[i]
            if p is not None and not (open_pairs & (1 << p)):
                continue  # dropoff before its pickup on this vehicle
            if dropoff_of_pickup[i] is not None and bin(open_pairs).count("1") >= veh.capacity:
                continue
            hop = from_start[v][i] if last < 0 else leg[v][last][i]
            t_clock = clock + hop + t.service_time
            if t_clock > budget_end:
                continue
            if t.deadline is not None and t_clock > t.deadline + 1e-9:
                continue
            key = (v, mask | bit, i)
            prev_clock = seq_memo.get(key)
            if prev_clock is not None and prev_clock <= t_clock + 1e-12:
                continue
            seq_memo[key] = t_clock
            new_open = open_pairs
            if dropoff_of_pickup[i] is not None:
                new_open |= bit
            if p is not None:
                new_open &= ~(1 << p)
            search(
                v, mask | bit, i, t_clock,
                value + contrib[i], count + counts[i],
                new_open, paths, current + (i,),
            )

    if n and nv:
        v0 = vehicles[0]
        search(0, 0, -1, req.round_start + v0.ready_offset, 0.0, 0.0, 0, (), ())

    if best["paths"] is None:
        return empty_schedule(req.vehicles, req.budget)

    built = []
    for v, idxs in zip(vehicles, best["paths"]):
        built.append(
            build_path(v, [tasks[i] for i in idxs], req.travel, req.round_start)
        )
    return Schedule(paths=tuple(built), round_duration=req.budget)


# ---------------------------------------------------------------------------
# Insertion + local-search heuristic
# ---------------------------------------------------------------------------


class _PathState:
    """Mutable task sequence for one vehicle during heuristic search."""

    __slots__ = ("vehicle", "tasks", "cost")

    def __init__(self, vehicle: Vehicle, tasks: list[Task], travel: TravelModel):
        self.vehicle = vehicle
        self.tasks = tasks
        self.cost = self._compute_cost(travel)

    def _compute_cost(self, travel: TravelModel) -> float:
        cost = 0.0
        loc = self.vehicle.start_location
        for t in self.tasks:
            cost += travel_time(loc, t.location, travel, self.vehicle) + t.service_time
            loc = t.location
        if self.vehicle.return_home and self.tasks:
            cost += travel_time(loc, self.vehicle.start_location, travel, self.vehicle)
        return cost

    def refresh(self, travel: TravelModel) -> None:
        self.cost = self._compute_cost(travel)


class _Heuristic:
    def __init__(self, req: SolverRequest):
        self.req = req
        self.cindex = _customer_index(req)
        self.rng = random.Random(req.seed)
        self.evals = max(10_000, int(req.time_limit * _EVALS_PER_SECOND))
        self.budget_slack = {
            v.vehicle_id: req.budget - v.ready_offset for v in req.vehicles
        }
        self.has_deadlines = any(t.deadline is not None for t in req.tasks)
        # A dropoff is represented by its pair; only pickups and plain
        # tasks are direct insertion candidates.
        self.by_id = {t.task_id: t for t in req.tasks}

    # -- geometry helpers ---------------------------------------------------

    def _dist(self, a, b, vehicle: Vehicle) -> float:
        return travel_time(a, b, self.req.travel, vehicle)

    def _pin_allows(self, task: Task, vehicle: Vehicle) -> bool:
        if not self.req.pinned:
            return True
        want = self.req.pinned.get(task.task_id)
        return want is None or want == vehicle.vehicle_id

    def _feasible(self, state: _PathState, tasks: list[Task]) -> bool:
        return (
            path_violation(
                tasks, state.vehicle, self.req.travel, self.req.budget,
                self.req.round_start,
            )
            is None
        )

    # -- seeding ------------------------------------------------------------

    def _sanitize_seed(self, schedule: Schedule) -> dict[str, list[Task]]:
        """Seed paths filtered to live tasks, pin-respecting, whole pairs."""
        live = {t.task_id: t for t in self.req.tasks}
        out: dict[str, list[Task]] = {v.vehicle_id: [] for v in self.req.vehicles}
        vmap = {v.vehicle_id: v for v in self.req.vehicles}
        for p in schedule.paths:
            if p.vehicle_id not in out:
                continue
            veh = vmap[p.vehicle_id]
            kept = [
                live[t.task_id]
                for t in p.tasks
                if t.task_id in live and self._pin_allows(live[t.task_id], veh)
            ]
            ids = {t.task_id for t in kept}
            kept = [t for t in kept if t.pair_id is None or t.pair_id in ids]
            out[p.vehicle_id] = kept
        return out

    def _seed_states(self) -> tuple[list[_PathState], float, float]:
        seeds: list[Schedule] = list(self.req.warm_starts)
        best_paths: Optional[dict[str, list[Task]]] = None
        best_key = (-np.inf, -np.inf, 0)
        for order, s in enumerate(seeds):
            paths = self._sanitize_seed(s)
            sched = self._to_schedule(paths)
            if not _schedule_feasible(self.req, sched):
                continue
            value, count = schedule_value(self.req, sched)
            key = (value, count, -order)
            if key > best_key:
                best_key = key
                best_paths = paths
        if best_paths is None:
            best_paths = {v.vehicle_id: [] for v in self.req.vehicles}
        states = [
            _PathState(v, best_paths[v.vehicle_id], self.req.travel)
            for v in self.req.vehicles
        ]
        sched = self._to_schedule({s.vehicle.vehicle_id: s.tasks for s in states})
        value, count = schedule_value(self.req, sched)
        return states, value, count

    def _to_schedule(self, paths: dict[str, list[Task]]) -> Schedule:
        built = tuple(
            build_path(v, paths.get(v.vehicle_id, []), self.req.travel, self.req.round_start)
            for v in self.req.vehicles
        )
        return Schedule(paths=built, round_duration=self.req.budget)

    # -- insertion ----------------------------------------------------------

    def _insertion_candidates(self, state: _PathState, unscheduled: list[Task]):
        """Best (delta, position) per unscheduled plain/pickup task for one
        path, vectorized; returns list aligned with `unscheduled`."""
        req = self.req
        veh = state.vehicle
        seq = state.tasks
        m = len(seq)
        slack = self.budget_slack[veh.vehicle_id] - state.cost
        if slack <= 0:
            return [None] * len(unscheduled)

        prev_pts = [veh.start_location] + [t.location for t in seq]
        if veh.return_home:
            next_pts = [t.location for t in seq] + [veh.start_location]
        else:
            next_pts = [t.location for t in seq] + [None]

        prev_arr = np.array(prev_pts, dtype=float)
        base_legs = np.zeros(m + 1)
        for i in range(m + 1):
            if next_pts[i] is not None:
                base_legs[i] = self._dist(prev_pts[i], next_pts[i], veh)

        results = []
        if not unscheduled:
            return results
        cand_pts = np.array([t.location for t in unscheduled], dtype=float)
        if req.travel.variant == "euclidean":
            d_prev = np.hypot(
                cand_pts[:, None, 0] - prev_arr[None, :, 0],
                cand_pts[:, None, 1] - prev_arr[None, :, 1],
            ) / veh.speed
            d_next = np.zeros((len(unscheduled), m + 1))
            for i in range(m + 1):
                if next_pts[i] is not None:
                    nxt = np.asarray(next_pts[i])
                    d_next[:, i] = np.hypot(
                        cand_pts[:, 0] - nxt[0], cand_pts[:, 1] - nxt[1]
                    ) / veh.speed
        else:
            lut = req.travel
            cand_idx = [lut._lookup(t.location) for t in unscheduled]
            prev_idx = [lut._lookup(p) for p in prev_pts]
            d_prev = lut.seconds[np.ix_(cand_idx, prev_idx)]
            d_next = np.zeros((len(unscheduled), m + 1))
            for i in range(m + 1):
                if next_pts[i] is not None:
                    ni = lut._lookup(next_pts[i])
                    d_next[:, i] = lut.seconds[cand_idx, ni]

        svc = np.array([t.service_time for t in unscheduled])
        delta = d_prev + d_next - base_legs[None, :] + svc[:, None]

        for u_i, task in enumerate(unscheduled):
            if not self._pin_allows(task, veh):
                results.append(None)
                continue
            row = delta[u_i]
            feas = row <= slack + 1e-9
            if not np.any(feas):
                results.append(None)
                continue
            pos = int(np.argmin(np.where(feas, row, np.inf)))
            results.append((float(row[pos]), pos))
        return results

    def _verify_insert(
        self, state: _PathState, task: Task, pos: int
    ) -> Optional[list[Task]]:
        trial = state.tasks[:pos] + [task] + state.tasks[pos:]
        if self.has_deadlines or task.deadline is not None:
            if not self._feasible(state, trial):
                return None
        return trial

    def _try_insert_pair(
        self, state: _PathState, pickup: Task, dropoff: Task
    ) -> Optional[tuple[float, list[Task]]]:
        """Cheapest feasible (pickup, dropoff) placement on this path."""
        if not (self._pin_allows(pickup, state.vehicle) and self._pin_allows(dropoff, state.vehicle)):
            return None
        seq = state.tasks
        best: Optional[tuple[float, list[Task]]] = None
        slack = self.budget_slack[state.vehicle.vehicle_id] - state.cost
        for i in range(len(seq) + 1):
            for j in range(i, len(seq) + 1):
                trial = seq[:i] + [pickup] + seq[i:j] + [dropoff] + seq[j:]
                cost = _PathState(state.vehicle, trial, self.req.travel).cost
                delta = cost - state.cost
                if delta > slack + 1e-9:
                    continue
                if not self._feasible(state, trial):
                    continue
                if best is None or delta < best[0] - 1e-12:
                    best = (delta, trial)
        return best

    def _insertion_phase(self, states: list[_PathState], unscheduled: dict[str, Task]) -> tuple[float, float]:
        """Insert tasks until nothing fits; returns (value, count) gained."""
        req = self.req
        gained_v = gained_c = 0.0
        singles = lambda: sorted(
            (t for t in unscheduled.values() if not t.is_dropoff),
            key=lambda t: t.task_id,
        )
        cache: dict[int, list] = {}
        order: list[Task] = singles()
        while True:
            cand_list = [t for t in order if t.task_id in unscheduled]
            if not cand_list:
                break
            best_choice = None  # (density, -delta, tid) maximized
            for s_i, state in enumerate(states):
                if s_i not in cache:
                    plain = [t for t in cand_list if not t.is_pickup]
                    cache[s_i] = (plain, self._insertion_candidates(state, plain))
                plain, res = cache[s_i]
                for t, r in zip(plain, res):
                    if r is None or t.task_id not in unscheduled:
                        continue
                    delta, pos = r
                    gain = _contribution(req, t, self.cindex)
                    density = gain / max(delta, 1e-9)
                    key = (gain > 0, density if gain > 0 else -delta, -delta, t.task_id)
                    choice = (key, s_i, t, pos, delta, None)
                    if best_choice is None or key > best_choice[0]:
                        best_choice = choice
                for t in cand_list:
                    if not t.is_pickup or t.task_id not in unscheduled:
                        continue
                    drop = self.by_id.get(t.pickup_of)
                    if drop is None or drop.task_id not in unscheduled:
                        continue
                    pres = self._try_insert_pair(state, t, drop)
                    if pres is None:
                        continue
                    delta, trial = pres
                    gain = _contribution(req, t, self.cindex) + _contribution(
                        req, drop, self.cindex
                    )
                    density = gain / max(delta, 1e-9)
                    key = (gain > 0, density if gain > 0 else -delta, -delta, t.task_id)
                    if best_choice is None or key > best_choice[0]:
                        best_choice = (key, s_i, t, None, delta, trial)
            if best_choice is None:
                break
            _, s_i, task, pos, delta, trial = best_choice
            state = states[s_i]
            if trial is None:
                trial = self._verify_insert(state, task, pos)
                if trial is None:
                    # deadline push-forward made this placement invalid;
                    # drop the candidate from this round of insertion
                    cache.pop(s_i, None)
                    unscheduled.pop(task.task_id)
                    continue
                inserted = [task]
            else:
                inserted = [task, self.by_id[task.pickup_of]]
            state.tasks = trial
            state.refresh(req.travel)
            for t in inserted:
                unscheduled.pop(t.task_id, None)
                gained_v += _contribution(req, t, self.cindex)
                gained_c += _count_increment(t, req.ride_counts_as)
            cache.pop(s_i, None)
            self.evals -= len(cand_list)
            if self.evals <= 0:
                break
        return gained_v, gained_c

    # -- local search -------------------------------------------------------

    def _two_opt_pass(self, state: _PathState) -> bool:
        """First-improvement segment reversal; cost-only (membership fixed)."""
        seq = state.tasks
        m = len(seq)
        if m < 3 or any(t.pair_id is not None for t in seq):
            return False
        idx = list(range(m - 1))
        self.rng.shuffle(idx)
        for i in idx:
            for j in range(i + 2, m):
                self.evals -= 1
                if self.evals <= 0:
                    return False
                trial = seq[:i] + list(reversed(seq[i:j + 1])) + seq[j + 1:]
                cost = _PathState(state.vehicle, trial, self.req.travel).cost
                if cost < state.cost - 1e-9 and self._feasible(state, trial):
                    state.tasks = trial
                    state.cost = cost
                    return True
        return False

    def _relocate_pass(self, states: list[_PathState]) -> bool:
        """Move one plain task to the cheapest position anywhere."""
        order = [
            (s_i, t_i)
            for s_i, s in enumerate(states)
            for t_i, t in enumerate(s.tasks)
            if t.pair_id is None
        ]
        self.rng.shuffle(order)
        for s_i, t_i in order:
            src = states[s_i]
            task = src.tasks[t_i]
            removed = src.tasks[:t_i] + src.tasks[t_i + 1:]
            removed_cost = _PathState(src.vehicle, removed, self.req.travel).cost
            for d_i, dst in enumerate(states):
                if not self._pin_allows(task, dst.vehicle):
                    continue
                base = removed if d_i == s_i else dst.tasks
                base_cost = removed_cost if d_i == s_i else dst.cost
                # cheapest position by direct scan (paths are short here)
                best = None
                for pos in range(len(base) + 1):
                    self.evals -= 1
                    if self.evals <= 0:
                        return False
                    trial = base[:pos] + [task] + base[pos:]
                    cost = _PathState(dst.vehicle, trial, self.req.travel).cost
                    delta = cost - base_cost
                    if best is None or delta < best[0] - 1e-12:
                        best = (delta, pos, trial, cost)
                if best is None:
                    continue
                old_total = src.cost + (0.0 if d_i == s_i else dst.cost)
                new_total = (removed_cost if d_i != s_i else 0.0) + best[3]
                if d_i == s_i:
                    new_total = best[3]
                if new_total < old_total - 1e-9:
                    trial = best[2]
                    if self.budget_slack[dst.vehicle.vehicle_id] < _PathState(
                        dst.vehicle, trial, self.req.travel
                    ).cost - 1e-9:
                        continue
                    if not self._feasible(dst, trial):
                        continue
                    if d_i == s_i:
                        src.tasks = trial
                        src.refresh(self.req.travel)
                    else:
                        src.tasks = list(removed)
                        src.refresh(self.req.travel)
                        dst.tasks = trial
                        dst.refresh(self.req.travel)
                    return True
        return False

    def _swap_pass(self, states: list[_PathState]) -> bool:
        """Exchange two plain tasks across paths when it lowers total cost."""
        pairs = []
        for a_i in range(len(states)):
            for b_i in range(a_i + 1, len(states)):
                pairs.append((a_i, b_i))
        self.rng.shuffle(pairs)
        for a_i, b_i in pairs:
            a, b = states[a_i], states[b_i]
            for i, ta in enumerate(a.tasks):
                if ta.pair_id is not None or not self._pin_allows(ta, b.vehicle):
                    continue
                for j, tb in enumerate(b.tasks):
                    if tb.pair_id is not None or not self._pin_allows(tb, a.vehicle):
                        continue
                    self.evals -= 1
                    if self.evals <= 0:
                        return False
                    ta_seq = a.tasks[:i] + [tb] + a.tasks[i + 1:]
                    tb_seq = b.tasks[:j] + [ta] + b.tasks[j + 1:]
                    ca = _PathState(a.vehicle, ta_seq, self.req.travel).cost
                    cb = _PathState(b.vehicle, tb_seq, self.req.travel).cost
                    if ca + cb < a.cost + b.cost - 1e-9:
                        if ca > self.budget_slack[a.vehicle.vehicle_id] + 1e-9:
                            continue
                        if cb > self.budget_slack[b.vehicle.vehicle_id] + 1e-9:
                            continue
                        if not (self._feasible(a, ta_seq) and self._feasible(b, tb_seq)):
                            continue
                        a.tasks, b.tasks = ta_seq, tb_seq
                        a.refresh(self.req.travel)
                        b.refresh(self.req.travel)
                        return True
        return False

    # -- main loop ----------------------------------------------------------

    def _insert_all(self, states: list[_PathState]) -> None:
        scheduled = {t.task_id for s in states for t in s.tasks}
        remaining = {
            t.task_id: t for t in self.req.tasks if t.task_id not in scheduled
        }
        if remaining:
            self._insertion_phase(states, remaining)

    def _improve(self, states: list[_PathState]) -> Schedule:
        self._insert_all(states)
        while self.evals > 0:
            improved = False
            for s in states:
                if self._two_opt_pass(s):
                    improved = True
            if self._relocate_pass(states):
                improved = True
            if self._swap_pass(states):
                improved = True
            if not improved:
                break
            self._insert_all(states)
        return self._to_schedule({s.vehicle.vehicle_id: s.tasks for s in states})

    def run(self) -> Schedule:
        # Insertion from scratch escapes seeds whose zero-gain tasks
        # crowd out profitable ones; the seeded run keeps the guarantee
        # of never finishing below the best warm start.
        starts = [[_PathState(v, [], self.req.travel) for v in self.req.vehicles]]
        seeded, seed_value, _ = self._seed_states()
        if any(s.tasks for s in seeded):
            starts.append(seeded)
        best: Optional[tuple[tuple[float, float], Schedule]] = None
        for states in starts:
            sched = self._improve(states)
            key = schedule_value(self.req, sched)
            if best is None or key > best[0]:
                best = (key, sched)
        return best[1]


def heuristic_vrp(req: SolverRequest) -> Schedule:
    """Warm-started insertion + local search; never worse than its best
    warm start on the weighted objective."""
    return _Heuristic(req).run()


# ---------------------------------------------------------------------------
# Greedy fairness-guided construction
# ---------------------------------------------------------------------------


def greedy_alpha_heuristic(
    tasks: Sequence[Task],
    vehicles: Sequence[Vehicle],
    budget: float,
    alpha: float,
    travel: TravelModel,
    round_start: float = 0.0,
    ride_counts_as: int = 1,
    customers: Optional[Sequence[str]] = None,
    pack: bool = True,
    seed: int = 0,
) -> Schedule:
    """Fairness-guided construction: each vehicle repeatedly appends the
    feasible task with greatest return-on-investment

        R(l) = (U_alpha(x after l) - U_alpha(x)) / travel cost to l,

    where x counts fulfilled tasks per customer over the budget.  In
    max-min mode the pick is the worst-off customer's cheapest task.  A
    final packing pass re-solves with very high weight on the selected
    tasks to fill leftover capacity.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if customers is None:
        customers = sorted({t.customer_id for t in tasks})
    customers = tuple(customers)
    cindex = {c: i for i, c in enumerate(customers)}
    minutes = budget / 60.0

    by_id = {t.task_id: t for t in tasks}
    unserved = dict(sorted(by_id.items()))
    h = np.zeros(len(customers))
    paths: dict[str, list[Task]] = {v.vehicle_id: [] for v in vehicles}
    active = sorted(vehicles, key=lambda v: v.vehicle_id)

    def candidates_for(veh: Vehicle) -> list[tuple[Task, Optional[Task], float]]:
        seq = paths[veh.vehicle_id]
        last_loc = seq[-1].location if seq else veh.start_location
        out = []
        for t in unserved.values():
            if t.is_dropoff:
                continue
            extra: Optional[Task] = None
            if t.is_pickup:
                extra = by_id.get(t.pickup_of)
                if extra is None or extra.task_id not in unserved:
                    continue
            cost = travel_time(last_loc, t.location, travel, veh)
            if extra is not None:
                cost += travel_time(t.location, extra.location, travel, veh)
            trial = seq + [t] + ([extra] if extra is not None else [])
            if path_violation(trial, veh, travel, budget, round_start) is not None:
                continue
            out.append((t, extra, cost))
        return out

    while active:
        still = []
        for veh in active:
            cands = candidates_for(veh)
            if not cands:
                continue
            best = None
            for t, extra, cost in cands:
                k = cindex[t.customer_id]
                inc = _count_increment(t, ride_counts_as) + (
                    _count_increment(extra, ride_counts_as) if extra is not None else 0.0
                )
                if is_leximin(alpha):
                    key = (-h[k], -cost)
                else:
                    x_new = h.copy()
                    x_new[k] += inc
                    du = alpha_fair_utility(x_new / minutes, alpha) - alpha_fair_utility(
                        h / minutes, alpha
                    )
                    key = (du / max(cost, 1e-9), -cost)
                if best is None or key > best[0]:
                    best = (key, t, extra, inc)
            if best is None:
                continue
            _, t, extra, inc = best
            paths[veh.vehicle_id].append(t)
            unserved.pop(t.task_id)
            if extra is not None:
                paths[veh.vehicle_id].append(extra)
                unserved.pop(extra.task_id)
            h[cindex[t.customer_id]] += inc
            still.append(veh)
        active = still

    built = tuple(
        build_path(v, paths[v.vehicle_id], travel, round_start) for v in vehicles
    )
    schedule = Schedule(paths=built, round_duration=budget)
    if not pack:
        return schedule

    committed = {t.task_id for p in built for t in p.tasks}
    overrides = {tid: COMMIT_WEIGHT_RATIO for tid in committed}
    req = SolverRequest(
        tasks=tuple(tasks),
        vehicles=tuple(vehicles),
        travel=travel,
        budget=budget,
        customers=customers,
        weights=np.ones(len(customers)),
        round_start=round_start,
        weight_overrides=overrides,
        warm_starts=(schedule,),
        time_limit=1.0,
        seed=seed,
        ride_counts_as=ride_counts_as,
    )
    return heuristic_vrp(req)


# ---------------------------------------------------------------------------
# Warm starts
# ---------------------------------------------------------------------------


def build_warm_start_suite(instance: Instance, alpha: float, seed: int = 0) -> list[Schedule]:
    """Constructive schedules: max-throughput insertion, a dedicated
    vehicle partition (omitted when |V| < |K|), and the fairness-guided
    greedy construction."""
    customers = instance.customers
    suite: list[Schedule] = []
    base = SolverRequest(
        tasks=instance.tasks,
        vehicles=instance.vehicles,
        travel=instance.travel,
        budget=instance.budget,
        customers=customers,
        weights=np.ones(max(len(customers), 1)),
        round_start=instance.round_start,
        time_limit=0.5,
        seed=seed,
    )
    suite.append(heuristic_vrp(base))

    if len(instance.vehicles) >= len(customers) and customers:
        groups: dict[str, list[Vehicle]] = {c: [] for c in customers}
        for i, v in enumerate(instance.vehicles):
            groups[customers[i % len(customers)]].append(v)
        paths = []
        for cust in customers:
            own = tuple(t for t in instance.tasks if t.customer_id == cust)
            sub = replace(base, tasks=own, vehicles=tuple(groups[cust]))
            paths.extend(heuristic_vrp(sub).paths)
        suite.append(Schedule(paths=tuple(paths), round_duration=instance.budget))

    suite.append(
        greedy_alpha_heuristic(
            instance.tasks,
            instance.vehicles,
            instance.budget,
            alpha,
            instance.travel,
            instance.round_start,
            customers=customers,
            seed=seed,
        )
    )
    return suite


def select_warm_start(
    suite: Sequence[Schedule],
    w: np.ndarray,
    customers: Sequence[str],
    ride_counts_as: int = 1,
) -> Schedule:
    """Suite member with highest weighted throughput; earliest wins ties."""
    if not suite:
        raise ValueError("warm-start suite is empty")
    best = None
    best_val = -np.inf
    for s in suite:
        val = float(np.dot(w, allocation_of(s, customers, ride_counts_as)))
        if val > best_val + 1e-12:
            best_val = val
            best = s
    return best


# ---------------------------------------------------------------------------
# Backend dispatch and the counting facade
# ---------------------------------------------------------------------------


def solve_weighted_vrp(req: SolverRequest, config: Optional[SolverConfig] = None) -> Schedule:
    """Dispatch to the configured backend (`auto` = exact iff within the
    exact cutoff, else heuristic)."""
    config = config or SolverConfig()
    if config.backend == "exact":
        return exact_vrp(req, config.exact_task_limit, config.exact_vehicle_limit)
    if config.backend == "heuristic":
        return heuristic_vrp(req)
    if (
        len(req.tasks) <= config.exact_task_limit
        and len(req.vehicles) <= config.exact_vehicle_limit
    ):
        return exact_vrp(req, config.exact_task_limit, config.exact_vehicle_limit)
    return heuristic_vrp(req)


class RoundSolver:
    """Per-round solver facade: counts calls, caches every result into the
    warm-start suite, and applies commitment overrides/pins to each call.

    The cache supports concurrent insert/snapshot (last-writer-wins); the
    call counter verifies the |K| + stages budget per round.
    """

    def __init__(
        self,
        instance: Instance,
        config: Optional[SolverConfig] = None,
        alpha: float = 1.0,
        weight_overrides: Optional[dict[str, float]] = None,
        pinned: Optional[dict[str, str]] = None,
        ride_counts_as: int = 1,
        customers: Optional[Sequence[str]] = None,
    ):
        import threading

        self.instance = instance
        self.config = config or SolverConfig()
        self.alpha = alpha
        self.weight_overrides = dict(weight_overrides or {})
        self.pinned = dict(pinned or {})
        self.ride_counts_as = ride_counts_as
        self.customers = tuple(customers) if customers is not None else instance.customers
        self.calls = 0
        self._lock = threading.Lock()
        self._cache: list[Schedule] = []
        needs_suite = self.config.backend == "heuristic" or (
            self.config.backend == "auto"
            and (
                len(instance.tasks) > self.config.exact_task_limit
                or len(instance.vehicles) > self.config.exact_vehicle_limit
            )
        )
        if needs_suite:
            for s in build_warm_start_suite(instance, alpha, self.config.seed):
                self.cache_insert(s)

    def cache_insert(self, schedule: Schedule) -> None:
        with self._lock:
            self._cache.append(schedule)

    def cache_snapshot(self) -> tuple[Schedule, ...]:
        with self._lock:
            return tuple(self._cache)

    @property
    def suite_size(self) -> int:
        return len(self._cache)

    def solve(self, weights: np.ndarray) -> tuple[np.ndarray, Schedule]:
        """One counted weighted-VRP call; returns (allocation, schedule)."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            logger.warning("clamping negative face weights to 0: %s", w)
            w = np.maximum(w, 0.0)
        total = w.sum()
        if total > 0:
            w = w / total
        req = SolverRequest(
            tasks=self.instance.tasks,
            vehicles=self.instance.vehicles,
            travel=self.instance.travel,
            budget=self.instance.budget,
            customers=self.customers,
            weights=w,
            round_start=self.instance.round_start,
            weight_overrides=self.weight_overrides or None,
            pinned=self.pinned or None,
            warm_starts=self.cache_snapshot(),
            time_limit=self.config.time_limit_s,
            seed=self.config.seed,
            ride_counts_as=self.ride_counts_as,
        )
        schedule = solve_weighted_vrp(req, self.config)
        with self._lock:
            self.calls += 1
        self.cache_insert(schedule)
        allocation = allocation_of(schedule, self.customers, self.ride_counts_as)
        return allocation, schedule
