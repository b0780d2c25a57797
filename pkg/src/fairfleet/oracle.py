"""Brute-force ground truth for small instances.

Enumerates every feasible allocation by trying all task subsets,
vehicle assignments, and visit orders; derives the Pareto frontier and
the convex-boundary corners from the enumeration.  Capped at 8 tasks
and 2 vehicles; used by tests and the `oracle` CLI command.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .model import (
    Instance,
    Schedule,
    Task,
    Vehicle,
    allocation_of,
    build_path,
    travel_time,
)

ORACLE_TASK_CAP = 8
ORACLE_VEHICLE_CAP = 2
_DEDUP_DECIMALS = 9


@dataclass(frozen=True)
class FeasibleSet:
    """All distinct feasible allocations with one witness schedule each."""

    entries: tuple[tuple[np.ndarray, Schedule], ...]
    customers: tuple[str, ...]

    def allocations(self) -> list[np.ndarray]:
        return [a for a, _ in self.entries]


def _vehicle_feasible_orders(
    vehicle: Vehicle,
    tasks: Sequence[Task],
    instance: Instance,
) -> dict[frozenset, tuple[int, ...]]:
    """Every servable task subset for one vehicle, with the first
    feasible visit order found as witness.  Pairs must close on the
    path; the return leg must fit when the vehicle returns home."""
    n = len(tasks)
    travel = instance.travel
    budget_end = instance.round_start + instance.budget + 1e-9
    tindex = {t.task_id: i for i, t in enumerate(tasks)}
    pickup_of_dropoff = [
        tindex.get(t.dropoff_of) if t.is_dropoff else None for t in tasks
    ]
    is_pickup = [t.is_pickup for t in tasks]

    out: dict[frozenset, tuple[int, ...]] = {frozenset(): ()}

    def closable(last: int, clock: float) -> bool:
        if last < 0 or not vehicle.return_home:
            return True
        back = travel_time(tasks[last].location, vehicle.start_location, travel, vehicle)
        return clock + back <= budget_end

    def dfs(mask: int, last: int, clock: float, open_set: frozenset, seq: tuple):
        for i in range(n):
            if mask & (1 << i):
                continue
            t = tasks[i]
            p = pickup_of_dropoff[i]
            if p is not None and p not in open_set:
                continue
            if is_pickup[i] and len(open_set) >= vehicle.capacity:
                continue
            origin = tasks[last].location if last >= 0 else vehicle.start_location
            hop = travel_time(origin, t.location, travel, vehicle)
            t_clock = clock + hop + t.service_time
            if t_clock > budget_end:
                continue
            if t.deadline is not None and t_clock > t.deadline + 1e-9:
                continue
            new_open = open_set
            if is_pickup[i]:
                new_open = new_open | {i}
            if p is not None:
                new_open = new_open - {p}
            new_seq = seq + (i,)
            if not new_open and closable(i, t_clock):
                key = frozenset(new_seq)
                if key not in out:
                    out[key] = new_seq
            dfs(mask | (1 << i), i, t_clock, new_open, new_seq)

    start_clock = instance.round_start + vehicle.ready_offset
    dfs(0, -1, start_clock, frozenset(), ())
    return out


def enumerate_feasible_allocations(instance: Instance) -> FeasibleSet:
    """All distinct feasible allocations of the instance.

    Tries every subset of tasks, every split across vehicles, and every
    visit order; deduplicates allocations to 1e-9.  Refuses instances
    above the hard cap (8 tasks, 2 vehicles).
    """
    if len(instance.tasks) > ORACLE_TASK_CAP:
        raise ValueError(
            f"{len(instance.tasks)} tasks exceed the oracle cap ({ORACLE_TASK_CAP})"
        )
    if len(instance.vehicles) > ORACLE_VEHICLE_CAP:
        raise ValueError(
            f"{len(instance.vehicles)} vehicles exceed the oracle cap ({ORACLE_VEHICLE_CAP})"
        )
    customers = instance.customers
    tasks = sorted(instance.tasks, key=lambda t: t.task_id)
    vehicles = list(instance.vehicles)

    per_vehicle = [_vehicle_feasible_orders(v, tasks, instance) for v in vehicles]

    seen: dict[tuple, tuple[np.ndarray, Schedule]] = {}

    def record(orders: Sequence[tuple[int, ...]]) -> None:
        paths = tuple(
            build_path(v, [tasks[i] for i in order], instance.travel, instance.round_start)
            for v, order in zip(vehicles, orders)
        )
        schedule = Schedule(paths=paths, round_duration=instance.budget)
        alloc = allocation_of(schedule, customers)
        key = tuple(np.round(alloc, _DEDUP_DECIMALS))
        if key not in seen:
            seen[key] = (alloc, schedule)

    if len(vehicles) == 1:
        for key in sorted(per_vehicle[0], key=lambda s: sorted(s)):
            record([per_vehicle[0][key]])
    else:
        keys0 = sorted(per_vehicle[0], key=lambda s: sorted(s))
        keys1 = sorted(per_vehicle[1], key=lambda s: sorted(s))
        for k0 in keys0:
            for k1 in keys1:
                if k0 & k1:
                    continue
                record([per_vehicle[0][k0], per_vehicle[1][k1]])

    entries = tuple(seen[k] for k in sorted(seen))
    return FeasibleSet(entries=entries, customers=customers)


def _weakly_dominated(a: np.ndarray, others: Sequence[np.ndarray]) -> bool:
    for b in others:
        if np.all(b >= a - 1e-12) and np.any(b > a + 1e-12):
            return True
    return False


def pareto_frontier(fs: FeasibleSet) -> FeasibleSet:
    """Feasible allocations not dominated by any other (componentwise >=
    everywhere and > somewhere)."""
    allocs = fs.allocations()
    kept = tuple(
        (a, s)
        for a, s in fs.entries
        if not _weakly_dominated(a, [b for b in allocs if b is not a])
    )
    return FeasibleSet(entries=kept, customers=fs.customers)


def _is_vertex(p: np.ndarray, others: Sequence[np.ndarray]) -> bool:
    """True iff p is outside the convex hull of the other points."""
    if not others:
        return True
    a_eq = np.vstack([np.stack(others, axis=1), np.ones(len(others))])
    b_eq = np.append(p, 1.0)
    res = linprog(
        c=np.zeros(len(others)),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * len(others),
        method="highs",
    )
    return not res.success


def _nonneg_supported(p: np.ndarray, others: Sequence[np.ndarray]) -> bool:
    """True iff some nonnegative weight vector attains its maximum over
    the set at p (p lies on a face with nonnegative outward normal)."""
    if not others:
        return True
    k = len(p)
    # variables: w (k), margin e; maximize e subject to w.(p - q) >= e,
    # sum w = 1, w >= 0
    a_ub = []
    for q in others:
        a_ub.append(np.append(-(p - q), 1.0))
    a_ub = np.array(a_ub)
    b_ub = np.zeros(len(others))
    a_eq = np.array([np.append(np.ones(k), 0.0)])
    b_eq = np.array([1.0])
    c = np.append(np.zeros(k), -1.0)
    bounds = [(0, None)] * k + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        return False
    return float(res.x[-1]) >= -1e-9


def convex_boundary(fs: FeasibleSet) -> list[np.ndarray]:
    """Corners of the feasible set's upper convex boundary: hull
    vertices supported by a nonnegative normal and not weakly dominated,
    in lexicographic order."""
    allocs = fs.allocations()
    corners = []
    for i, p in enumerate(allocs):
        others = [q for j, q in enumerate(allocs) if j != i]
        if _weakly_dominated(p, others):
            continue
        if not _is_vertex(p, others):
            continue
        if not _nonneg_supported(p, others):
            continue
        corners.append(p)
    corners.sort(key=lambda p: tuple(np.round(p, _DEDUP_DECIMALS)))
    return corners


def oracle_report(instance: Instance) -> dict:
    """JSON-ready payload for the `oracle` CLI command."""
    fs = enumerate_feasible_allocations(instance)
    pareto = pareto_frontier(fs)
    corners = convex_boundary(fs)
    return {
        "customers": list(fs.customers),
        "feasible": [[float(v) for v in a] for a in fs.allocations()],
        "pareto": [[float(v) for v in a] for a in pareto.allocations()],
        "boundary_corners": [[float(v) for v in c] for c in corners],
    }
