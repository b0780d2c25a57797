"""Trace-driven emulation: stream timestamped tasks to a policy,
advance vehicle motion along committed paths, expire unscheduled tasks,
and report throughput/fairness metrics.  Ships the three baseline
policies alongside the fairness-aware one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .fairness import jain_index
from .model import (
    Instance,
    Point,
    Schedule,
    Task,
    TravelModel,
    Vehicle,
    build_path,
    empty_schedule,
    path_violation,
    travel_time,
)
from .scheduler import RoundConfig, Scheduler
from .vrp import COMMIT_WEIGHT_RATIO, SolverConfig, SolverRequest, solve_weighted_vrp

logger = logging.getLogger(__name__)

POLICIES = ("mobius", "max_throughput", "dedicated", "round_robin")

PENDING = "pending"
COMMITTED = "committed"
COMPLETED = "completed"
EXPIRED = "expired"


@dataclass(frozen=True)
class Trace:
    """Timestamped task arrivals over a fixed horizon."""

    tasks: tuple[Task, ...]
    duration: float
    customers: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "tasks", tuple(sorted(self.tasks, key=lambda t: (t.arrival_time, t.task_id)))
        )
        for t in self.tasks:
            if t.arrival_time > self.duration:
                raise ValueError(f"task {t.task_id} arrives after the trace ends")
        if not self.customers:
            object.__setattr__(
                self, "customers", tuple(sorted({t.customer_id for t in self.tasks}))
            )


@dataclass
class _Stop:
    """One committed stop on a vehicle's plan (absolute times)."""

    task: Task
    depart: float
    arrive: float
    complete: float
    origin: Point


@dataclass
class _TaskState:
    task: Task
    status: str = PENDING
    committed_at: Optional[float] = None
    vehicle_id: Optional[str] = None
    service_start: Optional[float] = None
    completion: Optional[float] = None
    expired_at: Optional[float] = None


@dataclass
class _HomeLeg:
    """Planned empty drive back to base after the last stop."""

    depart: float
    arrive: float
    origin: Point
    dest: Point


@dataclass
class _VehicleSim:
    vehicle: Vehicle
    position: Point
    stops: list[_Stop] = field(default_factory=list)
    home_leg: Optional[_HomeLeg] = None

    def in_service(self, clock: float) -> Optional[_Stop]:
        """The stop being serviced at `clock`, if any."""
        for s in self.stops:
            if s.arrive <= clock < s.complete - 1e-12:
                return s
        return None

    def position_at(self, clock: float) -> Point:
        """Interpolated position: mid-leg positions move linearly,
        including the final drive home."""
        pos = self.position
        for s in self.stops:
            if clock >= s.complete:
                pos = s.task.location
                continue
            if clock <= s.depart:
                return pos
            if clock >= s.arrive:
                return s.task.location
            frac = (clock - s.depart) / max(s.arrive - s.depart, 1e-12)
            return (
                pos[0] + (s.task.location[0] - pos[0]) * frac,
                pos[1] + (s.task.location[1] - pos[1]) * frac,
            )
        leg = self.home_leg
        if leg is not None and clock > leg.depart:
            if clock >= leg.arrive:
                return leg.dest
            frac = (clock - leg.depart) / max(leg.arrive - leg.depart, 1e-12)
            return (
                leg.origin[0] + (leg.dest[0] - leg.origin[0]) * frac,
                leg.origin[1] + (leg.dest[1] - leg.origin[1]) * frac,
            )
        return pos


class SimState:
    """World state: clock, vehicles, and the task-lifecycle partition
    (pending / committed / completed / expired covers every arrival)."""

    def __init__(self, trace: Trace, vehicles: Sequence[Vehicle], expiry_s: float = 600.0):
        self.trace = trace
        self.clock = 0.0
        self.cursor = 0
        self.expiry_s = expiry_s
        self.vehicles = {
            v.vehicle_id: _VehicleSim(vehicle=v, position=v.start_location)
            for v in vehicles
        }
        self.tasks: dict[str, _TaskState] = {}
        self.cancellations: list[tuple[float, str]] = []

    def arrived(self) -> list[_TaskState]:
        return list(self.tasks.values())

    def by_status(self, status: str) -> list[_TaskState]:
        return [s for s in self.tasks.values() if s.status == status]

    def counts(self) -> dict[str, int]:
        out = {PENDING: 0, COMMITTED: 0, COMPLETED: 0, EXPIRED: 0}
        for s in self.tasks.values():
            out[s.status] += 1
        return out


def step(sim: SimState, until: float) -> SimState:
    """Advance the world to `until`: record completions along committed
    paths, inject arrivals, and expire pending tasks that have waited
    `expiry_s` since arrival (or whose deadline has passed)."""
    if until < sim.clock - 1e-9:
        raise ValueError("cannot step backwards")

    for vid in sorted(sim.vehicles):
        vs = sim.vehicles[vid]
        done = [s for s in vs.stops if s.complete <= until + 1e-9]
        for s in done:
            ts = sim.tasks[s.task.task_id]
            ts.status = COMPLETED
            ts.service_start = s.arrive
            ts.completion = s.complete
            ts.vehicle_id = vid
            vs.position = s.task.location
        vs.stops = [s for s in vs.stops if s.complete > until + 1e-9]
        leg = vs.home_leg
        if leg is not None and not vs.stops and leg.arrive <= until + 1e-9:
            vs.position = leg.dest
            vs.home_leg = None

    while sim.cursor < len(sim.trace.tasks):
        t = sim.trace.tasks[sim.cursor]
        if t.arrival_time > until + 1e-9:
            break
        sim.tasks[t.task_id] = _TaskState(task=t)
        sim.cursor += 1

    for ts in sim.tasks.values():
        if ts.status != PENDING:
            continue
        t = ts.task
        if until >= t.arrival_time + sim.expiry_s - 1e-9:
            ts.status = EXPIRED
            ts.expired_at = t.arrival_time + sim.expiry_s
        elif t.deadline is not None and until >= t.deadline - 1e-9:
            ts.status = EXPIRED
            ts.expired_at = t.deadline

    sim.clock = until
    return sim


def _snapshot_vehicles(sim: SimState, now: float, return_home: Optional[bool]) -> tuple[list[Vehicle], dict[str, _Stop]]:
    """Planning view of the fleet: current position, time until free
    (mid-service stops finish as scheduled), optional return-home flag."""
    out = []
    locked: dict[str, _Stop] = {}
    for vid in sorted(sim.vehicles):
        vs = sim.vehicles[vid]
        stop = vs.in_service(now)
        if stop is not None:
            locked[vid] = stop
            position = stop.task.location
            ready = stop.complete - now
        else:
            position = vs.position_at(now)
            ready = 0.0
        veh = vs.vehicle
        out.append(
            replace(
                veh,
                start_location=(float(position[0]), float(position[1])),
                ready_offset=max(ready, 0.0),
                return_home=veh.return_home if return_home is None else return_home,
            )
        )
    return out, locked


def _plan_home_leg(
    vs: _VehicleSim,
    stops: list[_Stop],
    now: float,
    travel: TravelModel,
    go_home: bool,
) -> Optional[_HomeLeg]:
    """Drive back to base after the last stop, or keep an in-flight leg."""
    if stops:
        if not go_home:
            return None
        last = stops[-1]
        origin = last.task.location
        home = vs.vehicle.start_location
        secs = travel_time(origin, home, travel, vs.vehicle)
        return _HomeLeg(depart=last.complete, arrive=last.complete + secs, origin=origin, dest=home)
    leg = vs.home_leg
    if leg is not None and leg.depart <= now + 1e-9 < leg.arrive:
        return leg
    return None


def _commit(
    sim: SimState,
    schedule: Schedule,
    now: float,
    locked: dict[str, _Stop],
    travel: TravelModel,
    home_flags: dict[str, bool],
) -> None:
    """Replace future plans with `schedule`; stops in progress stay."""
    for path in schedule.paths:
        vs = sim.vehicles[path.vehicle_id]
        keep = [locked[path.vehicle_id]] if path.vehicle_id in locked else []
        stops = list(keep)
        origin = stops[-1].task.location if stops else vs.position_at(now)
        for task, dep, arr, comp in zip(
            path.tasks, path.departures, path.arrivals, path.completions
        ):
            stops.append(_Stop(task=task, depart=dep, arrive=arr, complete=comp, origin=origin))
            origin = task.location
        vs.position = vs.position_at(now)
        vs.stops = stops
        vs.home_leg = _plan_home_leg(vs, stops, now, travel, home_flags[path.vehicle_id])
        for task in path.tasks:
            ts = sim.tasks[task.task_id]
            ts.status = COMMITTED
            if ts.committed_at is None:
                ts.committed_at = now
            ts.vehicle_id = path.vehicle_id
    planned = {p.vehicle_id for p in schedule.paths}
    for vid, vs in sim.vehicles.items():
        if vid not in planned:
            vs.position = vs.position_at(now)
            vs.stops = [locked[vid]] if vid in locked else []
            vs.home_leg = _plan_home_leg(vs, vs.stops, now, travel, home_flags.get(vid, False))


def _cancel(sim: SimState, task_ids: Sequence[str], now: float) -> None:
    for tid in task_ids:
        ts = sim.tasks.get(tid)
        if ts is not None and ts.status in (PENDING, COMMITTED):
            ts.status = EXPIRED
            ts.expired_at = now
            sim.cancellations.append((now, tid))
            logger.warning("t=%.0fs cancelled committed task %s", now, tid)


@dataclass
class Metrics:
    """Emulation outcome: realized throughput history and fairness."""

    customers: tuple[str, ...]
    rounds: list[dict] = field(default_factory=list)
    xbar: np.ndarray = field(default_factory=lambda: np.zeros(0))
    total_throughput: float = 0.0
    completion_fraction: dict[str, float] = field(default_factory=dict)
    wait_samples: dict[str, list[float]] = field(default_factory=dict)
    jain: float = 1.0
    cancellations: int = 0
    solver_calls: list[int] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)

    def metrics_rows(self) -> list[dict]:
        """Rows for the metrics CSV: round,customer,xbar,completed,expired,jain_total."""
        return self.rounds

    def plot_rows(self, round_s: float) -> list[dict]:
        """Rows for the throughput time-series CSV: t_s,customer,xbar."""
        out = []
        for row in self.rounds:
            out.append(
                {
                    "t_s": (row["round"] + 1) * round_s,
                    "customer": row["customer"],
                    "xbar": row["xbar"],
                }
            )
        return out

    def wait_histogram(self, bin_s: float = 60.0) -> list[dict]:
        """Wait-time histogram rows: customer,bin_start_s,bin_end_s,count."""
        out = []
        for customer in self.customers:
            samples = self.wait_samples.get(customer, [])
            if not samples:
                continue
            top = max(samples)
            nbins = int(top // bin_s) + 1
            counts = [0] * nbins
            for w in samples:
                counts[min(int(w // bin_s), nbins - 1)] += 1
            for b, count in enumerate(counts):
                if count:
                    out.append(
                        {
                            "customer": customer,
                            "bin_start_s": b * bin_s,
                            "bin_end_s": (b + 1) * bin_s,
                            "count": count,
                        }
                    )
        return out


def _planning_instance(
    sim: SimState,
    now: float,
    cfg: RoundConfig,
    travel: TravelModel,
    locked: dict[str, _Stop],
    vehicles: list[Vehicle],
) -> Instance:
    locked_ids = {s.task.task_id for s in locked.values()}
    tasks = tuple(
        ts.task
        for tid, ts in sorted(sim.tasks.items())
        if ts.status in (PENDING, COMMITTED) and tid not in locked_ids
    )
    return Instance(
        tasks=tasks,
        vehicles=tuple(vehicles),
        travel=travel,
        budget=cfg.round_s,
        round_start=now,
    )


def _return_home_now(cfg: RoundConfig, now: float) -> Optional[bool]:
    """Whether this planning window must end with vehicles at home: the
    window contains a multiple of return_home_every_s."""
    if cfg.return_home_every_s is None:
        return None
    period = cfg.return_home_every_s
    next_mark = np.ceil((now + 1e-9) / period) * period
    return bool(next_mark <= now + cfg.round_s + 1e-9)


def baseline_max_throughput(
    instance: Instance,
    solver_config: Optional[SolverConfig] = None,
    weight_overrides: Optional[dict[str, float]] = None,
    pinned: Optional[dict[str, str]] = None,
) -> Schedule:
    """Uniform-weight solve: pure throughput, fairness-blind."""
    customers = instance.customers
    if not customers:
        return empty_schedule(instance.vehicles, instance.budget)
    req = SolverRequest(
        tasks=instance.tasks,
        vehicles=instance.vehicles,
        travel=instance.travel,
        budget=instance.budget,
        customers=customers,
        weights=np.full(len(customers), 1.0 / len(customers)),
        round_start=instance.round_start,
        weight_overrides=weight_overrides,
        pinned=pinned,
        time_limit=(solver_config or SolverConfig()).time_limit_s,
        seed=(solver_config or SolverConfig()).seed,
    )
    return solve_weighted_vrp(req, solver_config)


def dedicated_partition(vehicles: Sequence[Vehicle], customers: Sequence[str]) -> dict[str, list[Vehicle]]:
    """Round-robin vehicle split by index; extra vehicles go to the
    lowest customer indices.  Requires |V| >= |K|."""
    if len(vehicles) < len(customers):
        raise ValueError("dedicated baseline needs at least one vehicle per customer")
    out: dict[str, list[Vehicle]] = {c: [] for c in customers}
    for i, v in enumerate(vehicles):
        out[customers[i % len(customers)]].append(v)
    return out


def baseline_dedicated(
    instance: Instance,
    solver_config: Optional[SolverConfig] = None,
    weight_overrides: Optional[dict[str, float]] = None,
    pinned: Optional[dict[str, str]] = None,
) -> Schedule:
    """Vehicles split evenly among customers; per-customer max-throughput
    solve on its own tasks."""
    customers = instance.customers
    if not customers:
        return empty_schedule(instance.vehicles, instance.budget)
    partition = dedicated_partition(instance.vehicles, customers)
    paths = []
    for c in customers:
        own = tuple(t for t in instance.tasks if t.customer_id == c)
        sub = Instance(
            tasks=own,
            vehicles=tuple(partition[c]),
            travel=instance.travel,
            budget=instance.budget,
            round_start=instance.round_start,
        )
        sched = baseline_max_throughput(sub, solver_config, weight_overrides, pinned)
        paths.extend(sched.paths)
    return Schedule(paths=tuple(paths), round_duration=instance.budget)


def baseline_round_robin(instance: Instance, pinned: Optional[dict[str, str]] = None) -> Schedule:
    """Each vehicle cycles customers, appending the nearest feasible
    task of the current customer; customers with nothing feasible are
    skipped.  Needs no solver."""
    customers = instance.customers
    unserved = {t.task_id: t for t in sorted(instance.tasks, key=lambda t: t.task_id)}
    by_id = dict(unserved)
    vehicles = sorted(instance.vehicles, key=lambda v: v.vehicle_id)
    paths: dict[str, list[Task]] = {v.vehicle_id: [] for v in vehicles}
    cycle: dict[str, int] = {v.vehicle_id: 0 for v in vehicles}

    def nearest_feasible(veh: Vehicle, customer: str) -> Optional[tuple]:
        seq = paths[veh.vehicle_id]
        last = seq[-1].location if seq else veh.start_location
        best = None
        for t in unserved.values():
            if t.customer_id != customer or t.is_dropoff:
                continue
            if pinned and pinned.get(t.task_id) not in (None, veh.vehicle_id):
                continue
            extra = None
            if t.is_pickup:
                extra = by_id.get(t.pickup_of)
                if extra is None or extra.task_id not in unserved:
                    continue
            trial = seq + [t] + ([extra] if extra else [])
            if path_violation(trial, veh, instance.travel, instance.budget, instance.round_start):
                continue
            d = travel_time(last, t.location, instance.travel, veh)
            if best is None or d < best[0] - 1e-12:
                best = (d, t, extra)
        return best

    active = list(vehicles)
    while active:
        still = []
        for veh in active:
            found = None
            k = len(customers)
            for off in range(k):
                c = customers[(cycle[veh.vehicle_id] + off) % k]
                found = nearest_feasible(veh, c)
                if found is not None:
                    cycle[veh.vehicle_id] = (cycle[veh.vehicle_id] + off + 1) % k
                    break
            if found is None:
                continue
            _, t, extra = found
            paths[veh.vehicle_id].append(t)
            unserved.pop(t.task_id)
            if extra is not None:
                paths[veh.vehicle_id].append(extra)
                unserved.pop(extra.task_id)
            still.append(veh)
        active = still

    built = tuple(
        build_path(v, paths[v.vehicle_id], instance.travel, instance.round_start)
        for v in vehicles
    )
    return Schedule(paths=built, round_duration=instance.budget)


def run_trace(
    trace: Trace,
    policy: str,
    cfg: RoundConfig,
    vehicles: Sequence[Vehicle],
    travel: TravelModel,
    solver_config: Optional[SolverConfig] = None,
) -> Metrics:
    """Replay `trace` under `policy` (mobius, max_throughput, dedicated,
    or round_robin): inject arrivals, replan at each tick honoring
    committed tasks, advance motion, and compute metrics.  Deterministic
    for a fixed seed."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    solver_config = solver_config or SolverConfig()
    customers = trace.customers
    sim = SimState(trace, vehicles, expiry_s=cfg.expiry_s)
    mobius = Scheduler(cfg, solver_config, customers=customers) if policy == "mobius" else None
    calls: list[int] = []
    events: list[dict] = []

    ticks = [i * cfg.replan_s for i in range(int(np.ceil(trace.duration / cfg.replan_s)) + 1)]
    for tick, now in enumerate(ticks):
        if now >= trace.duration - 1e-9:
            break
        step(sim, now)
        committed = {
            ts.task.task_id: ts.vehicle_id
            for ts in sim.by_status(COMMITTED)
        }
        expired_commits = [
            tid
            for tid, ts in sorted(sim.tasks.items())
            if ts.status == COMMITTED
            and ts.task.deadline is not None
            and ts.task.deadline <= now + 1e-9
        ]
        _cancel(sim, expired_commits, now)
        for tid in expired_commits:
            committed.pop(tid, None)

        snapshot, locked = _snapshot_vehicles(sim, now, _return_home_now(cfg, now))
        instance = _planning_instance(sim, now, cfg, travel, locked, snapshot)
        event = {
            "round": tick,
            "t_s": float(now),
            "policy": policy,
            "open_tasks": len(instance.tasks),
            "committed": 0,
            "scheduled": 0,
            "cancelled": 0,
            "calls": None,
            "stages": None,
            "allocation": None,
            "xbar": None,
        }
        if not instance.tasks:
            events.append(event)
            continue
        live_committed = {
            tid: vid for tid, vid in committed.items()
            if tid in {t.task_id for t in instance.tasks}
        }
        event["committed"] = len(live_committed)
        cancelled_before = len(sim.cancellations)

        if policy == "mobius":
            result = mobius.run_round(instance, committed=live_committed or None)
            schedule = result.schedule
            calls.append(result.calls)
            _cancel(sim, [tid for tid in mobius.last_cancelled if tid in live_committed], now)
            event["calls"] = result.calls
            event["stages"] = result.stages
            event["allocation"] = [float(v) for v in result.allocation]
            event["xbar"] = [float(v) for v in result.history.xbar]
        else:
            overrides = {tid: COMMIT_WEIGHT_RATIO for tid in live_committed} or None
            pins = dict(live_committed) or None
            if policy == "max_throughput":
                schedule = baseline_max_throughput(instance, solver_config, overrides, pins)
            elif policy == "dedicated":
                schedule = baseline_dedicated(instance, solver_config, overrides, pins)
            else:
                schedule = baseline_round_robin(instance, pins)
            dropped = [tid for tid in sorted(live_committed) if tid not in schedule.task_ids()]
            _cancel(sim, dropped, now)
        home_flags = {v.vehicle_id: v.return_home for v in snapshot}
        _commit(sim, schedule, now, locked, travel, home_flags)
        event["scheduled"] = schedule.total_tasks()
        event["cancelled"] = len(sim.cancellations) - cancelled_before
        events.append(event)

    step(sim, trace.duration)
    metrics = _build_metrics(sim, cfg, customers, calls)
    metrics.events = events
    return metrics


def _build_metrics(
    sim: SimState, cfg: RoundConfig, customers: tuple[str, ...], calls: list[int]
) -> Metrics:
    duration = sim.trace.duration
    n_rounds = int(duration // cfg.round_s)
    minutes = cfg.round_s / 60.0
    k = len(customers)
    cidx = {c: i for i, c in enumerate(customers)}

    completed = sim.by_status(COMPLETED)
    xbar = np.zeros(k)
    rows: list[dict] = []
    for r in range(n_rounds):
        lo, hi = r * cfg.round_s, (r + 1) * cfg.round_s
        x = np.zeros(k)
        for ts in completed:
            if lo < ts.completion <= hi:
                x[cidx[ts.task.customer_id]] += 1.0
        x /= minutes
        xbar = x / (r + 1) + xbar * (r / (r + 1))
        done = np.zeros(k)
        expired = np.zeros(k)
        for ts in sim.tasks.values():
            i = cidx.get(ts.task.customer_id)
            if i is None:
                continue
            if ts.status == COMPLETED and ts.completion <= hi:
                done[i] += 1
            if ts.status == EXPIRED and ts.expired_at is not None and ts.expired_at <= hi:
                expired[i] += 1
        j = jain_index(xbar)
        for c in customers:
            i = cidx[c]
            rows.append(
                {
                    "round": r,
                    "customer": c,
                    "xbar": float(xbar[i]),
                    "completed": int(done[i]),
                    "expired": int(expired[i]),
                    "jain_total": j,
                }
            )

    arrived_per = {c: 0 for c in customers}
    completed_per = {c: 0 for c in customers}
    waits: dict[str, list[float]] = {c: [] for c in customers}
    for ts in sim.tasks.values():
        c = ts.task.customer_id
        if c not in arrived_per:
            continue
        arrived_per[c] += 1
        if ts.status == COMPLETED:
            completed_per[c] += 1
            waits[c].append(ts.service_start - ts.task.arrival_time)
    fractions = {
        c: (completed_per[c] / arrived_per[c]) if arrived_per[c] else 1.0
        for c in customers
    }
    return Metrics(
        customers=customers,
        rounds=rows,
        xbar=xbar,
        total_throughput=float(np.sum(xbar)),
        completion_fraction=fractions,
        wait_samples=waits,
        jain=jain_index(xbar),
        cancellations=len(sim.cancellations),
        solver_calls=calls,
    )
