"""Round loop: track long-term throughput, search the boundary each
round, pick the corner that maximizes cumulative fairness, and honor
commitments across replanning windows.

One planning round = init_face + search_boundary + select_allocation +
update_history.  The history update uses the planned allocation of the
chosen corner; under the static arrival model the realized allocation
matches it exactly.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .boundary import EmptyRoundError, Face, init_face, search_boundary
from .fairness import alpha_fair_utility, is_leximin, leximin_key
from .model import Instance, Schedule, empty_schedule
from .vrp import COMMIT_WEIGHT_RATIO, RoundSolver, SolverConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class History:
    """Long-term per-customer throughput (tasks/min).

    Running-average mode keeps the duration-weighted mean of past round
    allocations; discounted mode applies a fixed exponential factor,
    suiting fleets whose customers come and go.
    """

    xbar: np.ndarray
    t: int = 0
    discount: Optional[float] = None
    weight_total: float = 0.0

    def __post_init__(self) -> None:
        x = np.asarray(self.xbar, dtype=float)
        if np.any(x < 0):
            raise ValueError("history throughput must be nonnegative")
        if self.t < 0:
            raise ValueError("round count must be >= 0")
        if self.discount is not None and not (0 < self.discount <= 1):
            raise ValueError("discount must lie in (0, 1]")
        object.__setattr__(self, "xbar", x)

    @staticmethod
    def zeros(k: int, discount: Optional[float] = None) -> "History":
        return History(xbar=np.zeros(k), discount=discount)

    @property
    def gamma(self) -> float:
        """Mixing weight of the upcoming round's allocation."""
        if self.discount is not None:
            return self.discount
        return 1.0 / (self.t + 1)


def update_history(h: History, x: np.ndarray, duration: Optional[float] = None) -> History:
    """Fold one round's allocation into the history.

    Running average: xbar <- x/(t+1) + xbar*t/(t+1) for equal rounds,
    duration-weighted mean when `duration` varies.  Discounted:
    xbar <- g*x + (1-g)*xbar with the fixed factor g.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != h.xbar.shape:
        raise ValueError("allocation dimension does not match history")
    if h.discount is not None:
        new = h.discount * x + (1.0 - h.discount) * h.xbar
        return replace(h, xbar=new, t=h.t + 1)
    d = 1.0 if duration is None else float(duration)
    if d <= 0:
        raise ValueError("duration must be > 0")
    total = h.weight_total + d
    new = x * (d / total) + h.xbar * (h.weight_total / total)
    return replace(h, xbar=new, t=h.t + 1, weight_total=total)


@dataclass
class RoundConfig:
    """Per-round knobs (config keys: round_s, replan_s, alpha, discount,
    return_home_every_s, prune_after_rounds)."""

    round_s: float = 900.0
    replan_s: Optional[float] = None
    alpha: float = 1.0
    discount: Optional[float] = None
    return_home_every_s: Optional[float] = None
    prune_after_rounds: int = 10
    ride_counts_as: int = 1
    expiry_s: float = 600.0
    profile: bool = False

    def __post_init__(self) -> None:
        if self.replan_s is None:
            self.replan_s = self.round_s
        if not (0 < self.replan_s <= self.round_s):
            raise ValueError("need 0 < replan_s <= round_s")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.discount is not None and not (0 < self.discount <= 1):
            raise ValueError("discount must lie in (0, 1]")


@dataclass(frozen=True)
class RoundResult:
    """Outcome of one planning round."""

    schedule: Schedule
    allocation: np.ndarray
    history: History
    face: Optional[Face]
    calls: int
    stages: int
    wall_ms: Optional[float] = None


def _embed_corner(face: Face, corner: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    for j, idx in enumerate(face.active):
        out[idx] = corner[j]
    return out


def select_allocation(
    face: Face, h: History, alpha: float
) -> tuple[Schedule, np.ndarray]:
    """Corner of `face` maximizing cumulative fairness
    U_alpha(g*x + (1-g)*xbar), leximin comparison in max-min mode.
    Ties break toward larger total throughput, then lowest corner index.
    Returns the corner's stored schedule and its allocation embedded in
    history dimensions.
    """
    if not face.corners:
        raise ValueError("face has no corners")
    dim = len(h.xbar)
    g = h.gamma
    best = None
    for idx in range(len(face.corners)):
        x = _embed_corner(face, face.corners[idx], dim)
        cumulative = g * x + (1.0 - g) * h.xbar
        if is_leximin(alpha):
            score = leximin_key(cumulative)
        else:
            score = alpha_fair_utility(cumulative, alpha)
        key = (score, float(np.sum(x)))
        if best is None or key > best[0]:
            best = (key, idx, x)
    _, idx, x = best
    return face.schedules[idx], x


def plan_round(
    instance: Instance,
    alpha: float,
    solver_config: Optional[SolverConfig] = None,
    customers: Optional[Sequence[str]] = None,
    weight_overrides: Optional[dict[str, float]] = None,
    pinned: Optional[dict[str, str]] = None,
    ride_counts_as: int = 1,
) -> tuple[Optional[Face], RoundSolver]:
    """Boundary search for one round; face is None on an empty round."""
    customers = tuple(customers if customers is not None else instance.customers)
    solver = RoundSolver(
        instance,
        solver_config,
        alpha=alpha,
        weight_overrides=weight_overrides,
        pinned=pinned,
        ride_counts_as=ride_counts_as,
        customers=customers,
    )
    if not customers or not instance.tasks:
        return None, solver
    if len(customers) == 1:
        alloc, sched = solver.solve(np.ones(1))
        if alloc[0] <= 0 and sched.total_tasks() == 0:
            return None, solver
        x = np.asarray(alloc, dtype=float)
        return (
            Face(
                corners=(x,),
                w=np.ones(1),
                c=float(x[0]),
                schedules=(sched,),
                active=(0,),
            ),
            solver,
        )
    try:
        face = init_face(customers, solver)
    except EmptyRoundError:
        return None, solver
    face = search_boundary(face, alpha, solver)
    return face, solver


def run_round(
    instance: Instance,
    history: History,
    cfg: RoundConfig,
    solver_config: Optional[SolverConfig] = None,
    customers: Optional[Sequence[str]] = None,
    weight_overrides: Optional[dict[str, float]] = None,
    pinned: Optional[dict[str, str]] = None,
) -> RoundResult:
    """One full planning round; empty rounds record a zero allocation
    but still advance the history."""
    customers = tuple(customers if customers is not None else instance.customers)
    if len(customers) != len(history.xbar):
        raise ValueError("history dimension does not match customers")
    start = time.perf_counter() if cfg.profile else None
    face, solver = plan_round(
        instance,
        cfg.alpha,
        solver_config,
        customers,
        weight_overrides,
        pinned,
        cfg.ride_counts_as,
    )
    k = len(customers)
    if face is None:
        schedule = empty_schedule(instance.vehicles, instance.budget)
        allocation = np.zeros(k)
        stages = 0
    else:
        schedule, allocation = select_allocation(face, history, cfg.alpha)
        stages = solver.calls - k if len(customers) > 1 else 0
    new_history = update_history(history, allocation, duration=instance.budget)
    wall_ms = (time.perf_counter() - start) * 1000.0 if cfg.profile else None
    return RoundResult(
        schedule=schedule,
        allocation=allocation,
        history=new_history,
        face=face,
        calls=solver.calls,
        stages=stages,
        wall_ms=wall_ms,
    )


@dataclass(frozen=True)
class ReplanResult:
    round: RoundResult
    cancelled: tuple[str, ...]


def replan(
    instance: Instance,
    history: History,
    cfg: RoundConfig,
    committed: Mapping[str, str],
    solver_config: Optional[SolverConfig] = None,
    customers: Optional[Sequence[str]] = None,
) -> ReplanResult:
    """Replanning tick: full round over the remaining horizon with
    committed tasks forced in (weight override) and pinned to their
    assigned vehicles.  Committed tasks that can no longer be scheduled
    are reported as cancellations.
    """
    by_id = {t.task_id: t for t in instance.tasks}
    live: dict[str, str] = {}
    cancelled: list[str] = []
    for tid, vid in sorted(committed.items()):
        task = by_id.get(tid)
        if task is None:
            cancelled.append(tid)
            continue
        if task.deadline is not None and task.deadline <= instance.round_start:
            cancelled.append(tid)
            continue
        live[tid] = vid
    tasks = tuple(t for t in instance.tasks if t.task_id not in set(cancelled))
    inst = replace(instance, tasks=tasks)
    overrides = {tid: COMMIT_WEIGHT_RATIO for tid in live}
    result = run_round(
        inst,
        history,
        cfg,
        solver_config,
        customers,
        weight_overrides=overrides,
        pinned=dict(live),
    )
    scheduled = result.schedule.task_ids()
    for tid in sorted(live):
        if tid not in scheduled:
            logger.warning("committed task %s no longer feasible; cancelled", tid)
            cancelled.append(tid)
    return ReplanResult(round=result, cancelled=tuple(cancelled))


class Scheduler:
    """Owns the mutable cross-round state: the customer roster, the
    throughput history over it, and per-customer idle counts used to
    prune dead customers from the round geometry (history retained)."""

    def __init__(
        self,
        cfg: RoundConfig,
        solver_config: Optional[SolverConfig] = None,
        customers: Sequence[str] = (),
    ):
        self.cfg = cfg
        self.solver_config = solver_config or SolverConfig()
        self.roster: list[str] = list(customers)
        self.history = History.zeros(len(self.roster), discount=cfg.discount)
        self.idle: dict[str, int] = {c: 0 for c in self.roster}
        self.rounds: list[RoundResult] = []

    def observe(self, customers: Sequence[str]) -> None:
        """Admit new customers with zero history."""
        added = [c for c in sorted(set(customers)) if c not in self.idle]
        if not added:
            return
        self.roster.extend(added)
        for c in added:
            self.idle[c] = 0
        self.history = replace(
            self.history,
            xbar=np.concatenate([self.history.xbar, np.zeros(len(added))]),
        )

    def geometry(self, instance: Instance) -> list[str]:
        """Roster members participating in this round's boundary search."""
        present = {t.customer_id for t in instance.tasks}
        geom = []
        for c in self.roster:
            if c in present or self.idle[c] < self.cfg.prune_after_rounds:
                geom.append(c)
        return geom

    def run_round(
        self,
        instance: Instance,
        committed: Optional[Mapping[str, str]] = None,
    ) -> RoundResult:
        self.observe(sorted({t.customer_id for t in instance.tasks}))
        present = {t.customer_id for t in instance.tasks}
        for c in self.roster:
            self.idle[c] = 0 if c in present else self.idle[c] + 1
        geom = self.geometry(instance)
        gidx = [self.roster.index(c) for c in geom]
        sub_history = History(
            xbar=self.history.xbar[gidx],
            t=self.history.t,
            discount=self.history.discount,
            weight_total=self.history.weight_total,
        )
        if committed:
            res = replan(
                instance, sub_history, self.cfg, committed,
                self.solver_config, customers=geom,
            )
            result = res.round
            self.last_cancelled = res.cancelled
        else:
            result = run_round(
                instance, sub_history, self.cfg, self.solver_config, customers=geom,
            )
            self.last_cancelled = ()
        full_alloc = np.zeros(len(self.roster))
        for j, idx in enumerate(gidx):
            full_alloc[idx] = result.allocation[j]
        self.history = update_history(
            self.history, full_alloc, duration=instance.budget
        )
        result = replace(result, allocation=full_alloc, history=self.history)
        self.rounds.append(result)
        return result


@dataclass
class StaticRunResult:
    """Trajectory of repeated rounds on one fixed instance."""

    allocations: list[np.ndarray] = field(default_factory=list)
    xbars: list[np.ndarray] = field(default_factory=list)
    faces: list[Optional[Face]] = field(default_factory=list)
    calls: list[int] = field(default_factory=list)
    stages: list[int] = field(default_factory=list)
    schedules: list[Schedule] = field(default_factory=list)

    @property
    def final_xbar(self) -> np.ndarray:
        return self.xbars[-1]


def run_static_rounds(
    instance: Instance,
    cfg: RoundConfig,
    rounds: int,
    solver_config: Optional[SolverConfig] = None,
) -> StaticRunResult:
    """Repeat the round loop on a fixed instance (static arrival model:
    the task set renews every round, so the feasible set is constant)."""
    customers = instance.customers
    history = History.zeros(len(customers), discount=cfg.discount)
    out = StaticRunResult()
    for _ in range(rounds):
        result = run_round(instance, history, cfg, solver_config)
        history = result.history
        out.allocations.append(result.allocation)
        out.xbars.append(history.xbar.copy())
        out.faces.append(result.face)
        out.calls.append(result.calls)
        out.stages.append(result.stages)
        out.schedules.append(result.schedule)
    return out


def event_record(round_index: int, result: RoundResult) -> dict:
    """Per-round event for the JSON-lines log."""
    return {
        "round": round_index,
        "allocation": [float(v) for v in result.allocation],
        "xbar": [float(v) for v in result.history.xbar],
        "calls": result.calls,
        "stages": result.stages,
        "wall_ms": result.wall_ms,
    }
