"""Shared builders and independent brute-force checkers for the suite."""

import itertools

from fairfleet.model import Instance, Task, TravelModel, Vehicle, path_violation

EUCLID = TravelModel.euclidean()


def mk_task(tid, customer, x, y, service=10.0, **kw):
    return Task(
        task_id=tid,
        customer_id=customer,
        location=(x, y),
        service_time=service,
        **kw,
    )


def mk_vehicle(vid="v0", x=0.0, y=0.0, speed=10.0, **kw):
    return Vehicle(vehicle_id=vid, start_location=(x, y), speed=speed, **kw)


def random_instance(
    rng,
    max_tasks=8,
    max_vehicles=2,
    span=1200.0,
    budget=None,
    allow_pairs=False,
):
    """Small random planning instance.

    Coordinates stay within `span` of the origin and vehicles near it, so
    with the default budget every task is individually reachable and no
    round is empty.
    """
    k = int(rng.integers(2, 4))
    n_tasks = int(rng.integers(k, max_tasks + 1))
    n_veh = int(rng.integers(1, max_vehicles + 1))
    customers = [f"c{j + 1}" for j in range(k)]
    tasks = []
    t = 0
    while t < n_tasks:
        cust = customers[t % k] if t < k else customers[int(rng.integers(0, k))]
        x, y = rng.uniform(-span, span, 2)
        service = float(rng.uniform(5, 40))
        if allow_pairs and t + 1 < n_tasks and rng.random() < 0.25:
            px, py = rng.uniform(-span, span, 2)
            tasks.append(
                Task(
                    task_id=f"t{t:02d}",
                    customer_id=cust,
                    location=(float(x), float(y)),
                    service_time=service,
                    pickup_of=f"t{t + 1:02d}",
                )
            )
            tasks.append(
                Task(
                    task_id=f"t{t + 1:02d}",
                    customer_id=cust,
                    location=(float(px), float(py)),
                    service_time=float(rng.uniform(5, 40)),
                    dropoff_of=f"t{t:02d}",
                )
            )
            t += 2
            continue
        tasks.append(mk_task(f"t{t:02d}", cust, float(x), float(y), service))
        t += 1
    vehicles = [
        Vehicle(
            vehicle_id=f"v{v}",
            start_location=(
                float(rng.uniform(-400, 400)),
                float(rng.uniform(-400, 400)),
            ),
            speed=10.0,
            return_home=bool(rng.integers(0, 2)),
            capacity=int(rng.integers(1, 3)) if allow_pairs else 1,
        )
        for v in range(n_veh)
    ]
    b = float(rng.uniform(350, 650)) if budget is None else budget
    return Instance(tasks=tuple(tasks), vehicles=tuple(vehicles), travel=EUCLID, budget=b)


def brute_best_value(instance, weights, ride_counts_as=1):
    """Best weighted objective over every assignment and visit order.

    Independent of the solvers: plain itertools enumeration with
    path_violation as the only feasibility authority.  The objective of a
    task set does not depend on order, so each vehicle's set only needs
    one feasible permutation to count.  Exponential; keep instances tiny.
    """
    customers = instance.customers
    cindex = {c: i for i, c in enumerate(customers)}
    minutes = instance.budget / 60.0

    def task_value(task):
        if task.is_pickup:
            return 0.0 if ride_counts_as == 1 else 1.0
        if task.is_dropoff:
            return float(ride_counts_as) if ride_counts_as == 1 else 1.0
        return 1.0

    def set_feasible(veh, task_list):
        for order in itertools.permutations(task_list):
            if path_violation(order, veh, instance.travel, instance.budget,
                              instance.round_start) is None:
                return True
        return False

    n = len(instance.tasks)
    vehicles = instance.vehicles
    best = 0.0
    for assign in itertools.product(range(len(vehicles) + 1), repeat=n):
        groups = [[] for _ in vehicles]
        value = 0.0
        for ti, vi in enumerate(assign):
            if vi == len(vehicles):
                continue
            task = instance.tasks[ti]
            groups[vi].append(task)
            value += weights[cindex[task.customer_id]] * task_value(task) / minutes
        if value <= best:
            continue
        if all(set_feasible(v, g) for v, g in zip(vehicles, groups)):
            best = value
    return best
