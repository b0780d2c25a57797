"""Core data model: timing arithmetic, feasibility, counting, file formats."""

import math

import numpy as np
import pytest

from conftest import EUCLID, mk_task, mk_vehicle
from fairfleet.model import (
    Instance,
    InterestMap,
    Schedule,
    Task,
    TravelModel,
    allocation_of,
    build_path,
    count_fulfilled,
    customers_of,
    empty_schedule,
    merge_interest_maps,
    path_cost,
    path_violation,
    read_tasks_jsonl,
    read_travel_matrix_csv,
    read_vehicles_json,
    sequence_cost,
    sequence_feasible,
    travel_time,
    validate_pairs,
    write_tasks_jsonl,
    write_travel_matrix_csv,
    write_vehicles_json,
)


class TestTaskValidation:
    def test_negative_service_rejected(self):
        with pytest.raises(ValueError, match="service_time"):
            mk_task("t0", "c1", 0, 0, service=-1.0)

    def test_deadline_before_arrival_rejected(self):
        with pytest.raises(ValueError, match="deadline"):
            Task(task_id="t0", customer_id="c1", location=(0, 0),
                 service_time=1.0, arrival_time=10.0, deadline=5.0)

    def test_pickup_and_dropoff_exclusive(self):
        with pytest.raises(ValueError, match="both pickup and dropoff"):
            Task(task_id="t0", customer_id="c1", location=(0, 0),
                 service_time=1.0, pickup_of="a", dropoff_of="b")

    def test_location_coerced_to_floats(self):
        t = mk_task("t0", "c1", 3, 4)
        assert t.location == (3.0, 4.0)

    def test_pair_id(self):
        p = mk_task("p", "c1", 0, 0, pickup_of="d")
        d = mk_task("d", "c1", 1, 0, dropoff_of="p")
        assert p.pair_id == "d" and d.pair_id == "p"
        assert p.is_pickup and not p.is_dropoff
        assert d.is_dropoff and not d.is_pickup
        assert mk_task("t", "c1", 0, 0).pair_id is None


class TestVehicleValidation:
    def test_bad_speed(self):
        with pytest.raises(ValueError, match="speed"):
            mk_vehicle(speed=0.0)

    def test_bad_capacity(self):
        with pytest.raises(ValueError, match="capacity"):
            mk_vehicle(capacity=0)

    def test_bad_ready_offset(self):
        with pytest.raises(ValueError, match="ready_offset"):
            mk_vehicle(ready_offset=-1.0)


class TestTravel:
    def test_euclidean_uses_vehicle_speed(self):
        v = mk_vehicle(speed=20.0)
        assert travel_time((0, 0), (60, 80), EUCLID, v) == pytest.approx(5.0)

    def test_matrix_binds_xy_ids(self):
        m = TravelModel.matrix(["0;0", "30;40"], [[0, 7], [9, 0]])
        v = mk_vehicle(speed=1.0)
        assert travel_time((0, 0), (30, 40), m, v) == 7.0
        assert travel_time((30, 40), (0, 0), m, v) == 9.0

    def test_matrix_rejects_unregistered_point(self):
        m = TravelModel.matrix(["0;0", "1;1"], [[0, 1], [1, 0]])
        with pytest.raises(ValueError, match="unregistered"):
            travel_time((5, 5), (0, 0), m, mk_vehicle())

    def test_matrix_shape_and_diagonal_checks(self):
        with pytest.raises(ValueError, match="shape"):
            TravelModel.matrix(["a", "b"], [[0, 1, 2], [1, 0, 2], [2, 2, 0]])
        with pytest.raises(ValueError, match="diagonal"):
            TravelModel.matrix(["0;0", "1;0"], [[3, 1], [1, 0]])

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="variant"):
            TravelModel(variant="teleport")


class TestBuildPath:
    # Derived by hand: speed 10 m/s, legs 100 m then 40 m.
    def test_timings(self):
        v = mk_vehicle()
        t1 = mk_task("t1", "c1", 100, 0, service=10.0)
        t2 = mk_task("t2", "c1", 100, 40, service=5.0)
        p = build_path(v, [t1, t2], EUCLID)
        assert p.departures == (0.0, 20.0)
        assert p.arrivals == (10.0, 24.0)
        assert p.completions == (20.0, 29.0)

    def test_round_start_and_ready_offset_shift_clock(self):
        v = mk_vehicle(ready_offset=7.0)
        t1 = mk_task("t1", "c1", 100, 0, service=10.0)
        p = build_path(v, [t1], EUCLID, round_start=600.0)
        assert p.departures == (607.0,)
        assert p.arrivals == (617.0,)
        assert p.completions == (627.0,)

    def test_timing_array_length_check(self):
        from fairfleet.model import Path

        with pytest.raises(ValueError, match="timing"):
            Path("v0", (mk_task("t", "c1", 0, 0),), (), (), ())


class TestCosts:
    def test_sequence_cost_without_return(self):
        v = mk_vehicle()
        seq = [mk_task("t1", "c1", 100, 0), mk_task("t2", "c1", 100, 40, service=5.0)]
        # 10s + 10s service + 4s + 5s service
        assert sequence_cost(seq, v, EUCLID) == pytest.approx(29.0)

    def test_sequence_cost_with_return_home(self):
        v = mk_vehicle(return_home=True)
        seq = [mk_task("t1", "c1", 100, 0), mk_task("t2", "c1", 100, 40, service=5.0)]
        back = math.hypot(100, 40) / 10.0
        assert sequence_cost(seq, v, EUCLID) == pytest.approx(29.0 + back)
        assert path_cost(build_path(v, seq, EUCLID), v, EUCLID) == pytest.approx(29.0 + back)

    def test_empty_sequence_is_free(self):
        assert sequence_cost([], mk_vehicle(return_home=True), EUCLID) == 0.0


class TestPathViolation:
    def test_feasible_sequence(self):
        v = mk_vehicle()
        seq = [mk_task("t1", "c1", 100, 0)]
        assert path_violation(seq, v, EUCLID, budget=30.0) is None
        assert sequence_feasible(seq, v, EUCLID, budget=30.0)

    def test_budget_violation(self):
        v = mk_vehicle()
        seq = [mk_task("t1", "c1", 100, 0)]
        assert "budget" in path_violation(seq, v, EUCLID, budget=19.0)

    def test_return_leg_counts_against_budget(self):
        v = mk_vehicle(return_home=True)
        seq = [mk_task("t1", "c1", 100, 0)]
        assert path_violation(seq, v, EUCLID, budget=25.0) is not None
        assert path_violation(seq, v, EUCLID, budget=30.0) is None

    def test_deadline_violation(self):
        v = mk_vehicle()
        late = Task(task_id="t1", customer_id="c1", location=(100, 0),
                    service_time=10.0, deadline=15.0)
        assert "deadline" in path_violation([late], v, EUCLID, budget=600.0)

    def test_dropoff_before_pickup(self):
        v = mk_vehicle()
        p = mk_task("p", "c1", 10, 0, pickup_of="d")
        d = mk_task("d", "c1", 20, 0, dropoff_of="p")
        assert "precedes" in path_violation([d, p], v, EUCLID, budget=600.0)
        assert path_violation([p, d], v, EUCLID, budget=600.0) is None

    def test_capacity_bound(self):
        v = mk_vehicle(capacity=1)
        p1 = mk_task("p1", "c1", 10, 0, pickup_of="d1")
        d1 = mk_task("d1", "c1", 20, 0, dropoff_of="p1")
        p2 = mk_task("p2", "c1", 30, 0, pickup_of="d2")
        d2 = mk_task("d2", "c1", 40, 0, dropoff_of="p2")
        assert "capacity" in path_violation([p1, p2, d1, d2], v, EUCLID, budget=600.0)
        v2 = mk_vehicle(capacity=2)
        assert path_violation([p1, p2, d1, d2], v2, EUCLID, budget=600.0) is None

    def test_ready_offset_erodes_budget(self):
        v = mk_vehicle(ready_offset=15.0)
        seq = [mk_task("t1", "c1", 100, 0)]
        assert path_violation(seq, v, EUCLID, budget=30.0) is not None
        assert path_violation(seq, v, EUCLID, budget=35.0) is None


class TestCounting:
    def test_plain_tasks_count_once(self):
        tasks = [mk_task("a", "c1", 0, 0), mk_task("b", "c2", 0, 0), mk_task("c", "c1", 0, 0)]
        counts = count_fulfilled(tasks, ("c1", "c2"))
        assert counts.tolist() == [2.0, 1.0]

    def test_pair_counts_once_on_dropoff(self):
        p = mk_task("p", "c1", 0, 0, pickup_of="d")
        d = mk_task("d", "c1", 1, 0, dropoff_of="p")
        assert count_fulfilled([p, d], ("c1",)).tolist() == [1.0]
        assert count_fulfilled([p], ("c1",)).tolist() == [0.0]

    def test_ride_counts_as_two(self):
        p = mk_task("p", "c1", 0, 0, pickup_of="d")
        d = mk_task("d", "c1", 1, 0, dropoff_of="p")
        assert count_fulfilled([p, d], ("c1",), ride_counts_as=2).tolist() == [2.0]

    def test_allocation_is_per_minute(self):
        v = mk_vehicle()
        sched = Schedule(
            paths=(build_path(v, [mk_task("a", "c1", 10, 0)], EUCLID),),
            round_duration=120.0,
        )
        assert allocation_of(sched, ("c1",)).tolist() == [0.5]

    def test_customers_of_sorted(self):
        tasks = [mk_task("a", "zeta", 0, 0), mk_task("b", "alpha", 0, 0)]
        assert customers_of(tasks) == ("alpha", "zeta")


class TestScheduleInvariants:
    def test_duplicate_task_rejected(self):
        v1, v2 = mk_vehicle("v1"), mk_vehicle("v2")
        t = mk_task("t", "c1", 10, 0)
        with pytest.raises(ValueError, match="two paths"):
            Schedule(
                paths=(build_path(v1, [t], EUCLID), build_path(v2, [t], EUCLID)),
                round_duration=600.0,
            )

    def test_empty_schedule(self):
        s = empty_schedule([mk_vehicle("v1"), mk_vehicle("v2")], 600.0)
        assert s.total_tasks() == 0 and s.task_ids() == set()
        assert len(s.paths) == 2

    def test_bad_duration(self):
        with pytest.raises(ValueError, match="round_duration"):
            Schedule(paths=(), round_duration=0.0)


class TestPairsAndMaps:
    def test_validate_pairs_requires_backreference(self):
        p = mk_task("p", "c1", 0, 0, pickup_of="d")
        d = mk_task("d", "c1", 1, 0, dropoff_of="other")
        with pytest.raises(ValueError, match="reference back"):
            validate_pairs([p, d])

    def test_validate_pairs_same_customer(self):
        p = mk_task("p", "c1", 0, 0, pickup_of="d")
        d = mk_task("d", "c2", 1, 0, dropoff_of="p")
        with pytest.raises(ValueError, match="two customers"):
            validate_pairs([p, d])

    def test_validate_pairs_missing_partner(self):
        with pytest.raises(ValueError, match="unknown pair"):
            validate_pairs([mk_task("p", "c1", 0, 0, pickup_of="ghost")])

    def test_interest_map_owner_check(self):
        with pytest.raises(ValueError, match="belongs to"):
            InterestMap(customer_id="c1", tasks=(mk_task("t", "c2", 0, 0),))

    def test_merge_rejects_duplicate_customers(self):
        m1 = InterestMap("c1", (mk_task("a", "c1", 0, 0),))
        m2 = InterestMap("c1", (mk_task("b", "c1", 0, 0),))
        with pytest.raises(ValueError, match="duplicate customer_id"):
            merge_interest_maps([m1, m2])

    def test_merge_rejects_duplicate_task_ids(self):
        m1 = InterestMap("c1", (mk_task("a", "c1", 0, 0),))
        m2 = InterestMap("c2", (mk_task("a", "c2", 0, 0),))
        with pytest.raises(ValueError, match="duplicate task_id"):
            merge_interest_maps([m1, m2])


class TestInstance:
    def test_budget_check(self):
        with pytest.raises(ValueError, match="budget"):
            Instance(tasks=(), vehicles=(), travel=EUCLID, budget=0.0)

    def test_customers_property(self):
        inst = Instance(
            tasks=(mk_task("a", "c2", 0, 0), mk_task("b", "c1", 0, 0)),
            vehicles=(mk_vehicle(),),
            travel=EUCLID,
            budget=600.0,
        )
        assert inst.customers == ("c1", "c2")


class TestFileFormats:
    def test_tasks_jsonl_round_trip(self, tmp_path):
        tasks = [
            mk_task("a", "c1", 1.5, -2.25, service=12.0),
            Task(task_id="p", customer_id="c2", location=(3, 4), service_time=5.0,
                 arrival_time=30.0, deadline=500.0, pickup_of="d"),
            Task(task_id="d", customer_id="c2", location=(5, 6), service_time=5.0,
                 arrival_time=30.0, dropoff_of="p"),
        ]
        path = tmp_path / "tasks.jsonl"
        write_tasks_jsonl(str(path), tasks)
        back = read_tasks_jsonl(str(path))
        assert back == tasks

    def test_tasks_jsonl_error_names_line(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        good = '{"customer": "c1", "task_id": "a", "x": 0, "y": 0, "service_s": 1}'
        path.write_text(good + "\n" + "{not json}\n")
        with pytest.raises(ValueError, match="line 2"):
            read_tasks_jsonl(str(path))

    def test_tasks_jsonl_unknown_key_names_line(self, tmp_path):
        path = tmp_path / "tasks.jsonl"
        path.write_text('{"customer": "c1", "task_id": "a", "x": 0, "y": 0, "service_s": 1, "color": "red"}\n')
        with pytest.raises(ValueError, match="line 1"):
            read_tasks_jsonl(str(path))

    def test_vehicles_json_round_trip(self, tmp_path):
        vehicles = [
            mk_vehicle("v1", 10, 20, speed=7.5, capacity=2, return_home=True),
            mk_vehicle("v2", -5, 0),
        ]
        path = tmp_path / "vehicles.json"
        write_vehicles_json(str(path), vehicles)
        assert read_vehicles_json(str(path)) == vehicles

    def test_travel_matrix_round_trip(self, tmp_path):
        m = TravelModel.matrix(["0;0", "100;0", "0;100"],
                               [[0, 10, 11], [10, 0, 12], [11, 12, 0]])
        path = tmp_path / "travel.csv"
        write_travel_matrix_csv(str(path), m.location_ids, m.seconds)
        back = read_travel_matrix_csv(str(path))
        assert back.location_ids == m.location_ids
        assert np.array_equal(back.seconds, m.seconds)
        v = mk_vehicle()
        assert travel_time((100, 0), (0, 100), back, v) == 12.0
