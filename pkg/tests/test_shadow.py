"""Shadow store: merge rules, staleness derivation, order-insensitivity."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guidefleet.core.clock import VirtualClock
from guidefleet.core.types import OperationalStatus, Position, RobotKind
from guidefleet.shadow import (
    DuplicateRobot,
    FieldReport,
    InconsistentMileage,
    InvalidReport,
    ReportingPolicy,
    ShadowStore,
    UnknownRobot,
)

_NS = 1_000_000_000


def make_store():
    clock = VirtualClock()
    return clock, ShadowStore(clock)


def report(field, value, seq, at=0):
    return FieldReport(field=field, value=value, seq=seq, reported_at=at)


class TestRegistration:
    def test_initial_state_never_reported_and_offline(self):
        _, store = make_store()
        view = store.register("g01", RobotKind.GUIDE)
        assert view.effective_status is OperationalStatus.OFFLINE
        assert all(not f.reported for f in view.fields.values())
        assert all(f.last_update_ms is None for f in view.fields.values())

    def test_duplicate_rejected(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        with pytest.raises(DuplicateRobot):
            store.register("g01", RobotKind.GUIDE)

    def test_hundred_robots_listed_sorted(self):
        _, store = make_store()
        ids = [f"g{i:03d}" for i in range(100)]
        for robot_id in reversed(ids):
            store.register(robot_id, RobotKind.GUIDE)
        views = store.list_shadows()
        assert [v.robot_id for v in views] == sorted(ids)

    def test_unknown_robot_raises(self):
        _, store = make_store()
        with pytest.raises(UnknownRobot):
            store.get_shadow("nope")


class TestMerge:
    def test_out_of_order_discarded_and_counted(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("battery", 90, seq=7))
        view = store.apply_report("g01", report("battery", 10, seq=5))
        assert view.battery_pct == 90
        assert store.out_of_order_count("g01") == 1

    def test_fresh_battery_applies(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        view = store.apply_report("g01", report("battery", 82, seq=1))
        assert view.battery_pct == 82
        assert view.fields["battery"].last_update_ms is not None

    def test_mileage_decrease_rejected(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("mileage", 900.0, seq=1))
        with pytest.raises(InconsistentMileage):
            store.apply_report("g01", report("mileage", 850.0, seq=2))

    def test_idempotent_replay(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        first = store.apply_report("g01", report("position", Position(1.0, 2.0, 0), seq=3))
        second = store.apply_report("g01", report("position", Position(9.0, 9.0, 0), seq=3))
        assert second == first  # replay discarded, shadow identical

    def test_battery_range_validated(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        with pytest.raises(InvalidReport):
            store.apply_report("g01", report("battery", 120, seq=1))

    def test_offline_never_self_reported(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        with pytest.raises(InvalidReport):
            store.apply_report("g01", report("status", "offline", seq=1))


class TestStaleness:
    def test_fresh_within_threshold(self):
        clock, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("position", Position(0.0, 0.0, 0), seq=1))
        clock.advance_to(clock.now() + 1 * _NS)  # 1 s < 2 s * 3
        assert store.get_shadow("g01").fields["position"].stale is False

    def test_stale_beyond_threshold(self):
        clock, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("position", Position(0.0, 0.0, 0), seq=1))
        clock.advance_to(clock.now() + 7 * _NS)  # 7 s > 6 s
        assert store.get_shadow("g01").fields["position"].stale is True

    def test_stale_status_reports_offline_but_keeps_stored_value(self):
        clock, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("status", "idle", seq=1))
        store.apply_report("g01", report("position", Position(0.0, 0.0, 0), seq=1))
        clock.advance_to(clock.now() + 10 * _NS)
        view = store.get_shadow("g01")
        assert view.effective_status is OperationalStatus.OFFLINE
        assert view.fields["status"].value is OperationalStatus.IDLE  # stored untouched

    def test_status_freshness_rides_position_heartbeat(self):
        clock, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("status", "idle", seq=1))
        for k in range(10):  # keep the heartbeat alive without touching status
            clock.advance_to(clock.now() + 2 * _NS)
            store.apply_report("g01", report("position", Position(0.0, 0.0, 0), seq=k + 1))
        assert store.get_shadow("g01").effective_status is OperationalStatus.IDLE

    def test_get_shadow_never_errors_for_registered(self):
        clock, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("battery", 50, seq=1))
        clock.advance_to(clock.now() + 3600 * _NS)  # an hour of silence
        view = store.get_shadow("g01")
        assert view.battery_pct == 50  # last recorded value still served


class TestListing:
    def test_kind_filter(self):
        _, store = make_store()
        store.register("r01", RobotKind.RECEPTION)
        store.register("g01", RobotKind.GUIDE)
        store.register("g02", RobotKind.GUIDE)
        assert len(store.list_shadows(kind=RobotKind.GUIDE)) == 2

    def test_empty_store(self):
        _, store = make_store()
        assert store.list_shadows() == []


class TestForceStatus:
    def test_robot_seq_still_wins_after_force(self):
        _, store = make_store()
        store.register("g01", RobotKind.GUIDE)
        store.apply_report("g01", report("status", "idle", seq=1))
        store.apply_report("g01", report("position", Position(0.0, 0.0, 0), seq=1))
        store.force_status("g01", OperationalStatus.ASSIGNED)
        assert store.get_shadow("g01").effective_status is OperationalStatus.ASSIGNED
        store.apply_report("g01", report("status", "pickup", seq=2))
        assert store.get_shadow("g01").effective_status is OperationalStatus.PICKUP


_FIELD_VALUES = {
    "battery": st.integers(min_value=0, max_value=100),
    "status": st.sampled_from(["idle", "pickup", "guiding", "charging", "error"]),
    "position": st.builds(
        Position,
        x=st.floats(min_value=-100, max_value=100, allow_nan=False),
        y=st.floats(min_value=-100, max_value=100, allow_nan=False),
        floor=st.integers(min_value=0, max_value=3),
    ),
}


@st.composite
def consistent_report_sets(draw):
    """Reports with unique seqs per field; mileage nondecreasing in seq."""
    reports = []
    for field_name, values in _FIELD_VALUES.items():
        count = draw(st.integers(min_value=0, max_value=4))
        seqs = sorted(draw(st.sets(st.integers(min_value=1, max_value=50), min_size=count, max_size=count)))
        for seq in seqs:
            reports.append(report(field_name, draw(values), seq))
    count = draw(st.integers(min_value=0, max_value=4))
    seqs = sorted(draw(st.sets(st.integers(min_value=1, max_value=50), min_size=count, max_size=count)))
    meters = sorted(draw(st.lists(st.floats(min_value=0, max_value=1e6, allow_nan=False), min_size=count, max_size=count)))
    for seq, m in zip(seqs, meters):
        reports.append(report("mileage", m, seq))
    return reports


@settings(max_examples=60, deadline=None)
@given(consistent_report_sets(), st.randoms(use_true_random=False))
def test_merge_order_insensitive(reports, rng):
    _, sorted_store = make_store()
    sorted_store.register("g01", RobotKind.GUIDE)
    for rep in sorted(reports, key=lambda r: (r.field, r.seq)):
        sorted_store.apply_report("g01", rep)

    shuffled = list(reports)
    rng.shuffle(shuffled)
    _, shuffled_store = make_store()
    shuffled_store.register("g01", RobotKind.GUIDE)
    for rep in shuffled:
        shuffled_store.apply_report("g01", rep)

    assert shuffled_store.get_shadow("g01") == sorted_store.get_shadow("g01")
