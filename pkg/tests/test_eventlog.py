import json

import pytest

from sentrybot.clocks import ManualClock, WallClock
from sentrybot.eventlog import (EventLog, EventRecord, iter_lines_since,
                                latest_log_file, read_records, record_from_line,
                                record_to_line)


class TestRecordSerialization:
    def test_roundtrip(self):
        r = EventRecord(123, "telemetry", {"pose": {"x": 1.5, "y": -0.25, "theta": 0.1}})
        assert record_from_line(record_to_line(r)) == r

    def test_line_is_canonical_json(self):
        r = EventRecord(1, "command", {"b": 2, "a": 1})
        line = record_to_line(r)
        assert line == '{"body":{"a":1,"b":2},"kind":"command","timestamp_ms":1}'

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            EventRecord(0, "gossip", {})


class TestEventLog:
    def test_appends_in_order_and_flushes(self, tmp_path):
        log = EventLog(tmp_path, 1000)
        log.append(EventRecord(1, "telemetry", {"seq": 1}))
        log.append(EventRecord(2, "telemetry", {"seq": 2}))
        lines = log.path.read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["body"]["seq"] == 1
        assert json.loads(lines[1])["body"]["seq"] == 2
        log.close()

    def test_restart_appends_to_same_named_file(self, tmp_path):
        log = EventLog(tmp_path, 5000)
        log.append(EventRecord(1, "command", {"n": 1}))
        log.close()
        again = EventLog(tmp_path, 5000)  # same start stamp -> same file
        again.append(EventRecord(2, "command", {"n": 2}))
        again.close()
        records = read_records(again.path)
        assert [r.body["n"] for r in records] == [1, 2]

    def test_clock_regression_clamped(self, tmp_path):
        log = EventLog(tmp_path, 0)
        log.append(EventRecord(100, "command", {}))
        log.append(EventRecord(50, "command", {}))
        records = read_records(log.path)
        assert [r.timestamp_ms for r in records] == [100, 100]
        log.close()

    def test_disk_failure_flips_health_flag(self, tmp_path):
        log = EventLog(tmp_path, 0)
        log._fh.close()  # simulated disk loss
        log.append(EventRecord(1, "command", {}))
        assert log.healthy is False

    def test_one_file_per_start(self, tmp_path):
        EventLog(tmp_path, 1).close()
        EventLog(tmp_path, 2).close()
        assert latest_log_file(tmp_path).name == "events-2.jsonl"

    def test_iter_lines_since_is_exclusive(self, tmp_path):
        log = EventLog(tmp_path, 0)
        for ts in (10, 20, 30):
            log.append(EventRecord(ts, "telemetry", {"t": ts}))
        log.close()
        assert len(list(iter_lines_since(log.path, -1))) == 3
        assert len(list(iter_lines_since(log.path, 10))) == 2
        assert len(list(iter_lines_since(log.path, 30))) == 0


class TestClocks:
    def test_manual_clock(self):
        clock = ManualClock(100)
        assert clock.now_ms() == 100
        clock.advance(50)
        assert clock.now_ms() == 150
        with pytest.raises(ValueError):
            clock.advance(-1)

    def test_wall_clock_moves(self):
        clock = WallClock()
        assert clock.now_ms() > 1_600_000_000_000  # sometime after 2020
