import math
import random

import pytest

from sentrybot import protocol as P
from sentrybot.agent import (AgentConfig, ClearDepth, DepthProfile, FrontAgent,
                             central_third, load_agent_config, obstacle_gate)
from sentrybot.kinematics import DriveGeometry, Twist, ZERO_TWIST


def profile(samples, fov=math.pi / 3):
    return DepthProfile(tuple(samples), fov)


class TestDepthProfile:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DepthProfile((), math.pi / 3)

    def test_rejects_non_positive_samples(self):
        with pytest.raises(ValueError):
            profile([1.0, 0.0, 1.0])

    def test_infinity_allowed(self):
        profile([math.inf] * 5)

    def test_central_third_bounds(self):
        assert central_third(1) == (0, 1)
        assert central_third(3) == (1, 2)
        assert central_third(31) == (10, 21)
        for n in range(1, 100):
            lo, hi = central_third(n)
            assert 0 <= lo < hi <= n


class TestObstacleGate:
    def test_clear_path_unchanged(self):
        t = Twist(0.3, 0.2)
        assert obstacle_gate(profile([5.0] * 9), t, 0.3) == t

    def test_blocked_center_zeroes_forward_keeps_rotation(self):
        samples = [5.0] * 9
        samples[4] = 0.1
        assert obstacle_gate(profile(samples), Twist(0.3, 0.2), 0.3) == Twist(0.0, 0.2)

    def test_reverse_never_gated(self):
        samples = [0.1] * 9
        t = Twist(-0.3, 0.0)
        assert obstacle_gate(profile(samples), t, 0.3) == t

    def test_side_samples_do_not_gate(self):
        samples = [0.05] * 3 + [5.0] * 3 + [0.05] * 3
        t = Twist(0.3, 0.0)
        assert obstacle_gate(profile(samples), t, 0.3) == t

    def test_boundary_is_exclusive(self):
        t = Twist(0.3, 0.0)
        assert obstacle_gate(profile([0.3] * 9), t, 0.3) == t


def make_agent(**overrides):
    cfg = AgentConfig(geometry=DriveGeometry(), **overrides)
    return FrontAgent(cfg, ClearDepth())


class TestHandleMessage:
    def test_ping_echoes_nonce(self):
        agent = make_agent()
        out = agent.handle_message(P.Ping(42), 0)
        assert out == [P.Pong(42)]

    def test_drive_updates_command(self):
        agent = make_agent()
        agent.handle_message(P.DriveCmd(0.2, 0.1, 1), 1000)
        assert agent.state.last_cmd == Twist(0.2, 0.1)
        assert agent.state.last_cmd_time_ms == 1000

    def test_stale_seq_ignored(self):
        agent = make_agent()
        agent.handle_message(P.DriveCmd(0.2, 0.0, 7), 1000)
        agent.handle_message(P.DriveCmd(0.9, 0.9, 5), 2000)
        assert agent.state.last_cmd == Twist(0.2, 0.0)
        assert agent.state.last_cmd_time_ms == 1000

    def test_equal_seq_ignored(self):
        agent = make_agent()
        agent.handle_message(P.DriveCmd(0.2, 0.0, 7), 1000)
        agent.handle_message(P.DriveCmd(0.9, 0.9, 7), 2000)
        assert agent.state.last_cmd == Twist(0.2, 0.0)

    def test_stop_zeroes_command(self):
        agent = make_agent()
        agent.handle_message(P.DriveCmd(0.2, 0.0, 1), 1000)
        agent.handle_message(P.StopCmd(1), 1500)
        assert agent.state.last_cmd == ZERO_TWIST

    def test_irrelevant_messages_ignored(self):
        agent = make_agent()
        before = agent.state.pose
        out = agent.handle_message(P.Speak("en", "hi"), 0)
        assert out == []
        assert agent.state.pose == before

    def test_fuzz_never_emits_malformed_frames(self):
        from test_protocol import ALL_VARIANTS, random_message

        agent = make_agent()
        rng = random.Random(1)
        now = 0
        for _ in range(500):
            now += rng.randrange(0, 100)
            m = random_message(rng, rng.choice(ALL_VARIANTS))
            for reply in agent.handle_message(m, now):
                decoded, _ = P.decode_frame(P.encode_frame(reply))
                assert decoded == reply


class TestTick:
    def test_fresh_forward_command_advances_pose(self):
        agent = make_agent()
        agent.handle_message(P.DriveCmd(0.2, 0.0, 1), 0)
        telemetry, applied = agent.tick(0.5, 100)
        assert applied == Twist(0.2, 0.0)
        assert agent.state.pose.x == pytest.approx(0.1)
        assert telemetry.pose == agent.state.pose
        assert telemetry.seq == 1

    def test_stale_command_freezes_pose(self):
        agent = make_agent()
        agent.handle_message(P.DriveCmd(0.2, 0.0, 1), 0)
        agent.tick(0.1, 100)
        pose = agent.state.pose
        _, applied = agent.tick(0.1, 2000)  # 2 s later, timeout 0.5 s
        assert applied == ZERO_TWIST
        assert agent.state.pose == pose

    def test_no_command_ever_means_zero_twist_and_max_link_age(self):
        agent = make_agent()
        telemetry, applied = agent.tick(0.1, 5000)
        assert applied == ZERO_TWIST
        assert telemetry.link_age_ms == 0xFFFFFFFF

    def test_obstacle_gate_zeroes_forward_but_keeps_turn(self):
        class NearWall:
            def current_profile(self):
                samples = [5.0] * 31
                samples[15] = 0.2
                return DepthProfile(tuple(samples), math.pi / 3)

        agent = FrontAgent(AgentConfig(), NearWall())
        agent.handle_message(P.DriveCmd(0.3, 0.2, 1), 0)
        _, applied = agent.tick(0.1, 10)
        assert applied == Twist(0.0, 0.2)

    def test_telemetry_seq_strictly_increases(self):
        agent = make_agent()
        seqs = [agent.tick(0.05, i * 50)[0].seq for i in range(20)]
        assert seqs == sorted(set(seqs))

    def test_watchdog_boundary_includes_one_tick(self):
        agent = make_agent(watchdog_timeout_s=0.5)
        agent.handle_message(P.DriveCmd(0.2, 0.0, 1), 0)
        _, applied = agent.tick(0.05, 500)  # exactly at timeout: passes
        assert applied.linear == pytest.approx(0.2)
        _, applied = agent.tick(0.05, 551)
        assert applied == ZERO_TWIST

    def test_rejects_non_positive_dt(self):
        with pytest.raises(ValueError):
            make_agent().tick(0.0, 0)


class TestConfigFile:
    def test_load(self, tmp_path):
        path = tmp_path / "agent.cfg"
        path.write_text(
            "# front node tuning\n"
            "wheel_radius = 0.04\n"
            "track_width = 0.25\n"
            "watchdog_timeout = 0.75\n"
            "stop_distance = 0.4\n"
            "telemetry_hz = 10\n")
        cfg = load_agent_config(path)
        assert cfg.geometry.wheel_radius == 0.04
        assert cfg.geometry.track_width == 0.25
        assert cfg.watchdog_timeout_s == 0.75
        assert cfg.stop_distance_m == 0.4
        assert cfg.telemetry_hz == 10
        assert cfg.frame_hz == 10.0  # default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "agent.cfg"
        path.write_text("wheel_radius=0.04\nwarp_speed=9\n")
        with pytest.raises(ValueError):
            load_agent_config(path)
