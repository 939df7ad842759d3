#!/usr/bin/env python3
"""Records the central server's operator contract into a JSON fixture.

Runs the real server in-process (oracle backend, manual clock, a fake
front-node socket), POSTs the exact bodies each console control emits,
and stores request/response pairs plus the snapshot and detection
payloads. The console's contract tests replay this fixture, so the TS
side is pinned to real server behavior without needing Python at test
time.

Run from the repo root after changing either side:

    python3 frontend/scripts/record_contract.py
"""

import asyncio
import json
import math
from pathlib import Path

from sentrybot import protocol as P
from sentrybot.clocks import ManualClock
from sentrybot.detection import GridConfig, OracleBackend
from sentrybot.server import SessionCore
from sentrybot.service import CentralService
from sentrybot.sim import (SimCamera, WorldHandle, build_world, load_scenario,
                           make_sim_agent)

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures" / "contract.json"

# Console control -> POST body, in the order the recorder plays them.
# (The dialog is stateful: transcript, then ack, then target.)
CASES = [
    ("transcript", {"transcript": "what do you see"}),
    ("dialog_ack_yes", {"dialog": {"ack": True}}),
    ("dialog_target_en", {"dialog": {"target": "en"}}),
    ("pad_forward", {"drive": {"linear": 0.2, "angular": 0}}),
    ("pad_backward", {"drive": {"linear": -0.2, "angular": 0}}),
    ("pad_left", {"drive": {"linear": 0, "angular": math.pi / 4}}),
    ("pad_right", {"drive": {"linear": 0, "angular": -math.pi / 4}}),
    ("stop", {"stop": True}),
    ("dialog_reset", {"dialog": {"reset": True}}),
    ("transcript_2", {"transcript": "hello again"}),
    ("dialog_ack_no", {"dialog": {"ack": False}}),
    ("dialog_source_hi", {"dialog": {"source": "hi"}}),
]


async def record() -> dict:
    cfg = GridConfig.coco_default()
    cam = SimCamera()
    scenario = load_scenario(Path(__file__).resolve().parents[2]
                             / "scenarios" / "three_objects.scn")
    handle = WorldHandle(build_world(scenario, class_names=cfg.class_names))
    agent = make_sim_agent(handle, cam, cfg)

    clock = ManualClock(0)
    core = SessionCore(OracleBackend(), cfg, clock=clock)
    import tempfile

    with tempfile.TemporaryDirectory() as log_dir:
        service = CentralService(core, log_dir, clock=clock)
        http_server = await service.start_http("127.0.0.1", 0)
        port = http_server.sockets[0].getsockname()[1]
        agent_server = await service.listen_for_agent("127.0.0.1", 0)
        agent_port = agent_server.sockets[0].getsockname()[1]

        reader, writer = await asyncio.open_connection("127.0.0.1", agent_port)

        async def send(m):
            expected = service.wire_seen + 1
            writer.write(P.encode_frame(m))
            await writer.drain()
            while service.wire_seen < expected:
                await asyncio.sleep(0.001)
            await service.drain()

        async def http(method, path, body=None):
            r, w = await asyncio.open_connection("127.0.0.1", port)
            payload = b"" if body is None else json.dumps(body).encode()
            w.write((f"{method} {path} HTTP/1.1\r\nHost: t\r\n"
                     f"Content-Length: {len(payload)}\r\n\r\n").encode() + payload)
            await w.drain()
            raw = await r.read()
            w.close()
            head, _, rest = raw.partition(b"\r\n\r\n")
            await service.drain()
            return int(head.split()[1]), json.loads(rest)

        await send(P.Hello(P.ROLE_FRONT))
        clock.advance(50)
        telemetry, _ = agent.tick(0.05, clock.now_ms())
        await send(telemetry)
        await send(agent.next_frame())

        cases = []
        for name, body in CASES:
            status, response = await http("POST", "/command", body)
            cases.append({"name": name, "request": {"method": "POST",
                                                    "path": "/command",
                                                    "body": body},
                          "response": {"status": status, "body": response}})

        _, snapshot = await http("GET", "/snapshot")
        _, detections = await http("GET", "/detections")

        writer.close()
        http_server.close()
        agent_server.close()
        await service.close()

    return {"cases": cases, "snapshot": snapshot, "detections": detections,
            "camera": {"width": cam.image_w, "height": cam.image_h}}


def main() -> None:
    fixture = asyncio.run(record())
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT} ({len(fixture['cases'])} cases)")


if __name__ == "__main__":
    main()
