"""Central-node session logic: ingest, operator commands, snapshots,
and the event-log replay reducer.

Everything here is synchronous and single-owner; the network service
wraps it in one serialized loop per front-node connection. The event log
is written so that folding it back (reduce_records) reconstructs the
live snapshot exactly.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable

from PIL import Image

from . import commands as cmd
from . import dialog as dlg
from . import protocol
from .clocks import WallClock
from .detection import (DetectionSet, GridConfig, InferenceBackend,
                        LetterboxMap, PipelineError, PixelDetection,
                        run_pipeline)
from .eventlog import EventRecord
from .kinematics import DriveGeometry, Twist

log = logging.getLogger(__name__)

DEFAULT_HTTP_LISTEN = "0.0.0.0:8080"


def detections_to_json(ds: DetectionSet | None) -> dict:
    """The normative detection JSON shape served to the console."""
    if ds is None:
        return {"timestamp_ms": None, "items": []}
    return {
        "timestamp_ms": ds.timestamp_ms,
        "items": [
            {"class": d.class_name, "score": d.score, "box": list(d.box)}
            for d in ds.items
        ],
    }


def detections_to_wire(ds: DetectionSet) -> protocol.Detections:
    return protocol.Detections(
        ds.timestamp_ms,
        tuple(protocol.DetectionEntry(d.class_id, d.score, d.box) for d in ds.items),
    )


def build_snapshot(telemetry: dict | None, telemetry_arrival_ms: int | None,
                   detections: dict | None, dialog_view: dict,
                   frame_ts: int | None, now_ms: int,
                   log_healthy: bool = True) -> dict:
    """Shared snapshot shape for the live session and the log reducer."""
    age = None if telemetry_arrival_ms is None else max(0, now_ms - telemetry_arrival_ms)
    return {
        "telemetry": telemetry,
        "detections": detections,
        "dialog": dialog_view,
        "frame": None if frame_ts is None else {"timestamp_ms": frame_ts},
        "link": {"telemetry_age_ms": age},
        "log_healthy": log_healthy,
    }


def _dialog_view(state: dlg.DialogState, prompt: str) -> dict:
    return {"phase": state.phase, "source": state.source,
            "target": state.target, "prompt": prompt}


@dataclass
class CommandOutcome:
    """Result of one operator request.

    `messages` were already issued (seq assigned, records appended);
    `plan` is for the caller to execute on its own timeline via
    issue_drive/issue_stop.
    """

    status: int
    response: dict
    messages: list[protocol.WireMessage] = field(default_factory=list)
    plan: list[tuple[Twist, float]] | None = None
    records: list[EventRecord] = field(default_factory=list)


class SessionCore:
    """State and rules for the single front-node session."""

    def __init__(self, backend: InferenceBackend, cfg: GridConfig,
                 translator: dlg.TranslatorClient | None = None,
                 languages: dict[str, str] | None = None,
                 synth: dlg.SpeechSynthClient | None = None,
                 geometry: DriveGeometry | None = None,
                 cruise: cmd.CruiseLimits = cmd.CruiseLimits(),
                 net_size: tuple[int, int] | None = None,
                 clock=None):
        self.backend = backend
        self.cfg = cfg
        self.translator = translator or dlg.StaticTranslator()
        self.languages = languages or dlg.load_languages()
        self.synth = synth
        self.geometry = geometry or DriveGeometry()
        self.cruise = cruise
        self.net_size = net_size
        self.clock = clock or WallClock()

        self.connected = False
        self.telemetry: protocol.Telemetry | None = None
        self.telemetry_arrival_ms: int | None = None
        self.last_telemetry_seq: int | None = None
        self.frame: tuple[int, bytes] | None = None
        self.detections: DetectionSet | None = None
        self.dialog = dlg.IDLE_STATE
        self.last_prompt = ""
        self._next_seq = 1

    # -- inbound ---------------------------------------------------------

    def ingest(self, m: protocol.WireMessage, now_ms: int
               ) -> tuple[list[protocol.WireMessage], list[EventRecord]]:
        """Apply one front-node message; returns (replies, event records).

        Frame processing runs inline here; the async service splits it
        onto a worker through store_frame/detect_frame/store_detection_result.
        """
        if isinstance(m, protocol.Telemetry):
            return [], self._ingest_telemetry(m, now_ms)
        if isinstance(m, protocol.FrameData):
            self.store_frame(m)
            return [], self.store_detection_result(self.detect_frame(m), now_ms)
        if isinstance(m, protocol.Detections):
            ds = DetectionSet(m.timestamp_ms, tuple(
                PixelDetection(e.class_id, self._class_name(e.class_id),
                               e.score, e.box)
                for e in m.items))
            return [], self.store_detection_result(ds, now_ms)
        if isinstance(m, protocol.Ping):
            return [protocol.Pong(m.nonce)], []
        if isinstance(m, protocol.Hello):
            return [], []
        log.warning("central server ignoring %s", type(m).__name__)
        return [], []

    def _class_name(self, class_id: int) -> str:
        if 0 <= class_id < self.cfg.class_count:
            return self.cfg.class_names[class_id]
        return f"class{class_id}"

    def _ingest_telemetry(self, m: protocol.Telemetry, now_ms: int) -> list[EventRecord]:
        if self.last_telemetry_seq is not None and m.seq <= self.last_telemetry_seq:
            log.warning("stale telemetry seq %d <= %d", m.seq, self.last_telemetry_seq)
            return []
        self.last_telemetry_seq = m.seq
        self.telemetry = m
        self.telemetry_arrival_ms = now_ms
        body = {"pose": {"x": m.pose.x, "y": m.pose.y, "theta": m.pose.theta},
                "battery_pct": m.battery_pct, "link_age_ms": m.link_age_ms,
                "seq": m.seq}
        return [EventRecord(now_ms, "telemetry", body)]

    def store_frame(self, m: protocol.FrameData) -> None:
        self.frame = (m.timestamp_ms, m.payload)

    def _letterbox_for(self, jpeg: bytes) -> LetterboxMap:
        with Image.open(io.BytesIO(jpeg)) as img:
            src_w, src_h = img.size
        if self.net_size is None:
            return LetterboxMap.identity(src_w, src_h)
        return LetterboxMap(src_w, src_h, self.net_size[0], self.net_size[1])

    def detect_frame(self, m: protocol.FrameData) -> DetectionSet | PipelineError:
        """Pure compute step; safe to run off the session loop."""
        try:
            lbox = self._letterbox_for(m.payload)
            return run_pipeline(m.payload, self.backend, self.cfg, lbox,
                                m.timestamp_ms)
        except PipelineError as exc:
            return exc
        except Exception as exc:  # jpeg header parse and friends
            return PipelineError(m.timestamp_ms, str(exc))

    def store_detection_result(self, result: DetectionSet | PipelineError,
                               now_ms: int) -> list[EventRecord]:
        if isinstance(result, PipelineError):
            body = {"timestamp_ms": result.timestamp_ms, "message": str(result)}
            return [EventRecord(now_ms, "error", body)]
        # Stale results for superseded frames are dropped.
        if self.detections is not None and result.timestamp_ms < self.detections.timestamp_ms:
            return []
        self.detections = result
        return [EventRecord(now_ms, "detection", detections_to_json(result))]

    # -- outbound commands -------------------------------------------------

    def issue_drive(self, twist: Twist, now_ms: int
                    ) -> tuple[protocol.DriveCmd, EventRecord]:
        m = protocol.DriveCmd(twist.linear, twist.angular, self._take_seq())
        body = {"type": "drive", "linear": m.linear, "angular": m.angular,
                "seq": m.seq}
        return m, EventRecord(now_ms, "command", body)

    def issue_stop(self, now_ms: int) -> tuple[protocol.StopCmd, EventRecord]:
        m = protocol.StopCmd(self._take_seq())
        return m, EventRecord(now_ms, "command", {"type": "stop", "seq": m.seq})

    def issue_speak(self, lang: str, text: str, now_ms: int
                    ) -> tuple[protocol.Speak, EventRecord]:
        m = protocol.Speak(lang, text)
        return m, EventRecord(now_ms, "command",
                              {"type": "speak", "lang": lang, "text": text})

    def _take_seq(self) -> int:
        seq = self._next_seq
        self._next_seq += 1
        return seq

    # -- operator API -------------------------------------------------------

    def operator_command(self, body: dict, now_ms: int) -> CommandOutcome:
        """Handle one POST /command body."""
        if not isinstance(body, dict):
            return CommandOutcome(400, _err("bad_request", "body must be a JSON object"))
        if "drive" in body:
            return self._direct_drive(body["drive"], now_ms)
        if body.get("stop"):
            return self._direct_stop(now_ms)
        if "dialog" in body:
            return self._dialog_event(body["dialog"], now_ms)
        if "transcript" in body:
            return self._transcript(body["transcript"], now_ms)
        return CommandOutcome(400, _err("bad_request",
                                        "expected drive, stop, dialog or transcript"))

    def _direct_drive(self, spec: dict, now_ms: int) -> CommandOutcome:
        if not self.connected:
            return CommandOutcome(503, _err("no_front_session", "front node not connected"))
        try:
            twist = Twist(float(spec["linear"]), float(spec.get("angular", 0.0)))
        except (KeyError, TypeError, ValueError):
            return CommandOutcome(400, _err("bad_request", "drive needs linear/angular"))
        m, rec = self.issue_drive(twist, now_ms)
        return CommandOutcome(200, {"ok": True, "sent": {"linear": m.linear,
                                                         "angular": m.angular,
                                                         "seq": m.seq}},
                              messages=[m], records=[rec])

    def _direct_stop(self, now_ms: int) -> CommandOutcome:
        if not self.connected:
            return CommandOutcome(503, _err("no_front_session", "front node not connected"))
        m, rec = self.issue_stop(now_ms)
        return CommandOutcome(200, {"ok": True, "sent": {"stop": True, "seq": m.seq}},
                              messages=[m], records=[rec])

    def _dialog_event(self, spec: dict, now_ms: int) -> CommandOutcome:
        event = _parse_dialog_event(spec)
        if event is None:
            return CommandOutcome(400, _err("bad_request", "unknown dialog event"))
        state, action = dlg.advance_dialog(self.dialog, event, self.languages)
        self.dialog = state
        self.last_prompt = action.text
        rec = self._dialog_record(action, now_ms)
        if action.kind == dlg.ACTION_DISPATCH:
            outcome = self._dispatch(action.transcript, now_ms)
            outcome.records.insert(0, rec)
            outcome.response["dialog"] = _dialog_view(state, action.text)
            return outcome
        return CommandOutcome(200, {"ok": True,
                                    "dialog": _dialog_view(state, action.text)},
                              records=[rec])

    def _transcript(self, text, now_ms: int) -> CommandOutcome:
        if not isinstance(text, str) or not text.strip():
            return CommandOutcome(400, _err("bad_request", "transcript must be non-empty"))
        if self.dialog.phase == dlg.PHASE_READY:
            self.dialog = replace(self.dialog, pending_transcript=text)
            return self._dispatch(text, now_ms)
        detected, confidence = self.translator.detect(text)
        state, action = dlg.advance_dialog(
            self.dialog, dlg.TranscriptReceived(text, detected), self.languages)
        self.dialog = state
        self.last_prompt = action.text
        rec = self._dialog_record(action, now_ms)
        return CommandOutcome(200, {"ok": True, "detected": {
                                        "lang": detected, "confidence": confidence},
                                    "dialog": _dialog_view(state, action.text)},
                              records=[rec])

    def _dialog_record(self, action: dlg.DialogAction, now_ms: int) -> EventRecord:
        body = {"phase": self.dialog.phase, "source": self.dialog.source,
                "target": self.dialog.target, "action": action.kind,
                "prompt": action.text}
        return EventRecord(now_ms, "dialog", body)

    def _dispatch(self, transcript: str, now_ms: int) -> CommandOutcome:
        """Ready-phase path: translate to the command language, parse, act."""
        source = self.dialog.source or "en"
        target = self.dialog.target or "en"
        try:
            english = dlg.translate_command(transcript, source, "en", self.translator)
        except dlg.TranslationUnavailable as exc:
            return CommandOutcome(503, _err("translation_unavailable", str(exc)),
                                  records=[EventRecord(now_ms, "error",
                                                       {"message": str(exc)})])
        try:
            intent = cmd.parse_intent(english)
        except cmd.OutOfRange as exc:
            return self._reject(422, "out_of_range", str(exc), now_ms)
        except cmd.UnrecognizedCommand as exc:
            return self._reject(422, "unrecognized_command", str(exc), now_ms)

        if isinstance(intent, cmd.QueryObjects):
            return self._query_objects(target, now_ms)
        if isinstance(intent, cmd.Speak):
            return self._speak(intent.text, target, now_ms)
        if isinstance(intent, cmd.Stop):
            return self._direct_stop(now_ms)
        if not self.connected:
            return CommandOutcome(503, _err("no_front_session",
                                            "front node not connected"))
        plan = cmd.intent_to_plan(intent, self.geometry, self.cruise)
        return CommandOutcome(200, {"ok": True, "command": english,
                                    "plan": [{"linear": t.linear,
                                              "angular": t.angular,
                                              "duration_s": d}
                                             for t, d in plan]},
                              plan=plan)

    def _reject(self, status: int, kind: str, message: str, now_ms: int
                ) -> CommandOutcome:
        return CommandOutcome(status, _err(kind, message),
                              records=[EventRecord(now_ms, "error",
                                                   {"type": kind,
                                                    "message": message})])

    def _query_objects(self, target: str, now_ms: int) -> CommandOutcome:
        names = [d.class_name for d in self.detections.items] if self.detections else []
        english = "I can see: " + ", ".join(names) if names else "I can see nothing"
        text, records = self._localize(english, target, now_ms)
        messages: list[protocol.WireMessage] = []
        if self.connected:
            m, rec = self.issue_speak(target, text, now_ms)
            messages.append(m)
            records.append(rec)
        self._synthesize(text, target)
        return CommandOutcome(200, {"ok": True, "classes": names,
                                    "speak": text,
                                    "detections": detections_to_json(self.detections)},
                              messages=messages, records=records)

    def _speak(self, text: str, target: str, now_ms: int) -> CommandOutcome:
        if not self.connected:
            return CommandOutcome(503, _err("no_front_session",
                                            "front node not connected"))
        localized, records = self._localize(text, target, now_ms)
        m, rec = self.issue_speak(target, localized, now_ms)
        records.append(rec)
        self._synthesize(localized, target)
        return CommandOutcome(200, {"ok": True, "speak": localized},
                              messages=[m], records=records)

    def _localize(self, english: str, target: str, now_ms: int
                  ) -> tuple[str, list[EventRecord]]:
        """Translate a response; fall back to English when the table misses."""
        try:
            return dlg.translate_command(english, "en", target, self.translator), []
        except dlg.TranslationUnavailable as exc:
            return english, [EventRecord(now_ms, "error",
                                         {"message": f"response translation: {exc}"})]

    def _synthesize(self, text: str, lang: str) -> None:
        if self.synth is None:
            return
        try:
            self.synth.speak(text, lang)
        except dlg.UnsupportedLanguage:
            log.warning("speech synth rejected language %s", lang)

    # -- views ---------------------------------------------------------------

    def snapshot(self, now_ms: int, log_healthy: bool = True) -> dict:
        telemetry = None
        if self.telemetry is not None:
            t = self.telemetry
            telemetry = {"pose": {"x": t.pose.x, "y": t.pose.y,
                                  "theta": t.pose.theta},
                         "battery_pct": t.battery_pct,
                         "link_age_ms": t.link_age_ms, "seq": t.seq}
        return build_snapshot(
            telemetry, self.telemetry_arrival_ms,
            detections_to_json(self.detections) if self.detections else None,
            _dialog_view(self.dialog, self.last_prompt),
            self.frame[0] if self.frame else None,
            now_ms, log_healthy)


def _err(kind: str, message: str) -> dict:
    return {"ok": False, "error": {"type": kind, "message": message}}


def _parse_dialog_event(spec: dict) -> dlg.DialogEvent | None:
    if not isinstance(spec, dict):
        return None
    if "ack" in spec:
        return dlg.UserAck(bool(spec["ack"]))
    if "source" in spec:
        return dlg.SourceProvided(str(spec["source"]))
    if "target" in spec:
        return dlg.TargetProvided(str(spec["target"]))
    if spec.get("reset"):
        return dlg.Reset()
    return None


def reduce_records(records: Iterable[EventRecord], now_ms: int,
                   log_healthy: bool = True) -> dict:
    """Fold an event log back into the snapshot it reproduces."""
    telemetry = None
    telemetry_arrival = None
    detections = None
    dialog_view = _dialog_view(dlg.IDLE_STATE, "")
    frame_ts: int | None = None
    for r in records:
        if r.kind == "telemetry":
            telemetry = r.body
            telemetry_arrival = r.timestamp_ms
        elif r.kind == "detection":
            detections = r.body
            ts = r.body.get("timestamp_ms")
            if ts is not None:
                frame_ts = ts if frame_ts is None else max(frame_ts, ts)
        elif r.kind == "error":
            ts = r.body.get("timestamp_ms")
            if ts is not None:
                frame_ts = ts if frame_ts is None else max(frame_ts, ts)
        elif r.kind == "dialog":
            dialog_view = {"phase": r.body.get("phase"),
                           "source": r.body.get("source"),
                           "target": r.body.get("target"),
                           "prompt": r.body.get("prompt", "")}
    return build_snapshot(telemetry, telemetry_arrival, detections,
                          dialog_view, frame_ts, now_ms, log_healthy)
