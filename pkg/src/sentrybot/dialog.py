"""Language-confirmation dialog and the translation/speech client seams.

The flow mirrors the voice pipeline: a transcript arrives with a detected
language, the user confirms it (or names the right one), then picks the
language responses should come back in; only then is the pending
transcript translated and dispatched as a command.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, replace
from importlib import resources
from typing import Mapping, Protocol, Union

PHASE_IDLE = "idle"
PHASE_AWAIT_SOURCE_CONFIRM = "await_source_confirm"
PHASE_AWAIT_MANUAL_SOURCE = "await_manual_source"
PHASE_AWAIT_TARGET = "await_target"
PHASE_READY = "ready"

ACTION_NONE = "none"
ACTION_REPROMPT = "reprompt"
ACTION_CONFIRM_SOURCE = "prompt_confirm_source"
ACTION_ASK_SOURCE = "prompt_ask_source"
ACTION_ASK_TARGET = "prompt_ask_target"
ACTION_DISPATCH = "translate_dispatch"


class TranslationUnavailable(RuntimeError):
    """The translator client failed; the dialog stays usable for retry."""


class UnsupportedLanguage(ValueError):
    def __init__(self, lang: str):
        super().__init__(f"unsupported language {lang!r}")
        self.lang = lang


def load_languages(path=None) -> dict[str, str]:
    """Supported-language table: tag -> display name."""
    if path is None:
        text = resources.files("sentrybot.data").joinpath("languages.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    table: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tag, _, name = line.partition(" ")
        table[tag] = name.strip() or tag
    if not table:
        raise ValueError("language table is empty")
    return table


@dataclass(frozen=True)
class DialogState:
    phase: str = PHASE_IDLE
    detected_source: str | None = None
    source: str | None = None
    target: str | None = None
    pending_transcript: str = ""


IDLE_STATE = DialogState()


@dataclass(frozen=True)
class TranscriptReceived:
    text: str
    detected_lang: str


@dataclass(frozen=True)
class UserAck:
    yes: bool


@dataclass(frozen=True)
class SourceProvided:
    lang: str


@dataclass(frozen=True)
class TargetProvided:
    lang: str


@dataclass(frozen=True)
class Reset:
    pass


DialogEvent = Union[TranscriptReceived, UserAck, SourceProvided, TargetProvided, Reset]


@dataclass(frozen=True)
class DialogAction:
    """What the caller should do next: show a prompt, or translate and
    dispatch the pending transcript."""

    kind: str
    text: str = ""
    source: str | None = None
    target: str | None = None
    transcript: str = ""
    choices: tuple[str, ...] = ()


def _display(lang: str, languages: Mapping[str, str]) -> str:
    return languages.get(lang, lang)


def advance_dialog(state: DialogState, event: DialogEvent,
                   languages: Mapping[str, str] | None = None
                   ) -> tuple[DialogState, DialogAction]:
    """Total transition function of the language dialog.

    Unknown (state, event) pairs never fail; they leave the state alone
    and re-prompt, since voice input arrives out of order all the time.
    """
    langs = load_languages() if languages is None else languages

    if isinstance(event, Reset):
        return IDLE_STATE, DialogAction(ACTION_NONE)

    if state.phase == PHASE_IDLE and isinstance(event, TranscriptReceived):
        if event.detected_lang not in langs:
            # Detection fell outside the supported set: go straight to a
            # manual choice so the state only ever holds supported tags.
            nxt = DialogState(PHASE_AWAIT_MANUAL_SOURCE,
                              pending_transcript=event.text)
            return nxt, _ask_source(langs)
        nxt = DialogState(PHASE_AWAIT_SOURCE_CONFIRM,
                          detected_source=event.detected_lang,
                          pending_transcript=event.text)
        return nxt, DialogAction(
            ACTION_CONFIRM_SOURCE,
            text=f"Detected {_display(event.detected_lang, langs)}. Is that right?",
            source=event.detected_lang, choices=("yes", "no"))

    if state.phase == PHASE_AWAIT_SOURCE_CONFIRM and isinstance(event, UserAck):
        if event.yes:
            nxt = replace(state, phase=PHASE_AWAIT_TARGET,
                          source=state.detected_source)
            return nxt, _ask_target(langs)
        return replace(state, phase=PHASE_AWAIT_MANUAL_SOURCE), _ask_source(langs)

    if state.phase == PHASE_AWAIT_MANUAL_SOURCE and isinstance(event, SourceProvided):
        if event.lang not in langs:
            return state, _ask_source(langs)
        nxt = replace(state, phase=PHASE_AWAIT_TARGET, source=event.lang)
        return nxt, _ask_target(langs)

    if state.phase == PHASE_AWAIT_TARGET and isinstance(event, TargetProvided):
        if event.lang not in langs:
            return state, _ask_target(langs)
        nxt = replace(state, phase=PHASE_READY, target=event.lang)
        return nxt, DialogAction(
            ACTION_DISPATCH,
            text=f"Languages set: {_display(nxt.source, langs)} to "
                 f"{_display(event.lang, langs)}.",
            source=nxt.source, target=event.lang,
            transcript=state.pending_transcript)

    return state, DialogAction(ACTION_REPROMPT, text=_reprompt_text(state, langs))


def _ask_source(langs: Mapping[str, str]) -> DialogAction:
    return DialogAction(ACTION_ASK_SOURCE, text="Which language are you speaking?",
                        choices=tuple(langs))


def _ask_target(langs: Mapping[str, str]) -> DialogAction:
    return DialogAction(ACTION_ASK_TARGET,
                        text="Which language should I answer in?",
                        choices=tuple(langs))


def _reprompt_text(state: DialogState, langs: Mapping[str, str]) -> str:
    if state.phase == PHASE_AWAIT_SOURCE_CONFIRM:
        return (f"Please confirm: is your language "
                f"{_display(state.detected_source or '?', langs)}?")
    if state.phase == PHASE_AWAIT_MANUAL_SOURCE:
        return "Which language are you speaking?"
    if state.phase == PHASE_AWAIT_TARGET:
        return "Which language should I answer in?"
    if state.phase == PHASE_READY:
        return "Languages are set; say a command."
    return "Say a command to begin."


class TranslatorClient(Protocol):
    """Seam for the detect/translate service."""

    def detect(self, text: str) -> tuple[str, float]: ...

    def translate(self, text: str, source: str, target: str) -> str: ...


class SpeechSynthClient(Protocol):
    """Seam for text-to-speech output."""

    def speak(self, text: str, lang: str) -> int: ...


def translate_command(transcript: str, source: str, target: str,
                      tc: TranslatorClient) -> str:
    """Translate a Ready-phase transcript, identity when the pair matches."""
    if source == target:
        return transcript
    try:
        return tc.translate(transcript, source, target)
    except TranslationUnavailable:
        raise
    except Exception as exc:
        raise TranslationUnavailable(str(exc)) from exc


def _load_default_phrases() -> str:
    return resources.files("sentrybot.data").joinpath("phrases.tsv").read_text("utf-8")


class StaticTranslator:
    """Deterministic table-backed translator for tests and offline runs.

    The table is tab-separated: source_lang, target_lang, source_text,
    target_text. detect() matches known phrases first, then falls back to
    a script heuristic so the result is stable for arbitrary input.
    """

    def __init__(self, table_path=None):
        if table_path is None:
            text = _load_default_phrases()
        else:
            with open(table_path, encoding="utf-8") as fh:
                text = fh.read()
        self._table: dict[tuple[str, str, str], str] = {}
        self._phrase_lang: dict[str, str] = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            src_lang, dst_lang, src_text, dst_text = line.split("\t")
            self._table[(src_lang, dst_lang, src_text)] = dst_text
            self._phrase_lang.setdefault(src_text, src_lang)

    def detect(self, text: str) -> tuple[str, float]:
        normalized = text.strip()
        if normalized in self._phrase_lang:
            return self._phrase_lang[normalized], 0.95
        for ch in normalized:
            if unicodedata.name(ch, "").startswith("DEVANAGARI"):
                return "hi", 0.8
        if all(ord(ch) < 128 for ch in normalized):
            return "en", 0.6
        return "en", 0.3

    def translate(self, text: str, source: str, target: str) -> str:
        if source == target:
            return text
        key = (source, target, text.strip())
        if key not in self._table:
            raise TranslationUnavailable(
                f"no {source}->{target} entry for {text!r}")
        return self._table[key]


class FailingTranslator:
    """Always-broken client for failure-path tests."""

    def detect(self, text: str) -> tuple[str, float]:
        raise TranslationUnavailable("detector offline")

    def translate(self, text: str, source: str, target: str) -> str:
        raise TranslationUnavailable("translator offline")


class RecordingSynth:
    """Speech stub that records utterances instead of making sound."""

    def __init__(self, supported: Mapping[str, str] | None = None):
        self._supported = dict(supported) if supported is not None else load_languages()
        self.utterances: list[tuple[str, str]] = []

    def speak(self, text: str, lang: str) -> int:
        if lang not in self._supported:
            raise UnsupportedLanguage(lang)
        self.utterances.append((lang, text))
        return len(self.utterances)
