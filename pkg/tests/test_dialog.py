import itertools

import pytest

from sentrybot import dialog as d

LANGS = {"en": "English", "hi": "Hindi", "fr": "French"}


def advance(state, event):
    return d.advance_dialog(state, event, LANGS)


class TestHappyPath:
    def test_three_events_to_dispatch(self):
        state = d.IDLE_STATE

        state, action = advance(state, d.TranscriptReceived("आगे बढ़ो", "hi"))
        assert state.phase == d.PHASE_AWAIT_SOURCE_CONFIRM
        assert action.kind == d.ACTION_CONFIRM_SOURCE
        assert "Hindi" in action.text
        assert state.pending_transcript == "आगे बढ़ो"

        state, action = advance(state, d.UserAck(True))
        assert state.phase == d.PHASE_AWAIT_TARGET
        assert action.kind == d.ACTION_ASK_TARGET
        assert state.source == "hi"

        state, action = advance(state, d.TargetProvided("en"))
        assert state.phase == d.PHASE_READY
        assert action.kind == d.ACTION_DISPATCH
        assert action.transcript == "आगे बढ़ो"
        assert (state.source, state.target) == ("hi", "en")

    def test_manual_source_detour(self):
        state, _ = advance(d.IDLE_STATE, d.TranscriptReceived("bonjour", "en"))
        state, action = advance(state, d.UserAck(False))
        assert state.phase == d.PHASE_AWAIT_MANUAL_SOURCE
        assert action.kind == d.ACTION_ASK_SOURCE
        state, action = advance(state, d.SourceProvided("fr"))
        assert state.phase == d.PHASE_AWAIT_TARGET
        assert state.source == "fr"

    def test_unsupported_detection_goes_manual(self):
        state, action = advance(d.IDLE_STATE, d.TranscriptReceived("zzz", "tlh"))
        assert state.phase == d.PHASE_AWAIT_MANUAL_SOURCE
        assert action.kind == d.ACTION_ASK_SOURCE

    def test_unsupported_choices_reprompt(self):
        state, _ = advance(d.IDLE_STATE, d.TranscriptReceived("zzz", "tlh"))
        state2, action = advance(state, d.SourceProvided("tlh"))
        assert state2 == state
        assert action.kind == d.ACTION_ASK_SOURCE
        state3, _ = advance(state, d.SourceProvided("hi"))
        state4, action = advance(state3, d.TargetProvided("nope"))
        assert state4 == state3
        assert action.kind == d.ACTION_ASK_TARGET


def _event_samples():
    return (d.TranscriptReceived("hello", "en"), d.UserAck(True), d.UserAck(False),
            d.SourceProvided("hi"), d.SourceProvided("xx"),
            d.TargetProvided("fr"), d.TargetProvided("xx"), d.Reset())


def _state_samples():
    return (
        d.IDLE_STATE,
        d.DialogState(d.PHASE_AWAIT_SOURCE_CONFIRM, detected_source="hi",
                      pending_transcript="t"),
        d.DialogState(d.PHASE_AWAIT_MANUAL_SOURCE, pending_transcript="t"),
        d.DialogState(d.PHASE_AWAIT_TARGET, detected_source="hi", source="hi",
                      pending_transcript="t"),
        d.DialogState(d.PHASE_READY, source="hi", target="en",
                      pending_transcript="t"),
    )


class TestTotality:
    def test_every_state_event_pair_is_handled(self):
        valid_phases = {d.PHASE_IDLE, d.PHASE_AWAIT_SOURCE_CONFIRM,
                        d.PHASE_AWAIT_MANUAL_SOURCE, d.PHASE_AWAIT_TARGET,
                        d.PHASE_READY}
        for state, event in itertools.product(_state_samples(), _event_samples()):
            nxt, action = advance(state, event)
            assert nxt.phase in valid_phases
            assert isinstance(action, d.DialogAction)
            if nxt.phase != d.PHASE_IDLE:
                assert nxt.pending_transcript

    def test_reset_reaches_idle_from_everywhere(self):
        for state in _state_samples():
            nxt, action = advance(state, d.Reset())
            assert nxt == d.IDLE_STATE
            assert action.kind == d.ACTION_NONE

    def test_unlisted_pairs_leave_state_unchanged(self):
        state = d.DialogState(d.PHASE_AWAIT_TARGET, source="hi",
                              pending_transcript="t")
        nxt, action = advance(state, d.UserAck(True))
        assert nxt == state
        assert action.kind == d.ACTION_REPROMPT

    def test_ready_plus_transcript_reprompts(self):
        state = d.DialogState(d.PHASE_READY, source="en", target="en",
                              pending_transcript="t")
        nxt, action = advance(state, d.TranscriptReceived("again", "en"))
        assert nxt == state
        assert action.kind == d.ACTION_REPROMPT


class TestTranslateCommand:
    def test_identity_pair_skips_client(self):
        assert d.translate_command("hello", "en", "en", d.FailingTranslator()) == "hello"

    def test_stub_table(self):
        t = d.StaticTranslator()
        assert d.translate_command("आगे बढ़ो", "hi", "en", t) == "move forward"

    def test_failure_surfaces_as_translation_unavailable(self):
        with pytest.raises(d.TranslationUnavailable):
            d.translate_command("hello", "en", "hi", d.FailingTranslator())

    def test_missing_table_entry(self):
        with pytest.raises(d.TranslationUnavailable):
            d.StaticTranslator().translate("unknown phrase", "hi", "en")


class TestStaticTranslator:
    def test_detect_known_phrase(self):
        lang, confidence = d.StaticTranslator().detect("आगे बढ़ो")
        assert lang == "hi"
        assert confidence >= 0.9

    def test_detect_devanagari_heuristic(self):
        lang, _ = d.StaticTranslator().detect("नमस्ते दुनिया")
        assert lang == "hi"

    def test_detect_ascii_defaults_to_english(self):
        lang, confidence = d.StaticTranslator().detect("move forward")
        assert lang == "en"
        assert 0.0 <= confidence <= 1.0

    def test_identity_translate(self):
        assert d.StaticTranslator().translate("whatever", "fr", "fr") == "whatever"


class TestSpeechSynth:
    def test_records_utterances(self):
        synth = d.RecordingSynth(LANGS)
        assert synth.speak("hello", "en") == 1
        assert synth.speak("नमस्ते", "hi") == 2
        assert synth.utterances == [("en", "hello"), ("hi", "नमस्ते")]

    def test_rejects_unsupported_language(self):
        synth = d.RecordingSynth(LANGS)
        with pytest.raises(d.UnsupportedLanguage):
            synth.speak("hej", "sv")


class TestLanguageTable:
    def test_packaged_table_loads(self):
        table = d.load_languages()
        assert "en" in table
        assert table["hi"] == "Hindi"

    def test_custom_file(self, tmp_path):
        path = tmp_path / "langs.txt"
        path.write_text("# comment\nen English\nxx Mystery\n")
        table = d.load_languages(path)
        assert table == {"en": "English", "xx": "Mystery"}
