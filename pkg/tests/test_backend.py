import json
import threading

import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings, strategies as st

from coassembly.backend import SkillService
from coassembly.errors import BadEnvelope, ProtocolViolation, SessionBusy, UnknownMode
from coassembly.events import EventRouter, EventRule, WorldEvent
from coassembly.protocol import RequestEnvelope, ResponseEnvelope
from coassembly.server import create_app

session_ids = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")), min_size=1, max_size=12
)
texts = st.text(max_size=80)
contexts = st.dictionaries(
    st.text(max_size=10),
    st.one_of(st.text(max_size=20), st.integers(), st.booleans(), st.floats(allow_nan=False)),
    max_size=4,
)


class TestProtocolRoundTrip:
    @settings(max_examples=300)
    @given(
        session=session_ids,
        kind=st.sampled_from(("utterance", "slot-answer", "control")),
        text=texts,
        context=contexts,
    )
    def test_request_round_trip(self, session, kind, text, context):
        envelope = RequestEnvelope(session=session, kind=kind, text=text, context=context)
        assert RequestEnvelope.from_json(envelope.to_json()) == envelope

    @settings(max_examples=300)
    @given(
        session=session_ids,
        speech=st.text(min_size=1, max_size=80),
        end=st.booleans(),
        follow_up=st.one_of(st.none(), st.text(min_size=1, max_size=20)),
        digest=st.text(max_size=12),
    )
    def test_response_round_trip(self, session, speech, end, follow_up, digest):
        envelope = ResponseEnvelope(
            session=session, speech=speech, end=end, follow_up=follow_up, state_digest=digest
        )
        assert ResponseEnvelope.from_json(envelope.to_json()) == envelope


MALFORMED_REQUESTS = [
    ("not json at all", "not valid JSON"),
    (json.dumps([1, 2]), "must be a JSON object"),
    (json.dumps({}), "missing request fields"),
    (json.dumps({"version": 2, "session": "s", "kind": "utterance", "text": "", "context": {}}),
     "unsupported envelope version"),
    (json.dumps({"version": 1, "session": "", "kind": "utterance", "text": "", "context": {}}),
     "session must be a non-empty string"),
    (json.dumps({"version": 1, "session": 3, "kind": "utterance", "text": "", "context": {}}),
     "session must be a non-empty string"),
    (json.dumps({"version": 1, "session": "s", "kind": "telepathy", "text": "", "context": {}}),
     "kind must be one of"),
    (json.dumps({"version": 1, "session": "s", "kind": "utterance", "text": 7, "context": {}}),
     "text must be a string"),
    (json.dumps({"version": 1, "session": "s", "kind": "utterance", "text": "", "context": []}),
     "context must be an object"),
    (json.dumps({"version": 1, "session": "s", "kind": "utterance", "text": "", "context": {},
                 "extra": 1}),
     "unknown request fields"),
    (json.dumps({"version": 1, "session": "s", "kind": "utterance", "context": {}}),
     "missing request fields"),
]


class TestMalformedEnvelopes:
    @pytest.mark.parametrize("raw,message", MALFORMED_REQUESTS)
    def test_rejected_with_documented_error(self, raw, message):
        with pytest.raises(BadEnvelope) as err:
            RequestEnvelope.from_json(raw)
        assert message in str(err.value)

    def test_response_missing_speech(self):
        raw = json.dumps(
            {"version": 1, "session": "s", "follow_up": None, "end": True, "state_digest": ""}
        )
        with pytest.raises(ProtocolViolation) as err:
            ResponseEnvelope.from_json(raw)
        assert "missing response fields" in str(err.value)

    def test_response_empty_speech(self):
        raw = json.dumps(
            {"version": 1, "session": "s", "speech": "", "follow_up": None, "end": False,
             "state_digest": ""}
        )
        with pytest.raises(ProtocolViolation):
            ResponseEnvelope.from_json(raw)


class TestEventRules:
    def router(self):
        rules = (
            EventRule(event="action_failed", dialogue="assist_recovery",
                      payload_map={"description": "description"}),
            EventRule(event="action_failed", dialogue="announce_delivery",
                      where={"action": "fetch_tool"}),
        )
        return EventRouter(rules)

    def test_matching_rule_invokes(self):
        router = self.router()
        event = WorldEvent("action_failed", {"description": "I dropped the carrier",
                                             "action": "deliver_component"})
        invocations = router.route(event)
        assert [i.dialogue for i in invocations] == ["assist_recovery"]
        assert invocations[0].payload == {"description": "I dropped the carrier"}

    def test_unmatched_event_dropped_and_counted(self):
        router = self.router()
        assert router.route(WorldEvent("step_done", {})) == []
        assert router.dropped_events == 1

    def test_two_rules_fire_in_declaration_order(self):
        router = self.router()
        event = WorldEvent("action_failed", {"description": "d", "action": "fetch_tool"})
        invocations = router.route(event)
        assert [i.dialogue for i in invocations] == ["assist_recovery", "announce_delivery"]

    def test_rule_determinism(self):
        router_a, router_b = self.router(), self.router()
        events = [
            WorldEvent("action_failed", {"description": "x", "action": "fetch_tool"}),
            WorldEvent("step_done", {"step": "s1"}),
            WorldEvent("action_failed", {"description": "y", "action": "hold"}),
        ]
        assert [router_a.route(e) for e in events] == [router_b.route(e) for e in events]


@pytest.fixture()
def service(reference_config):
    return SkillService(reference_config, realtime=False)


def envelope(session="s1", kind="utterance", text="", context=None):
    return RequestEnvelope(session=session, kind=kind, text=text, context=context or {})


class TestSkillService:
    def test_screwdriver_request(self, service):
        response = service.handle_request(envelope(text="give me the screwdriver"))
        assert response.speech == "Bringing the screwdriver now."
        assert response.end is True
        assert response.session == "s1"
        assert response.state_digest

    def test_first_contact_creates_session_with_greeting(self, service):
        response = service.handle_request(envelope(session="fresh", kind="control", text="open"))
        assert "fresh" in service.runtime.sessions
        assert response.speech == "Hello! I am ready to assemble the gearbox with you."

    def test_unknown_mode_rejected(self, service):
        with pytest.raises(UnknownMode):
            service.handle_request(envelope(text="hi", context={"mode": "baseline"}))

    def test_unknown_control_verb_rejected(self, service):
        with pytest.raises(BadEnvelope):
            service.handle_request(envelope(kind="control", text="levitate"))

    def test_slot_prompt_flow_over_wire(self, service):
        first = service.handle_request(envelope(text="bring the gear"))
        assert "Which component" in first.speech
        assert first.end is False
        second = service.handle_request(envelope(kind="slot-answer", text="ring gear"))
        assert "Bringing the ring gear now." in second.speech
        assert second.end is True

    def test_session_busy_when_lock_held(self, service):
        lock = service._session_lock("s1")
        assert lock.acquire()
        try:
            with pytest.raises(SessionBusy):
                service.handle_request(envelope(text="hello"))
        finally:
            lock.release()

    def test_publish_event_initiates_dialogue(self, service):
        service.handle_request(envelope(kind="control", text="open"))
        invocations = service.publish_event(
            "action_failed", {"description": "I dropped the sun gear"}
        )
        assert [i.dialogue for i in invocations] == ["assist_recovery"]
        robot_lines = [
            r.payload["text"]
            for r in service.runtime.trace.records
            if r.kind == "utterance" and r.payload["speaker"] == "robot"
        ]
        assert any("I dropped the sun gear" in line for line in robot_lines)

    def test_publish_unmatched_event_counted(self, service):
        before = service.runtime.router.dropped_events
        assert service.publish_event("martian_weather", {}) == []
        assert service.runtime.router.dropped_events == before + 1

    def test_per_session_serialization_under_load(self, reference_config):
        service = SkillService(reference_config, realtime=False)
        errors = []
        def worker(sid):
            for i in range(20):
                try:
                    service.handle_request(envelope(session=sid, text="what are you doing"))
                except SessionBusy:
                    pass
                except Exception as exc:  # pragma: no cover
                    errors.append(exc)
        threads = [threading.Thread(target=worker, args=(f"s{n}",)) for n in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for session in service.runtime.sessions.values():
            log = session.turn_log
            for a, b in zip(log, log[1:]):
                assert not (a.speaker == "user" and b.speaker == "user")


@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


class TestHttpSurface:
    def test_skill_roundtrip(self, client):
        body = envelope(text="give me the screwdriver").to_dict()
        response = client.post("/skill", json=body)
        assert response.status_code == 200
        data = response.json()
        assert data["speech"] == "Bringing the screwdriver now."
        assert data["version"] == 1

    def test_bad_envelope_http_400(self, client):
        response = client.post("/skill", json={"version": 2})
        assert response.status_code == 400
        assert response.json()["error"] == "bad_envelope"

    def test_state_metrics_endpoints(self, client, service):
        service.advance_manual(10_000)
        state = client.get("/state").json()
        assert state["t"] == 10.0
        assert "steps" in state and "robot" in state
        metrics_data = client.get("/metrics").json()
        assert "execution_time" in metrics_data

    def test_events_endpoint(self, client):
        client.post("/skill", json=envelope(kind="control", text="open").to_dict())
        response = client.post(
            "/events",
            json={"kind": "action_failed", "payload": {"description": "I dropped it"}},
        )
        assert response.status_code == 200
        assert response.json()["invoked"][0]["dialogue"] == "assist_recovery"

    def test_stream_no_duplicates_on_reconnect(self, client, service):
        service.advance_manual(15_000)
        first = client.get("/stream?since=0&follow=false")
        lines = [json.loads(l) for l in first.text.splitlines() if l]
        assert lines, "stream should carry records"
        seqs = [l["seq"] for l in lines]
        assert seqs == sorted(set(seqs))
        cursor = seqs[-1] + 1
        second = client.get(f"/stream?since={cursor}&follow=false")
        again = [json.loads(l)["seq"] for l in second.text.splitlines() if l]
        assert not set(again) & set(seqs)

    def test_stream_records_parse_as_trace_records(self, client, service):
        import coassembly.trace as tr

        service.advance_manual(5_000)
        response = client.get("/stream?since=0&follow=false")
        for line in response.text.splitlines():
            if line:
                record = tr.TraceRecord.from_dict(json.loads(line))
                assert record.kind in tr.RECORD_KINDS
