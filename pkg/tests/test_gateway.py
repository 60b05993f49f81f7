import json

import httpx
import pytest

from storagebench.errors import ConfigurationError, DeliveryError
from storagebench.gateway import (
    ChatGateway,
    CompletionRequest,
    EndpointConfig,
    ImagePayload,
)


class FakeClock:
    """Time advances only through sleep; sleeps are recorded."""

    def __init__(self, start=0.0):
        self.now = start
        self.sleeps = []

    def time(self):
        return self.now

    def sleep(self, seconds):
        self.sleeps.append(seconds)
        self.now += seconds


class ScriptedServer:
    """Responds per-call from a list of status codes; 200 returns chat JSON."""

    def __init__(self, statuses, text="Best container: 2"):
        self.statuses = list(statuses)
        self.calls = []

    def handler(self, request: httpx.Request) -> httpx.Response:
        self.calls.append(json.loads(request.content))
        status = self.statuses.pop(0) if self.statuses else 200
        if status != 200:
            return httpx.Response(status, text="error")
        return httpx.Response(
            200,
            json={"choices": [{"message": {"content": "Best container: 2"}}]},
        )


def make_gateway(server, clock=None, audit=None):
    client = httpx.Client(transport=httpx.MockTransport(server.handler))
    return ChatGateway(clock=clock or FakeClock(), client=client, audit_log_path=audit)


CFG = EndpointConfig(base_url="https://endpoint.test/v1/chat/completions", model_name="m")


class TestRetries:
    def test_first_attempt_success(self):
        server = ScriptedServer([200])
        clock = FakeClock()
        response = make_gateway(server, clock).complete(CFG, CompletionRequest("hi"))
        assert response.attempt_count == 1
        assert clock.sleeps == []

    def test_two_failures_then_success_delays_double(self):
        server = ScriptedServer([500, 503, 200])
        clock = FakeClock()
        response = make_gateway(server, clock).complete(CFG, CompletionRequest("hi"))
        assert response.attempt_count == 3
        assert clock.sleeps == [5.0, 10.0]

    def test_exhaustion_raises_with_last_status(self):
        server = ScriptedServer([500, 500, 500, 500])
        clock = FakeClock()
        with pytest.raises(DeliveryError) as err:
            make_gateway(server, clock).complete(CFG, CompletionRequest("hi"))
        assert err.value.last_status == 500
        assert clock.sleeps == [5.0, 10.0, 20.0]

    def test_429_is_retried(self):
        server = ScriptedServer([429, 200])
        response = make_gateway(server).complete(CFG, CompletionRequest("hi"))
        assert response.attempt_count == 2

    def test_client_error_fails_fast(self):
        server = ScriptedServer([401])
        clock = FakeClock()
        with pytest.raises(DeliveryError) as err:
            make_gateway(server, clock).complete(CFG, CompletionRequest("hi"))
        assert err.value.last_status == 401
        assert clock.sleeps == []


class TestPause:
    def test_pause_enforced_between_successful_calls(self):
        server = ScriptedServer([200, 200])
        clock = FakeClock()
        gateway = make_gateway(server, clock)
        gateway.complete(CFG, CompletionRequest("one"))
        gateway.complete(CFG, CompletionRequest("two"))
        assert clock.sleeps == [1.0]

    def test_distinct_configs_do_not_share_pause(self):
        server = ScriptedServer([200, 200])
        clock = FakeClock()
        gateway = make_gateway(server, clock)
        other = EndpointConfig(base_url="https://endpoint.test/other", model_name="m2")
        gateway.complete(CFG, CompletionRequest("one"))
        gateway.complete(other, CompletionRequest("two"))
        assert clock.sleeps == []


class TestRequestShape:
    def test_system_and_user_messages(self):
        server = ScriptedServer([200])
        make_gateway(server).complete(
            CFG, CompletionRequest("user text", system_text="system text")
        )
        body = server.calls[0]
        assert body["model"] == "m"
        assert body["messages"][0] == {"role": "system", "content": "system text"}
        assert body["messages"][1] == {"role": "user", "content": "user text"}

    def test_image_becomes_data_url_part(self):
        server = ScriptedServer([200])
        make_gateway(server).complete(
            CFG,
            CompletionRequest("look", image=ImagePayload(data_base64="QUJD", media_type="image/jpeg")),
        )
        content = server.calls[0]["messages"][0]["content"]
        assert content[0] == {"type": "text", "text": "look"}
        assert content[1]["image_url"]["url"] == "data:image/jpeg;base64,QUJD"

    def test_missing_api_key_env(self, monkeypatch):
        monkeypatch.delenv("STORAGEBENCH_TEST_KEY", raising=False)
        cfg = EndpointConfig(
            base_url="https://endpoint.test/x",
            model_name="m",
            api_key_env_var="STORAGEBENCH_TEST_KEY",
        )
        server = ScriptedServer([200])
        with pytest.raises(ConfigurationError):
            make_gateway(server).complete(cfg, CompletionRequest("hi"))

    def test_api_key_header(self, monkeypatch):
        monkeypatch.setenv("STORAGEBENCH_TEST_KEY", "sk-123")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("Authorization")
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        gateway = ChatGateway(
            clock=FakeClock(), client=httpx.Client(transport=httpx.MockTransport(handler))
        )
        cfg = EndpointConfig(
            base_url="https://endpoint.test/x",
            model_name="m",
            api_key_env_var="STORAGEBENCH_TEST_KEY",
        )
        gateway.complete(cfg, CompletionRequest("hi"))
        assert seen["auth"] == "Bearer sk-123"


class TestResponseHandling:
    def test_raw_text_untrimmed(self):
        def handler(request):
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "  padded  \n"}}]}
            )

        gateway = ChatGateway(
            clock=FakeClock(), client=httpx.Client(transport=httpx.MockTransport(handler))
        )
        response = gateway.complete(CFG, CompletionRequest("hi"))
        assert response.raw_text == "  padded  \n"

    def test_plain_text_body_passthrough(self):
        def handler(request):
            return httpx.Response(200, text="Best container: 7")

        gateway = ChatGateway(
            clock=FakeClock(), client=httpx.Client(transport=httpx.MockTransport(handler))
        )
        assert gateway.complete(CFG, CompletionRequest("hi")).raw_text == "Best container: 7"

    def test_audit_log_written(self, tmp_path):
        audit = tmp_path / "audit.jsonl"
        server = ScriptedServer([200])
        make_gateway(server, audit=str(audit)).complete(CFG, CompletionRequest("hi"))
        entry = json.loads(audit.read_text().splitlines()[0])
        assert entry["status"] == 200
        assert entry["user_text"] == "hi"
        assert "Authorization" not in json.dumps(entry)
