from __future__ import annotations

import pytest

from crossdoc.errors import (
    CapabilityMismatch,
    ProviderUnavailable,
    RateLimited,
    UnparsablePointResponse,
)
from crossdoc.providers import (
    Attachment,
    ChatProvider,
    ChatRequest,
    HttpChatProvider,
    MockChatProvider,
    MockPointingProvider,
    ReplayChatProvider,
    ResponseCache,
    chat,
    parse_points,
    point,
    request_digest,
)


def test_mock_canned_map_by_digest():
    request = ChatRequest(instructions="noop")
    digest = request_digest(request, "mock-chat")
    provider = MockChatProvider(canned={digest: "[]"})
    response = chat(provider, request)
    assert response.text == "[]"
    assert response.request_digest == digest


def test_replay_cache_determinism(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    request = ChatRequest(instructions="explain", user_content="x")
    live = MockChatProvider(handler=lambda r: "answer one")
    first = chat(live, request, cache=cache)

    # replay must run under the recorded model id to hit the same digests
    replay = ReplayChatProvider(model_id="mock-chat")
    second = chat(replay, request, cache=cache)
    third = chat(replay, request, cache=cache)
    assert first.text == second.text == third.text
    assert second.text.encode() == third.text.encode()


def test_replay_miss_is_hard_error(tmp_path):
    cache = ResponseCache(tmp_path / "cache")
    with pytest.raises(ProviderUnavailable):
        chat(ReplayChatProvider(), ChatRequest(instructions="missing"),
             cache=cache, max_attempts=1)


class _FlakyProvider(ChatProvider):
    capabilities = {"accepts_images": True, "accepts_documents": True}

    def __init__(self, failures: int, error=ProviderUnavailable):
        super().__init__("flaky")
        self.failures = failures
        self.error = error
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise self.error("still failing")
        return "recovered"


def test_retry_count_is_exactly_bounded():
    provider = _FlakyProvider(failures=100)
    with pytest.raises(ProviderUnavailable) as exc_info:
        chat(provider, ChatRequest(instructions="x"), max_attempts=4)
    assert provider.calls == 4
    assert exc_info.value.attempts == 4


def test_retry_recovers_before_bound():
    provider = _FlakyProvider(failures=2, error=RateLimited)
    response = chat(provider, ChatRequest(instructions="x"), max_attempts=3)
    assert response.text == "recovered"
    assert provider.calls == 3


def test_backoff_schedule_is_exponential():
    naps = []
    provider = _FlakyProvider(failures=3)
    chat(provider, ChatRequest(instructions="x"), max_attempts=4,
         backoff_seconds=0.1, sleep=naps.append)
    assert naps == [0.1, 0.2, 0.4]


def test_capability_mismatch():
    class TextOnly(ChatProvider):
        capabilities = {"accepts_images": False, "accepts_documents": False}

        def complete(self, request):
            return "nope"

    request = ChatRequest(
        instructions="x", attachments=(Attachment("image", "a.png"),)
    )
    with pytest.raises(CapabilityMismatch):
        chat(TextOnly("text-only"), request)


def test_cache_hit_bypasses_provider(tmp_path):
    cache = ResponseCache(tmp_path)
    request = ChatRequest(instructions="cached")
    counted = _FlakyProvider(failures=0)
    chat(counted, request, cache=cache)
    assert counted.calls == 1
    chat(counted, request, cache=cache)
    assert counted.calls == 1  # second call served from the cache


def test_replay_run_does_zero_network(tmp_path):
    """A replay-mode run never touches the transport."""
    transport_calls = []

    def counting_transport(url, headers, payload):
        transport_calls.append(url)
        return '{"choices": [{"message": {"content": "live answer"}}]}'

    cache = ResponseCache(tmp_path)
    live = HttpChatProvider("http://fake.invalid/chat", "live-model",
                            transport=counting_transport)
    request = ChatRequest(instructions="one question")
    chat(live, request, cache=cache)
    assert len(transport_calls) == 1

    replay = HttpChatProvider("http://fake.invalid/chat", "live-model",
                              transport=counting_transport)
    response = chat(replay, request, cache=cache)
    assert response.text == "live answer"
    assert len(transport_calls) == 1  # zero new network operations


# --- pointing ---------------------------------------------------------------

def test_pixel_center_normalization():
    provider = MockPointingProvider(
        canned={"img.png::target": "[[100, 50]]"},
        image_sizes={"img.png": (200, 100)},
    )
    assert point(provider, "img.png", "target") == [(0.5, 0.5)]


def test_empty_point_response_is_empty_list():
    provider = MockPointingProvider(canned={"img.png::ghost": ""})
    assert point(provider, "img.png", "ghost") == []


def test_right_edge_is_closed_interval():
    provider = MockPointingProvider(
        canned={"img.png::edge": "[[200, 50]]"},
        image_sizes={"img.png": (200, 100)},
    )
    assert point(provider, "img.png", "edge") == [(1.0, 0.5)]


def test_percent_tag_parsing():
    raw = '<point x="25.0" y="40.0" alt="chatbot">chatbot</point>'
    assert parse_points(raw) == [(0.25, 0.4)]


def test_multi_point_tag_parsing():
    raw = '<points x1="50.0" y1="30.0" x2="50.0" y2="70.0" alt="s">s</points>'
    assert parse_points(raw) == [(0.5, 0.3), (0.5, 0.7)]


def test_fraction_json_parsing():
    assert parse_points("[[0.25, 0.75]]") == [(0.25, 0.75)]


def test_point_values_always_normalized():
    for raw in ('<point x="120.0" y="-4.0"/>', "[[1.5, 0.5]]"):
        for x, y in parse_points(raw, image_size=(1, 1)):
            assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0


def test_unparsable_point_response_keeps_raw():
    with pytest.raises(UnparsablePointResponse) as exc_info:
        parse_points("I can't find that element anywhere")
    assert "anywhere" in exc_info.value.raw


def test_pixel_without_size_is_unparsable():
    with pytest.raises(UnparsablePointResponse):
        parse_points("[[100, 50]]", image_size=None)


def test_empty_target_label_rejected():
    provider = MockPointingProvider(canned={})
    with pytest.raises(ValueError):
        point(provider, "img.png", "")
