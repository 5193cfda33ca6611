"""Model-service contracts with deterministic offline implementations.

Three modes of operation share one calling convention:

* ``mock`` — scripted providers answer from canned data, no I/O at all;
* ``replay`` — answers come from a cache of previously recorded responses
  keyed by request digest, so a full run performs zero network operations;
* ``live`` — an HTTP provider is called with bounded retries and every
  response is written to the cache for later replay.

Credentials are read from ``CROSSDOC_CHAT_API_KEY`` and
``CROSSDOC_POINT_API_KEY`` and are never logged.
"""

from __future__ import annotations

import hashlib
import json
import posixpath
import re
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import prompts
from .errors import (
    CapabilityMismatch,
    ProviderUnavailable,
    RateLimited,
    UnparsablePointResponse,
)

Point = tuple[float, float]

COORD_PRECISION = 6  # decimal places kept on normalized coordinates


@dataclass(frozen=True)
class Attachment:
    kind: str   # "image" | "document"
    ref: str


@dataclass(frozen=True)
class ChatRequest:
    instructions: str
    user_content: str = ""
    attachments: tuple[Attachment, ...] = ()


@dataclass(frozen=True)
class RawModelResponse:
    request_digest: str
    text: str
    received_at: float


def request_digest(request: ChatRequest, model_id: str) -> str:
    payload = json.dumps(
        {
            "model": model_id,
            "instructions": request.instructions,
            "user_content": request.user_content,
            "attachments": [[a.kind, a.ref] for a in request.attachments],
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Directory of response texts named by request digest.

    Writes are atomic (tmp file + rename) and serialized by a lock so
    concurrent per-figure requests cannot interleave partial files.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, digest: str) -> Path:
        return self.root / f"{digest}.txt"

    def get(self, digest: str) -> str | None:
        path = self._path(digest)
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def put(self, digest: str, text: str) -> None:
        with self._lock:
            tmp = self._path(digest).with_suffix(".tmp")
            tmp.write_text(text, encoding="utf-8")
            tmp.replace(self._path(digest))

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.txt"))


# --- chat providers ---------------------------------------------------------

class ChatProvider:
    """Base contract: capabilities, config, and a single completion call."""

    capabilities: dict[str, bool] = {
        "accepts_images": False,
        "accepts_documents": False,
    }

    def __init__(self, model_id: str, reasoning_level: str | None = None):
        self.config = {"model_id": model_id, "reasoning_level": reasoning_level}

    def complete(self, request: ChatRequest) -> str:
        raise NotImplementedError


class MockChatProvider(ChatProvider):
    """Answers from a canned digest->text map or a handler callable."""

    capabilities = {"accepts_images": True, "accepts_documents": True}

    def __init__(
        self,
        canned: dict[str, str] | None = None,
        handler: Callable[[ChatRequest], str] | None = None,
        model_id: str = "mock-chat",
    ):
        super().__init__(model_id)
        self.canned = canned or {}
        self.handler = handler

    def complete(self, request: ChatRequest) -> str:
        digest = request_digest(request, self.config["model_id"])
        if digest in self.canned:
            return self.canned[digest]
        if self.handler is not None:
            return self.handler(request)
        raise ProviderUnavailable(f"no canned response for digest {digest[:12]}")


class ReplayChatProvider(ChatProvider):
    """Never answers: a cache miss in replay mode is a hard error."""

    capabilities = {"accepts_images": True, "accepts_documents": True}

    def __init__(self, model_id: str = "replay"):
        super().__init__(model_id)

    def complete(self, request: ChatRequest) -> str:
        raise ProviderUnavailable(
            "replay cache miss: response was never recorded "
            f"(digest {request_digest(request, self.config['model_id'])[:12]})"
        )


def _http_post_json(url: str, headers: dict[str, str], payload: dict) -> str:
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=body, method="POST")
    for k, v in headers.items():
        req.add_header(k, v)
    req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req, timeout=120) as resp:
        return resp.read().decode("utf-8")


class HttpChatProvider(ChatProvider):
    """Minimal OpenAI-style chat endpoint client.

    ``transport`` is injectable so tests can count or fault network calls
    without sockets. Attachments are passed as URL references; anything
    fancier belongs in a dedicated subclass.
    """

    capabilities = {"accepts_images": True, "accepts_documents": True}

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key: str | None = None,
        reasoning_level: str | None = None,
        transport: Callable[[str, dict, dict], str] = _http_post_json,
    ):
        super().__init__(model_id, reasoning_level)
        self.endpoint = endpoint
        self.api_key = api_key
        self.transport = transport

    def complete(self, request: ChatRequest) -> str:
        content: list[dict] = [{"type": "text", "text": request.user_content}]
        for att in request.attachments:
            if att.kind == "image":
                content.append({"type": "image_url", "image_url": {"url": att.ref}})
            else:
                content.append({"type": "file", "file": {"url": att.ref}})
        payload = {
            "model": self.config["model_id"],
            "messages": [
                {"role": "developer", "content": request.instructions},
                {"role": "user", "content": content},
            ],
        }
        if self.config["reasoning_level"]:
            payload["reasoning"] = {"effort": self.config["reasoning_level"]}
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            raw = self.transport(self.endpoint, headers, payload)
        except OSError as exc:
            raise ProviderUnavailable(f"chat endpoint unreachable: {exc}") from exc
        try:
            parsed = json.loads(raw)
            return parsed["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed chat response: {exc}") from exc


def chat(
    provider: ChatProvider,
    request: ChatRequest,
    cache: ResponseCache | None = None,
    max_attempts: int = 3,
    backoff_seconds: float = 0.0,
    sleep: Callable[[float], None] = time.sleep,
) -> RawModelResponse:
    """Run one chat request through the cache and bounded-retry loop.

    The cache is consulted before the provider, so replay runs never touch
    it; successful live responses are written back keyed by digest.
    """
    kinds = {a.kind for a in request.attachments}
    if "image" in kinds and not provider.capabilities.get("accepts_images"):
        raise CapabilityMismatch("provider does not accept image attachments")
    if "document" in kinds and not provider.capabilities.get("accepts_documents"):
        raise CapabilityMismatch("provider does not accept document attachments")

    digest = request_digest(request, provider.config["model_id"])
    if cache is not None:
        hit = cache.get(digest)
        if hit is not None:
            return RawModelResponse(digest, hit, received_at=0.0)

    attempts = 0
    last_error: Exception | None = None
    while attempts < max_attempts:
        attempts += 1
        try:
            text = provider.complete(request)
            if cache is not None:
                cache.put(digest, text)
            return RawModelResponse(digest, text, received_at=time.time())
        except (RateLimited, ProviderUnavailable) as exc:
            last_error = exc
            if attempts < max_attempts and backoff_seconds:
                sleep(backoff_seconds * 2 ** (attempts - 1))
    raise ProviderUnavailable(
        f"chat failed after {attempts} attempts: {last_error}", attempts=attempts
    )


# --- pointing providers ------------------------------------------------------

class PointingProvider:
    """Base contract for coordinate queries against one image."""

    def __init__(self, model_id: str):
        self.config = {"model_id": model_id}

    def point_raw(self, image_ref: str, target_label: str) -> str:
        raise NotImplementedError

    def image_size(self, image_ref: str) -> tuple[int, int] | None:
        """Pixel size when the provider answers in pixels; None otherwise."""
        return None


class MockPointingProvider(PointingProvider):
    """Canned raw responses keyed by ``<image basename>::<target label>``."""

    def __init__(
        self,
        canned: dict[str, str],
        image_sizes: dict[str, tuple[int, int]] | None = None,
        model_id: str = "mock-point",
    ):
        super().__init__(model_id)
        self.canned = canned
        self.image_sizes = image_sizes or {}

    def point_raw(self, image_ref: str, target_label: str) -> str:
        key = f"{posixpath.basename(image_ref)}::{target_label}"
        if key not in self.canned:
            raise ProviderUnavailable(f"no canned pointing response for {key!r}")
        return self.canned[key]

    def image_size(self, image_ref: str) -> tuple[int, int] | None:
        return self.image_sizes.get(posixpath.basename(image_ref))


class HttpPointingProvider(PointingProvider):
    """Generic HTTP pointing endpoint speaking the percent-tag convention."""

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key: str | None = None,
        transport: Callable[[str, dict, dict], str] = _http_post_json,
    ):
        super().__init__(model_id)
        self.endpoint = endpoint
        self.api_key = api_key
        self.transport = transport

    def point_raw(self, image_ref: str, target_label: str) -> str:
        payload = {
            "model": self.config["model_id"],
            "prompt": prompts.POINT_AT.format(target=target_label),
            "image": image_ref,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            raw = self.transport(self.endpoint, headers, payload)
        except OSError as exc:
            raise ProviderUnavailable(f"pointing endpoint unreachable: {exc}") from exc
        try:
            return json.loads(raw)["output"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed pointing response: {exc}") from exc


_POINT_TAG = re.compile(r"<point\b[^>]*>", re.IGNORECASE)
_POINTS_TAG = re.compile(r"<points\b[^>]*>", re.IGNORECASE)
_XY_ATTR = re.compile(r"\b(x|y)(\d*)\s*=\s*\"([^\"]+)\"", re.IGNORECASE)


def _clamp(v: float) -> float:
    return round(min(1.0, max(0.0, v)), COORD_PRECISION)


def parse_points(raw: str, image_size: tuple[int, int] | None = None) -> list[Point]:
    """Convert a raw pointing response to fractional coordinates.

    Accepted shapes: empty text (no anchors found), ``<point x= y=>`` /
    ``<points x1= y1= ...>`` tags with 0-100 percent values, or a JSON
    array of [x, y] pairs. JSON pairs with any value above 1 are pixels
    and need ``image_size``; otherwise they are taken as fractions.
    Coordinates land in [0, 1] on a closed interval.
    """
    text = raw.strip()
    if not text:
        return []

    if _POINT_TAG.search(text) or _POINTS_TAG.search(text):
        xs: dict[str, float] = {}
        ys: dict[str, float] = {}
        for tag in list(_POINT_TAG.finditer(text)) + list(_POINTS_TAG.finditer(text)):
            for axis, index, value in _XY_ATTR.findall(tag.group(0)):
                try:
                    parsed = float(value)
                except ValueError as exc:
                    raise UnparsablePointResponse(
                        f"non-numeric coordinate {value!r}", raw=raw
                    ) from exc
                key = f"{tag.start()}:{index or '1'}"
                (xs if axis.lower() == "x" else ys)[key] = parsed
        if set(xs) != set(ys):
            raise UnparsablePointResponse("unpaired x/y coordinates", raw=raw)
        return [
            (_clamp(xs[k] / 100.0), _clamp(ys[k] / 100.0))
            for k in sorted(xs, key=lambda k: (int(k.split(":")[0]), int(k.split(":")[1])))
        ]

    if text[0] == "[":
        try:
            pairs = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UnparsablePointResponse(f"bad JSON point list: {exc}", raw=raw) from exc
        if not isinstance(pairs, list) or not all(
            isinstance(p, (list, tuple)) and len(p) == 2 for p in pairs
        ):
            raise UnparsablePointResponse("expected a list of [x, y] pairs", raw=raw)
        values = [(float(x), float(y)) for x, y in pairs]
        if any(v > 1.0 for xy in values for v in xy):
            if image_size is None:
                raise UnparsablePointResponse(
                    "pixel coordinates need a known image size", raw=raw
                )
            w, h = image_size
            return [(_clamp(x / w), _clamp(y / h)) for x, y in values]
        return [(_clamp(x), _clamp(y)) for x, y in values]

    raise UnparsablePointResponse("unrecognized pointing response", raw=raw)


def point(
    provider: PointingProvider,
    image_ref: str,
    target_label: str,
    max_attempts: int = 3,
    backoff_seconds: float = 0.0,
    sleep: Callable[[float], None] = time.sleep,
) -> list[Point]:
    """Query one target label on one image, normalized to [0,1] fractions."""
    if not target_label:
        raise ValueError("target_label must be non-empty")
    attempts = 0
    last_error: Exception | None = None
    while attempts < max_attempts:
        attempts += 1
        try:
            raw = provider.point_raw(image_ref, target_label)
            return parse_points(raw, image_size=provider.image_size(image_ref))
        except (RateLimited, ProviderUnavailable) as exc:
            last_error = exc
            if attempts < max_attempts and backoff_seconds:
                sleep(backoff_seconds * 2 ** (attempts - 1))
    raise ProviderUnavailable(
        f"pointing failed after {attempts} attempts: {last_error}", attempts=attempts
    )


# --- scripted providers for the mock mode ------------------------------------

_IDENTIFY_MARKER = '"fig#" as the key'
_LINK_MARKER = "** CAPTION **"
_DESCRIBE_MARKER = "senior PhD student"


@dataclass
class ScriptedResponses:
    """Canned stage responses, routed by recognizable request content.

    ``identify`` is keyed by image basename, ``link`` by the exact unit
    text placed in the caption slot, ``describe`` by ``fig<N>``. ``points``
    holds raw pointing responses keyed ``<image basename>::<label>``.
    """

    identify: dict[str, object] = field(default_factory=dict)
    link: dict[str, object] = field(default_factory=dict)
    describe: dict[str, object] = field(default_factory=dict)
    points: dict[str, str] = field(default_factory=dict)
    image_sizes: dict[str, tuple[int, int]] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedResponses":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        sizes = {k: (int(v[0]), int(v[1])) for k, v in data.get("image_sizes", {}).items()}
        return cls(
            identify=data.get("identify", {}),
            link=data.get("link", {}),
            describe=data.get("describe", {}),
            points=data.get("points", {}),
            image_sizes=sizes,
        )


class ScriptedChatProvider(ChatProvider):
    """Deterministic chat provider for offline runs.

    Routes each request to the matching canned section and returns the
    canned value serialized as JSON, preserving key order so linking
    responses reconstruct exactly.
    """

    capabilities = {"accepts_images": True, "accepts_documents": True}

    def __init__(self, script: ScriptedResponses, model_id: str = "scripted-chat"):
        super().__init__(model_id)
        self.script = script

    def complete(self, request: ChatRequest) -> str:
        instr = request.instructions
        if _LINK_MARKER in instr:
            unit_text = instr.split("** CAPTION **:\n", 1)[1]
            if unit_text.endswith("\n"):
                unit_text = unit_text[:-1]
            if unit_text in self.script.link:
                return json.dumps(self.script.link[unit_text], ensure_ascii=False)
            raise ProviderUnavailable(
                f"no scripted linking response for unit {unit_text[:60]!r}"
            )
        if _DESCRIBE_MARKER in instr:
            m = re.match(r"Figure (\d+)", request.user_content)
            key = f"fig{m.group(1)}" if m else request.user_content
            if key in self.script.describe:
                return json.dumps(self.script.describe[key], ensure_ascii=False)
            raise ProviderUnavailable(f"no scripted description response for {key!r}")
        if _IDENTIFY_MARKER in instr or instr.startswith("Help me label"):
            for att in request.attachments:
                if att.kind != "image":
                    continue
                key = posixpath.basename(att.ref)
                if key in self.script.identify:
                    return json.dumps(self.script.identify[key], ensure_ascii=False)
            raise ProviderUnavailable("no scripted identification response")
        raise ProviderUnavailable("request matches no scripted stage")


def scripted_pointing_provider(script: ScriptedResponses) -> MockPointingProvider:
    return MockPointingProvider(canned=script.points, image_sizes=script.image_sizes)
