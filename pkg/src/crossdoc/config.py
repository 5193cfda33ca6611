"""Runtime configuration: provider selection, retries, pipeline knobs.

The config file is JSON. Relative paths inside it (cache dir, scripted
responses) resolve against the config file's own directory so a checked-in
config keeps working from any CWD. Unknown keys are ignored for forward
compatibility.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import providers as prov
from .errors import CrossdocError

CHAT_KEY_ENV = "CROSSDOC_CHAT_API_KEY"
POINT_KEY_ENV = "CROSSDOC_POINT_API_KEY"
PORT_ENV = "CROSSDOC_PORT"


@dataclass
class RuntimeConfig:
    mode: str = "mock"                       # mock | replay | live
    chat_provider: str = "scripted"          # scripted | http
    pointing_provider: str = "scripted"      # scripted | http
    chat_model: str = "scripted-chat"
    pointing_model: str = "scripted-point"
    reasoning_level: str | None = None
    chat_endpoint: str | None = None
    pointing_endpoint: str | None = None
    cache_dir: str | None = None
    mock_responses: str | None = None
    max_attempts: int = 3
    backoff_seconds: float = 0.0
    pruning: bool = True
    prompt_variant: str = "conceptual"       # conceptual | exhaustive
    fix_linking_typo: bool = False
    description_sentence_limit: int = 3
    workers: int = 1
    strip_selectors: list[str] = field(default_factory=list)
    cors_origins: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "RuntimeConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        cfg = cls(**kwargs)
        if cfg.mode not in ("mock", "replay", "live"):
            raise CrossdocError(f"unknown mode {cfg.mode!r}")
        if base_dir is not None:
            for attr in ("cache_dir", "mock_responses"):
                value = getattr(cfg, attr)
                if value and not os.path.isabs(value):
                    setattr(cfg, attr, str(base_dir / value))
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RuntimeConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data, base_dir=path.parent)


@dataclass
class ProviderSet:
    chat: prov.ChatProvider
    pointing: prov.PointingProvider
    cache: prov.ResponseCache | None
    max_attempts: int = 3
    backoff_seconds: float = 0.0


def build_providers(config: RuntimeConfig) -> ProviderSet:
    """Instantiate providers for the configured mode."""
    cache = prov.ResponseCache(config.cache_dir) if config.cache_dir else None

    if config.mode == "mock":
        if not config.mock_responses:
            raise CrossdocError("mock mode needs a mock_responses file")
        script = prov.ScriptedResponses.from_file(config.mock_responses)
        chat = prov.ScriptedChatProvider(script, model_id=config.chat_model)
        pointing = prov.scripted_pointing_provider(script)
    elif config.mode == "replay":
        if cache is None:
            raise CrossdocError("replay mode needs a cache_dir")
        chat = prov.ReplayChatProvider(model_id=config.chat_model)
        # pointing replays through the chat cache convention: raw responses
        # recorded per (image, label) pair in a sibling scripted file
        if config.mock_responses:
            script = prov.ScriptedResponses.from_file(config.mock_responses)
            pointing = prov.scripted_pointing_provider(script)
        else:
            pointing = _ReplayPointingProvider(config.pointing_model)
    elif config.mode == "live":
        if not config.chat_endpoint or not config.pointing_endpoint:
            raise CrossdocError("live mode needs chat_endpoint and pointing_endpoint")
        chat = prov.HttpChatProvider(
            endpoint=config.chat_endpoint,
            model_id=config.chat_model,
            api_key=os.environ.get(CHAT_KEY_ENV),
            reasoning_level=config.reasoning_level,
        )
        pointing = prov.HttpPointingProvider(
            endpoint=config.pointing_endpoint,
            model_id=config.pointing_model,
            api_key=os.environ.get(POINT_KEY_ENV),
        )
    else:  # pragma: no cover - rejected in from_dict
        raise CrossdocError(f"unknown mode {config.mode!r}")

    return ProviderSet(
        chat=chat,
        pointing=pointing,
        cache=cache,
        max_attempts=config.max_attempts,
        backoff_seconds=config.backoff_seconds,
    )


class _ReplayPointingProvider(prov.PointingProvider):
    def point_raw(self, image_ref: str, target_label: str) -> str:
        from .errors import ProviderUnavailable

        raise ProviderUnavailable(
            f"replay has no recorded points for {target_label!r} on {image_ref!r}"
        )
