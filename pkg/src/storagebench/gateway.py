"""Deliver prompts to any chat-completion-style HTTP endpoint.

One wire format for every backend: a JSON body with a system/user message
array, the user content optionally carrying a base64 image part. Reliability
protocol: retries with exponential backoff on transport errors, 5xx and 429,
and a fixed pause between successful calls on the same endpoint.
"""

from __future__ import annotations

import json
import os
import threading
import time as _time
from dataclasses import dataclass

import httpx

from .errors import ConfigurationError, DeliveryError

RETRYABLE_STATUS = {429}


class SystemClock:
    def time(self) -> float:
        return _time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            _time.sleep(seconds)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env_var: str = ""
    max_retries: int = 3
    initial_retry_delay: float = 5.0
    inter_call_pause: float = 1.0
    timeout: float = 60.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")
        if self.initial_retry_delay < 0 or self.inter_call_pause < 0:
            raise ConfigurationError("delays must be >= 0")


@dataclass
class ImagePayload:
    data_base64: str
    media_type: str = "image/png"


@dataclass
class CompletionRequest:
    user_text: str
    system_text: str | None = None
    image: ImagePayload | None = None


@dataclass
class CompletionResponse:
    raw_text: str  # verbatim, untrimmed
    latency: float
    attempt_count: int


def _build_body(cfg: EndpointConfig, req: CompletionRequest) -> dict:
    messages = []
    if req.system_text is not None:
        messages.append({"role": "system", "content": req.system_text})
    if req.image is None:
        messages.append({"role": "user", "content": req.user_text})
    else:
        messages.append(
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": req.user_text},
                    {
                        "type": "image_url",
                        "image_url": {
                            "url": f"data:{req.image.media_type};base64,{req.image.data_base64}"
                        },
                    },
                ],
            }
        )
    return {"model": cfg.model_name, "messages": messages}


def _extract_text(response: httpx.Response) -> str:
    """Assistant message content when the body is chat-completion JSON,
    otherwise the body itself (plain-text stubs)."""
    try:
        return response.json()["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError, ValueError):
        return response.text


class ChatGateway:
    """Shared across workers; calls on the same EndpointConfig are serialized
    so the inter-call pause doubles as a rate limit."""

    def __init__(self, clock=None, client: httpx.Client | None = None, audit_log_path=None):
        self.clock = clock or SystemClock()
        self._client = client or httpx.Client()
        self._audit_log_path = audit_log_path
        self._state_lock = threading.Lock()
        self._config_locks: dict[EndpointConfig, threading.Lock] = {}
        self._last_success: dict[EndpointConfig, float] = {}

    def _lock_for(self, cfg: EndpointConfig) -> threading.Lock:
        with self._state_lock:
            return self._config_locks.setdefault(cfg, threading.Lock())

    def _headers(self, cfg: EndpointConfig) -> dict:
        headers = {"Content-Type": "application/json"}
        if cfg.api_key_env_var:
            key = os.environ.get(cfg.api_key_env_var)
            if not key:
                raise ConfigurationError(
                    f"environment variable {cfg.api_key_env_var} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _audit(self, cfg: EndpointConfig, req: CompletionRequest, status, text, attempts):
        if self._audit_log_path is None:
            return
        entry = {
            "base_url": cfg.base_url,
            "model": cfg.model_name,
            "attempt_count": attempts,
            "status": status,
            "system_text": req.system_text,
            "user_text": req.user_text,
            "has_image": req.image is not None,
            "response_text": text,
        }
        with open(self._audit_log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def complete(self, cfg: EndpointConfig, req: CompletionRequest) -> CompletionResponse:
        headers = self._headers(cfg)
        body = _build_body(cfg, req)
        with self._lock_for(cfg):
            last = self._last_success.get(cfg)
            if last is not None:
                remaining = cfg.inter_call_pause - (self.clock.time() - last)
                if remaining > 0:
                    self.clock.sleep(remaining)

            delay = cfg.initial_retry_delay
            last_status = None
            last_error = None
            started = self.clock.time()
            for attempt in range(1, cfg.max_retries + 2):
                try:
                    response = self._client.post(
                        cfg.base_url, json=body, headers=headers, timeout=cfg.timeout
                    )
                except httpx.HTTPError as exc:
                    last_error = exc
                    last_status = None
                else:
                    if response.status_code < 400:
                        text = _extract_text(response)
                        latency = self.clock.time() - started
                        self._last_success[cfg] = self.clock.time()
                        self._audit(cfg, req, response.status_code, text, attempt)
                        return CompletionResponse(
                            raw_text=text, latency=latency, attempt_count=attempt
                        )
                    last_status = response.status_code
                    retryable = last_status >= 500 or last_status in RETRYABLE_STATUS
                    if not retryable:
                        self._audit(cfg, req, last_status, None, attempt)
                        raise DeliveryError(
                            f"endpoint returned {last_status}", last_status=last_status
                        )
                if attempt <= cfg.max_retries:
                    self.clock.sleep(delay)
                    delay *= 2
            self._audit(cfg, req, last_status, None, cfg.max_retries + 1)
            raise DeliveryError(
                f"retries exhausted after {cfg.max_retries + 1} attempts"
                + (f" (last status {last_status})" if last_status else f" ({last_error})"),
                last_status=last_status,
            )
