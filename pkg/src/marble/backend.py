"""Agent "brain" backends: scripted response queues and a remote chat API.

Both implementations answer the same question — given a context, produce a
text message or a tool invocation. The scripted backend replays canned
responses keyed by (agent, cue) and is bit-stable; the remote backend speaks
an OpenAI-compatible chat-completions wire format with a `tools` array.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import httpx

from .errors import BackendError, MalformedToolCallError, ScriptExhaustedError

DEFAULT_MAX_TOKENS = 1024
DEFAULT_TEMPERATURE = 0.7
DEFAULT_TOP_P = 1.0

API_BASE_ENV = "MARBLE_API_BASE"
API_KEY_ENV = "MARBLE_API_KEY"


@dataclass
class CompletionRequest:
    system_text: str = ""
    messages: list[dict[str, str]] = field(default_factory=list)  # {speaker, text}
    tools: list[dict[str, Any]] = field(default_factory=list)
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


@dataclass
class ToolCall:
    name: str
    arguments: dict[str, Any] = field(default_factory=dict)


@dataclass
class CompletionResponse:
    kind: str  # text | tool_call
    text: str = ""
    tool: Optional[ToolCall] = None
    usage: dict[str, int] = field(default_factory=lambda: {"prompt_tokens": 0, "completion_tokens": 0})

    def __post_init__(self):
        if self.kind == "text" and self.tool is not None:
            raise ValueError("text response must not carry a tool call")
        if self.kind == "tool_call" and self.tool is None:
            raise ValueError("tool_call response must carry a tool call")


def _normalize_scripted(entry: Union[str, dict]) -> CompletionResponse:
    if isinstance(entry, str):
        return CompletionResponse(kind="text", text=entry)
    if isinstance(entry, dict) and "tool" in entry:
        return CompletionResponse(
            kind="tool_call",
            tool=ToolCall(entry["tool"], dict(entry.get("arguments", {}))),
        )
    if isinstance(entry, dict) and "text" in entry:
        return CompletionResponse(kind="text", text=entry["text"])
    raise BackendError(f"unusable scripted entry: {entry!r}")


class ScriptedBackend:
    """Replays queued responses per (agent, cue). Exhaustion is a fixture gap."""

    def __init__(self, policy: dict[str, dict[str, list]]):
        self._queues: dict[tuple[str, str], list] = {}
        for agent, cues in policy.items():
            for cue, responses in cues.items():
                self._queues[(agent, cue)] = list(responses)

    def complete(self, agent: str, request: CompletionRequest, cue: str) -> CompletionResponse:
        queue = self._queues.get((agent, cue))
        if not queue:
            raise ScriptExhaustedError(f"no scripted response for agent={agent!r} cue={cue!r}")
        return _normalize_scripted(queue.pop(0))

    def try_complete(self, agent: str, request: CompletionRequest, cue: str) -> Optional[CompletionResponse]:
        """Optional turn: None when the fixture scripts nothing for this cue."""
        if not self._queues.get((agent, cue)):
            return None
        return self.complete(agent, request, cue)

    def remaining(self) -> int:
        return sum(len(q) for q in self._queues.values())


class CallableBackend:
    """Adapter: any function (agent, request, cue) -> response-ish.

    Useful for seeded random policies in tests and simulations; the function
    may return a string, a {tool, arguments} dict, or a CompletionResponse.
    """

    def __init__(self, fn):
        self._fn = fn

    def complete(self, agent: str, request: CompletionRequest, cue: str) -> CompletionResponse:
        result = self._fn(agent, request, cue)
        if isinstance(result, CompletionResponse):
            return result
        return _normalize_scripted(result)


class RemoteBackend:
    """OpenAI-compatible chat-completions client with bounded retries.

    Endpoint and key come from config or the MARBLE_API_BASE / MARBLE_API_KEY
    environment variables. Never mutates engine state; all effects flow
    through the returned CompletionResponse.
    """

    def __init__(
        self,
        model: str,
        api_base: Optional[str] = None,
        api_key: Optional[str] = None,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        transport: Optional[httpx.BaseTransport] = None,
        sleep=time.sleep,
    ):
        self.model = model
        self.api_base = (api_base or os.environ.get(API_BASE_ENV, "")).rstrip("/")
        if not self.api_base:
            raise BackendError(f"remote backend requires api_base or ${API_BASE_ENV}")
        self.api_key = api_key or os.environ.get(API_KEY_ENV, "")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._client = httpx.Client(transport=transport, timeout=60.0)

    def _payload(self, agent: str, request: CompletionRequest) -> dict[str, Any]:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        for msg in request.messages:
            role = "assistant" if msg.get("speaker") == agent else "user"
            speaker = msg.get("speaker", "")
            text = msg.get("text", "")
            content = text if role == "assistant" else f"{speaker}: {text}" if speaker else text
            messages.append({"role": role, "content": content})
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": messages,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "top_p": request.top_p,
        }
        if request.tools:
            payload["tools"] = [
                {"type": "function", "function": schema} for schema in request.tools
            ]
        return payload

    def complete(self, agent: str, request: CompletionRequest, cue: str) -> CompletionResponse:
        payload = self._payload(agent, request)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Optional[Exception] = None
        for attempt in range(self.max_attempts):
            try:
                response = self._client.post(
                    f"{self.api_base}/chat/completions", json=payload, headers=headers
                )
                response.raise_for_status()
                return self._parse(response.json())
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
        raise BackendError(f"remote completion failed after {self.max_attempts} attempts: {last_error}")

    @staticmethod
    def _parse(body: dict[str, Any]) -> CompletionResponse:
        try:
            message = body["choices"][0]["message"]
        except (KeyError, IndexError) as exc:
            raise BackendError(f"malformed completion body: {exc}") from exc
        usage = body.get("usage", {})
        usage = {
            "prompt_tokens": usage.get("prompt_tokens", 0),
            "completion_tokens": usage.get("completion_tokens", 0),
        }
        tool_calls = message.get("tool_calls") or []
        if tool_calls:
            function = tool_calls[0].get("function", {})
            name = function.get("name")
            raw_args = function.get("arguments", "{}")
            if not name:
                raise MalformedToolCallError("tool call without a function name")
            try:
                arguments = json.loads(raw_args) if isinstance(raw_args, str) else dict(raw_args)
            except (json.JSONDecodeError, TypeError) as exc:
                raise MalformedToolCallError(f"unparseable tool arguments: {raw_args!r}") from exc
            return CompletionResponse(kind="tool_call", tool=ToolCall(name, arguments), usage=usage)
        return CompletionResponse(kind="text", text=message.get("content") or "", usage=usage)


def build_backend(spec) -> object:
    """Instantiate a backend from a BackendSpec."""
    if spec.kind == "scripted":
        return ScriptedBackend(spec.policy)
    if spec.kind == "remote":
        return RemoteBackend(model=spec.model, api_base=spec.api_base, **spec.params)
    raise BackendError(f"unknown backend kind {spec.kind!r}")
