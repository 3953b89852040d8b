"""Chat-completion access for agents and tools.

Every agent reply must be a single JSON object ``{"analysis": ..., "action": ...}``
whose action token belongs to the calling agent's vocabulary. Real model output
is noisy, so extraction tolerates surrounding text (code fences, prose) but
rejects a second top-level object. One malformed reply triggers one corrective
re-ask; a second failure escalates to the caller.

Backends: ScriptedBackend replays canned responses keyed by (agent, turn) or by
prompt hash — fully deterministic, used for all tests and fixtures.
HttpBackend speaks a plain chat-completions wire shape. FunctionBackend wraps a
callable, handy for rule-based fakes in harnesses.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Literal, Protocol, Sequence

import requests

Role = Literal["system", "user", "assistant"]

# Per-agent action vocabularies. "None" and "<end>" are shared; the tool-call
# tokens are disjoint across agents.
SUPERVISOR_ACTIONS = frozenset({"None", "<orchestrator_agent>", "<filler_agent>", "<end>"})
ORCHESTRATOR_ACTIONS = frozenset({"None", "<call_selector>", "<call_arrange>", "<end>"})
FILLER_ACTIONS = frozenset({"None", "<call_lookup>", "<call_filling>", "<end>"})


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    """The backend could not produce a completion (network, HTTP, empty body)."""


class ScriptExhaustedError(GatewayError):
    """The scripted backend ran out of queued responses (test misconfiguration)."""


class ActionParseError(GatewayError):
    """Model output is not a single well-formed action object."""


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"invalid role {self.role!r}")
        if not self.content and self.role != "assistant":
            raise ValueError(f"{self.role} message content must be non-empty")


class Backend(Protocol):
    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str: ...


def complete(
    backend: Backend,
    messages: Sequence[ChatMessage],
    *,
    temperature: float = 0.0,
    max_tokens: int | None = None,
) -> str:
    """Raw completion. Messages must be non-empty and start with a system prompt."""
    if not messages:
        raise GatewayError("messages must be non-empty")
    if messages[0].role != "system":
        raise GatewayError("first message must be the agent's system prompt")
    return backend.complete(messages, temperature=temperature, max_tokens=max_tokens)


@dataclass(frozen=True)
class AgentAction:
    analysis: str
    action: str

    def to_json(self) -> str:
        return json.dumps({"analysis": self.analysis, "action": self.action}, ensure_ascii=False)


def _find_json_values(text: str, opener: str) -> list[tuple[int, Any]]:
    decoder = json.JSONDecoder()
    found = []
    pos = 0
    while True:
        start = text.find(opener, pos)
        if start < 0:
            return found
        try:
            value, end = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            pos = start + 1
            continue
        found.append((start, value))
        pos = start + end


def extract_json_object(text: str) -> dict:
    """The single top-level JSON object in text; error if zero or more than one."""
    objects = [v for _, v in _find_json_values(text, "{") if isinstance(v, dict)]
    if not objects:
        raise ActionParseError("no JSON object found in model output")
    if len(objects) > 1:
        raise ActionParseError(f"expected a single JSON object, found {len(objects)}")
    return objects[0]


def extract_json_array(text: str) -> list:
    """The first top-level JSON array in text."""
    arrays = [v for _, v in _find_json_values(text, "[") if isinstance(v, list)]
    if not arrays:
        raise ActionParseError("no JSON array found in model output")
    return arrays[0]


def parse_agent_action(text: str, allowed: frozenset[str] | set[str]) -> AgentAction:
    """Parse an {"analysis", "action"} reply against one agent's vocabulary."""
    obj = extract_json_object(text)
    if "analysis" not in obj or "action" not in obj:
        missing = {"analysis", "action"} - set(obj)
        raise ActionParseError(f"action object missing fields {sorted(missing)}")
    analysis, action = obj["analysis"], obj["action"]
    if not isinstance(analysis, str) or not isinstance(action, str):
        raise ActionParseError("analysis and action must both be strings")
    action = action.strip()
    if action not in allowed:
        raise ActionParseError(f"disallowed action {action!r}; allowed: {sorted(allowed)}")
    return AgentAction(analysis, action)


CORRECTIVE_ACTION_MESSAGE = (
    "Your last reply was invalid. Reply with exactly one JSON object of the form "
    '{"analysis": "...", "action": "..."} where action is one of your allowed '
    "action tokens, and output nothing else."
)


def request_action(
    backend: Backend,
    messages: list[ChatMessage],
    allowed: frozenset[str] | set[str],
    *,
    temperature: float = 0.0,
) -> tuple[AgentAction, list[ChatMessage]]:
    """Complete and parse an agent action, with one corrective re-ask.

    Returns the action and the messages exchanged (assistant replies plus the
    corrective user message, if any); the caller appends them to its history.
    """
    exchanged: list[ChatMessage] = []
    text = complete(backend, messages, temperature=temperature)
    exchanged.append(ChatMessage("assistant", text))
    try:
        return parse_agent_action(text, allowed), exchanged
    except ActionParseError:
        exchanged.append(ChatMessage("user", CORRECTIVE_ACTION_MESSAGE))
        retry = complete(backend, list(messages) + exchanged, temperature=temperature)
        exchanged.append(ChatMessage("assistant", retry))
        return parse_agent_action(retry, allowed), exchanged


def prompt_sha256(messages: Sequence[ChatMessage]) -> str:
    payload = json.dumps(
        [{"role": m.role, "content": m.content} for m in messages],
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScriptEntry:
    agent: str
    turn: int
    response: str
    prompt_sha256: str | None = None


def load_script(path: str | Path) -> list[ScriptEntry]:
    """Script file: JSON list of {"agent", "turn", "response"(, "prompt_sha256")}."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise GatewayError(f"script file {path} must contain a JSON array")
    entries = []
    for i, obj in enumerate(data):
        if not isinstance(obj, dict) or not {"agent", "turn", "response"} <= set(obj):
            raise GatewayError(f"script entry {i} must have agent/turn/response")
        entries.append(
            ScriptEntry(
                str(obj["agent"]), int(obj["turn"]), str(obj["response"]),
                obj.get("prompt_sha256"),
            )
        )
    return entries


class ScriptedBackend:
    """Deterministic replay of one agent's queued responses.

    Each backend instance is bound to an agent kind and owns a private turn
    counter, so concurrent sessions with their own instances cannot interleave.
    Entries with a prompt_sha256 match by prompt hash instead of turn order.
    """

    def __init__(self, entries: Sequence[ScriptEntry], agent: str):
        self.agent = agent
        self._by_turn = sorted(
            (e for e in entries if e.agent == agent and e.prompt_sha256 is None),
            key=lambda e: e.turn,
        )
        self._by_hash = {
            e.prompt_sha256: e for e in entries
            if e.agent == agent and e.prompt_sha256 is not None
        }
        self._next = 0

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        hashed = self._by_hash.get(prompt_sha256(messages))
        if hashed is not None:
            return hashed.response
        if self._next >= len(self._by_turn):
            raise ScriptExhaustedError(
                f"script exhausted for agent {self.agent!r} after {self._next} turns"
            )
        entry = self._by_turn[self._next]
        self._next += 1
        return entry.response


class FunctionBackend:
    """Backend over a plain callable; used by rule-based fakes in the harness."""

    def __init__(self, fn: Callable[[Sequence[ChatMessage]], str]):
        self._fn = fn

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        return self._fn(messages)


class HttpBackend:
    """Chat-completions client: POST {endpoint} with {model, messages, temperature}."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str | None = None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(
        self,
        messages: Sequence[ChatMessage],
        *,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> str:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": temperature,
        }
        if max_tokens is not None:
            body["max_tokens"] = max_tokens
        headers = {}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if not key:
                raise TransportError(f"API key variable {self.api_key_env!r} is not set")
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise TransportError(f"completion request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        if not isinstance(content, str) or not content:
            raise TransportError("backend returned an empty completion")
        return content
