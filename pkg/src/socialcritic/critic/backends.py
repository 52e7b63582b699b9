"""Critic backends: OpenAI-compatible HTTP, scripted replay, and routing.

Every backend exposes ``complete(bundle) -> StructuredReply`` and every reply
is validated against the bundle's reply schema before it is returned.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from ..errors import SchemaViolation, ScriptExhausted, TransportError
from ..mjcf import RobotModel
from .oracle import OracleCritic
from .schema import SCHEMAS, PromptBundle, Role, StructuredReply, parse_reply

logger = logging.getLogger(__name__)

API_KEY_ENV = "CRISP_API_KEY"
MAX_ATTEMPTS = 3
WILDCARD = "*"

_ROLE_INSTRUCTIONS = {
    Role.TRANSLATOR: (
        "You adapt human social actions for a specific robot. Rewrite the requested social response so that it "
        "uses only the limbs and joints the robot actually has."
    ),
    Role.PLANNER: (
        "You break a robot action into short sequential steps. Give each step a start and end time in seconds; "
        "windows must be ordered, non-overlapping and indexed from 1."
    ),
    Role.CODE_GENERATOR: (
        "You map a behavior step onto robot joints. Use the range-of-motion images to see what each joint does "
        "and pick values inside the stated limits."
    ),
    Role.HOLISTIC_EVALUATOR: (
        "You judge whether the robot's motion, shown as keyframes, is a socially appropriate, human-like and "
        "complete response to the context. Reply pass, or fail with a one-sentence critique."
    ),
    Role.STEP_PINPOINTER: "You decide which plan steps a critique refers to. List every relevant step index.",
    Role.REFINEMENT_PROPOSER: (
        "You fix one step of a robot behavior. Choose Adjust (change an existing command), Delete (remove an "
        "unneeded command) or Add (add a missing joint command), and name the joint and direction."
    ),
    Role.REWARD_SCORER: (
        "Score how well the shown motion achieves the goal from 1 to 10: 8-10 success; 5-7 right direction but "
        "incomplete; 3-4 wrong but not opposite; 1-2 opposite direction."
    ),
}


class Critic(Protocol):
    def complete(self, bundle: PromptBundle) -> StructuredReply: ...


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # "http" | "scripted" | "oracle"
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 0.0
    script_path: str | None = None
    oracle_targets: dict | None = None

    def __post_init__(self):
        if self.kind not in ("http", "scripted", "oracle"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http":
            if not self.endpoint or not self.model:
                raise ValueError("http backend needs endpoint and model")
            if self.script_path or self.oracle_targets is not None:
                raise ValueError("http backend takes no script or oracle targets")
        elif self.kind == "scripted":
            if not self.script_path:
                raise ValueError("scripted backend needs a script path")
            if self.endpoint or self.oracle_targets is not None:
                raise ValueError("scripted backend takes no endpoint or oracle targets")
        else:
            if self.oracle_targets is None:
                raise ValueError("oracle backend needs target poses")
            if self.endpoint:
                raise ValueError("oracle backend takes no endpoint")


# --- HTTP ------------------------------------------------------------------------


def build_chat_request(bundle: PromptBundle, model: str, temperature: float = 0.0) -> dict:
    """Serialize a bundle as an OpenAI-compatible chat-completions body."""
    content: list[dict] = []
    for label, text in bundle.text_sections:
        content.append({"type": "text", "text": f"## {label}\n{text}"})
    for label, image in bundle.images:
        content.append({"type": "text", "text": f"[image: {label}]"})
        data = base64.b64encode(image.to_png()).decode("ascii")
        content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}})
    system = _ROLE_INSTRUCTIONS[bundle.role] + " Reply with a single JSON object matching the provided schema."
    return {
        "model": model,
        "temperature": temperature,
        "messages": [{"role": "system", "content": system}, {"role": "user", "content": content}],
        "response_format": {
            "type": "json_schema",
            "json_schema": {"name": bundle.reply_schema, "schema": SCHEMAS[bundle.reply_schema]},
        },
    }


class HttpCritic:
    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        max_attempts: int = MAX_ATTEMPTS,
        timeout: float = 120.0,
    ):
        endpoint = endpoint.rstrip("/")
        self.url = endpoint if endpoint.endswith("/chat/completions") else endpoint + "/chat/completions"
        self.model = model
        self.temperature = temperature
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.client = client or httpx.Client(timeout=timeout)
        self.max_attempts = max_attempts

    def _post(self, body: dict) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self.client.post(self.url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {self.url} failed: {exc}") from exc
        if resp.status_code >= 400:
            raise TransportError(f"{self.url} returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape from {self.url}") from exc

    def complete(self, bundle: PromptBundle) -> StructuredReply:
        body = build_chat_request(bundle, self.model, self.temperature)
        raw_replies = []
        for attempt in range(1, self.max_attempts + 1):
            raw = self._post(body)
            raw_replies.append(raw)
            try:
                return parse_reply(bundle.reply_schema, json.loads(raw))
            except (json.JSONDecodeError, SchemaViolation) as exc:
                logger.warning("attempt %d: %s reply rejected: %s", attempt, bundle.role.value, exc)
                body["messages"] = body["messages"] + [
                    {"role": "assistant", "content": raw},
                    {
                        "role": "user",
                        "content": f"That reply was rejected: {exc}. Answer again with only a JSON object "
                        f"that satisfies the schema.",
                    },
                ]
        raise SchemaViolation(
            f"{bundle.role.value} reply failed validation {self.max_attempts} times", raw_replies
        )


# --- scripted replay -------------------------------------------------------------


class ScriptedCritic:
    """Replays fixture replies.

    Each entry is ``{"role", "request_hash", "reply"}``. Entries with a
    concrete hash are consumed only by matching requests; entries whose hash
    is ``"*"`` or null are consumed in order by any request of that role once
    no exact match is left.
    """

    def __init__(self, entries: list[dict]):
        self._exact: dict[tuple[str, str], deque] = defaultdict(deque)
        self._any: dict[str, deque] = defaultdict(deque)
        self._lock = threading.Lock()
        for e in entries:
            role = Role(e["role"]).value
            h = e.get("request_hash")
            if h in (None, "", WILDCARD):
                self._any[role].append(e["reply"])
            else:
                self._exact[(role, h)].append(e["reply"])

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ScriptedCritic":
        entries = []
        for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{n}: invalid JSON line: {exc}") from None
        return cls(entries)

    def remaining(self) -> int:
        return sum(len(q) for q in self._exact.values()) + sum(len(q) for q in self._any.values())

    def complete(self, bundle: PromptBundle) -> StructuredReply:
        role = bundle.role.value
        h = bundle.request_hash()
        with self._lock:
            queue = self._exact.get((role, h))
            if queue:
                payload = queue.popleft()
            elif self._any.get(role):
                payload = self._any[role].popleft()
            else:
                raise ScriptExhausted(f"no scripted reply left for role {role} (request {h[:12]})")
        return parse_reply(bundle.reply_schema, payload)


# --- composition -------------------------------------------------------------------


class RoutedCritic:
    """Send roles the primary handles to it, everything else to the fallback."""

    def __init__(self, primary, fallback, roles):
        self.primary = primary
        self.fallback = fallback
        self.roles = frozenset(Role(r) for r in roles)

    def complete(self, bundle: PromptBundle) -> StructuredReply:
        if bundle.role in self.roles or self.fallback is None:
            return self.primary.complete(bundle)
        return self.fallback.complete(bundle)


@dataclass
class CallRecord:
    role: str
    reply_schema: str
    request_hash: str
    image_count: int
    reply: dict


@dataclass
class RecordingCritic:
    """Wraps another critic and records every call (the instrumented backend)."""

    inner: object
    calls: list[CallRecord] = field(default_factory=list)

    def complete(self, bundle: PromptBundle) -> StructuredReply:
        reply = self.inner.complete(bundle)
        self.calls.append(
            CallRecord(bundle.role.value, bundle.reply_schema, bundle.request_hash(), len(bundle.images), reply.to_payload())
        )
        return reply

    def count(self, role: Role | str) -> int:
        return Counter(c.role for c in self.calls)[Role(role).value]

    def images_for(self, role: Role | str) -> list[int]:
        return [c.image_count for c in self.calls if c.role == Role(role).value]

    def write_script(self, path: str | Path, exact: bool = False) -> Path:
        """Dump the transcript in scripted-fixture form."""
        path = Path(path)
        lines = [
            json.dumps(
                {"role": c.role, "request_hash": c.request_hash if exact else WILDCARD, "reply": c.reply},
                sort_keys=True,
            )
            for c in self.calls
        ]
        path.write_text("\n".join(lines) + "\n")
        return path


def make_critic(config: BackendConfig, model: RobotModel | None = None):
    if config.kind == "http":
        return HttpCritic(config.endpoint, config.model, config.temperature)
    if config.kind == "scripted":
        return ScriptedCritic.from_jsonl(config.script_path)
    if model is None:
        raise ValueError("the oracle backend needs the robot model")
    oracle = OracleCritic(model, config.oracle_targets)
    fallback = ScriptedCritic.from_jsonl(config.script_path) if config.script_path else None
    return RoutedCritic(oracle, fallback, OracleCritic.roles)


def complete(critic, bundle: PromptBundle) -> StructuredReply:
    """Send one bundle. ``critic`` is a backend instance or a BackendConfig."""
    if isinstance(critic, BackendConfig):
        critic = make_critic(critic)
    return critic.complete(bundle)
