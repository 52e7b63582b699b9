"""Prompt bundles and the structured replies each critic role must return."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field

import jsonschema

from ..errors import SchemaViolation
from ..kinesim.render import RasterImage
from ..plan import BehaviorStep


class Role(str, enum.Enum):
    PLANNER = "planner"
    TRANSLATOR = "translator"
    CODE_GENERATOR = "code_generator"
    HOLISTIC_EVALUATOR = "holistic_evaluator"
    STEP_PINPOINTER = "step_pinpointer"
    REFINEMENT_PROPOSER = "refinement_proposer"
    REWARD_SCORER = "reward_scorer"


_STR = {"type": "string"}
_NUM = {"type": "number"}

SCHEMAS: dict[str, dict] = {
    "plan": {
        "type": "object",
        "required": ["steps"],
        "additionalProperties": False,
        "properties": {
            "steps": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["index", "description", "t_start", "t_end"],
                    "additionalProperties": False,
                    "properties": {
                        "index": {"type": "integer"},
                        "description": {"type": "string", "minLength": 1},
                        "t_start": _NUM,
                        "t_end": _NUM,
                    },
                },
            }
        },
    },
    "translation": {
        "type": "object",
        "required": ["text"],
        "additionalProperties": False,
        "properties": {"text": {"type": "string", "minLength": 1}},
    },
    "candidates": {
        "type": "object",
        "required": ["joints"],
        "additionalProperties": False,
        "properties": {
            "joints": {"type": "array", "minItems": 1, "items": _STR},
            "groups": {"type": "array", "items": {"type": "array", "minItems": 1, "items": _STR}},
        },
    },
    "command": {
        "type": "object",
        "required": ["joint", "value", "mode"],
        "additionalProperties": False,
        "properties": {
            "joint": _STR,
            "value": _NUM,
            "mode": {"enum": ["target", "oscillate"]},
            "amplitude": {"type": "number", "exclusiveMinimum": 0},
            "cycles": {"type": "number", "exclusiveMinimum": 0},
        },
        "if": {"properties": {"mode": {"const": "oscillate"}}},
        "then": {"required": ["amplitude", "cycles"]},
    },
    "evaluation": {
        "type": "object",
        "required": ["verdict"],
        "additionalProperties": False,
        "properties": {"verdict": {"enum": ["pass", "fail"]}, "critique": _STR},
        "if": {"properties": {"verdict": {"const": "fail"}}},
        "then": {"required": ["critique"], "properties": {"critique": {"type": "string", "minLength": 1}}},
    },
    "pinpoint": {
        "type": "object",
        "required": ["indices"],
        "additionalProperties": False,
        "properties": {"indices": {"type": "array", "minItems": 1, "items": {"type": "integer"}}},
    },
    "proposal": {
        "type": "object",
        "required": ["kind", "joint", "direction"],
        "additionalProperties": False,
        "properties": {
            "kind": {"enum": ["Adjust", "Delete", "Add"]},
            "joint": _STR,
            "direction": {"enum": ["increase", "decrease", "unspecified"]},
            "magnitude_hint": _STR,
            "rationale": _STR,
        },
    },
    "score": {
        "type": "object",
        "required": ["score"],
        "additionalProperties": False,
        "properties": {"score": {"type": "integer", "minimum": 1, "maximum": 10}},
    },
}

ROLE_SCHEMAS: dict[Role, tuple[str, ...]] = {
    Role.PLANNER: ("plan",),
    Role.TRANSLATOR: ("translation",),
    Role.CODE_GENERATOR: ("candidates", "command"),
    Role.HOLISTIC_EVALUATOR: ("evaluation",),
    Role.STEP_PINPOINTER: ("pinpoint",),
    Role.REFINEMENT_PROPOSER: ("proposal",),
    Role.REWARD_SCORER: ("score",),
}


# --- replies -------------------------------------------------------------------


class _Reply:
    schema: str = ""

    def to_payload(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class PlanReply(_Reply):
    steps: tuple[BehaviorStep, ...]
    schema = "plan"

    def to_payload(self) -> dict:
        return {"steps": [asdict(s) for s in self.steps]}


@dataclass(frozen=True)
class TranslationReply(_Reply):
    text: str
    schema = "translation"


@dataclass(frozen=True)
class CandidatesReply(_Reply):
    joints: tuple[str, ...]
    groups: tuple[tuple[str, ...], ...] | None = None
    schema = "candidates"

    def to_payload(self) -> dict:
        out = {"joints": list(self.joints)}
        if self.groups is not None:
            out["groups"] = [list(g) for g in self.groups]
        return out


@dataclass(frozen=True)
class CommandReply(_Reply):
    joint: str
    value: float
    mode: str = "target"
    amplitude: float | None = None
    cycles: float | None = None
    schema = "command"


@dataclass(frozen=True)
class EvaluationReply(_Reply):
    verdict: str
    critique: str = ""
    schema = "evaluation"


@dataclass(frozen=True)
class PinpointReply(_Reply):
    indices: tuple[int, ...]
    schema = "pinpoint"

    def to_payload(self) -> dict:
        return {"indices": list(self.indices)}


@dataclass(frozen=True)
class ProposalReply(_Reply):
    kind: str
    joint: str
    direction: str = "unspecified"
    magnitude_hint: str = ""
    rationale: str = ""
    schema = "proposal"


@dataclass(frozen=True)
class ScoreReply(_Reply):
    score: int
    schema = "score"


StructuredReply = (
    PlanReply | TranslationReply | CandidatesReply | CommandReply | EvaluationReply | PinpointReply | ProposalReply | ScoreReply
)


_VALIDATORS = {k: jsonschema.validators.validator_for(v)(v) for k, v in SCHEMAS.items()}


def parse_reply(schema_id: str, payload) -> StructuredReply:
    """Validate ``payload`` against ``schema_id`` and build the typed reply."""
    exc = jsonschema.exceptions.best_match(_VALIDATORS[schema_id].iter_errors(payload))
    if exc is not None:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaViolation(f"{schema_id} reply invalid at {path}: {exc.message}", [payload])
    p = payload
    if schema_id == "plan":
        return PlanReply(
            tuple(BehaviorStep(s["index"], s["description"], float(s["t_start"]), float(s["t_end"])) for s in p["steps"])
        )
    if schema_id == "translation":
        return TranslationReply(p["text"])
    if schema_id == "candidates":
        groups = tuple(tuple(g) for g in p["groups"]) if "groups" in p else None
        return CandidatesReply(tuple(p["joints"]), groups)
    if schema_id == "command":
        return CommandReply(p["joint"], float(p["value"]), p["mode"], p.get("amplitude"), p.get("cycles"))
    if schema_id == "evaluation":
        return EvaluationReply(p["verdict"], p.get("critique", ""))
    if schema_id == "pinpoint":
        return PinpointReply(tuple(p["indices"]))
    if schema_id == "proposal":
        return ProposalReply(p["kind"], p["joint"], p["direction"], p.get("magnitude_hint", ""), p.get("rationale", ""))
    return ScoreReply(int(p["score"]))


# --- prompt bundle ---------------------------------------------------------------


FACTS_LABEL = "facts"


@dataclass(frozen=True)
class PromptBundle:
    """One critic query: ordered text sections, ordered labelled images and
    the reply shape expected back.

    A text section labelled ``facts`` carries machine-readable JSON about the
    query; backends that compute replies (the oracle) read it, model-backed
    ones see it as ordinary prompt text.
    """

    role: Role
    text_sections: tuple[tuple[str, str], ...]
    reply_schema: str
    images: tuple[tuple[str, RasterImage], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "text_sections", tuple(tuple(s) for s in self.text_sections))
        object.__setattr__(self, "images", tuple(tuple(i) for i in self.images))
        if self.reply_schema not in ROLE_SCHEMAS[self.role]:
            raise ValueError(f"reply schema {self.reply_schema!r} does not belong to role {self.role.value}")
        labels = [label for label, _ in self.images]
        if len(labels) != len(set(labels)):
            raise ValueError("image labels must be unique within a bundle")

    def request_hash(self) -> str:
        """Stable key over role, schema, texts and image labels (not pixels)."""
        key = {
            "role": self.role.value,
            "schema": self.reply_schema,
            "text": [list(s) for s in self.text_sections],
            "images": [label for label, _ in self.images],
        }
        blob = json.dumps(key, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def facts(self) -> dict:
        for label, text in self.text_sections:
            if label == FACTS_LABEL:
                return json.loads(text)
        return {}


def facts_section(data: dict) -> tuple[str, str]:
    return FACTS_LABEL, json.dumps(data, sort_keys=True, separators=(",", ":"))
