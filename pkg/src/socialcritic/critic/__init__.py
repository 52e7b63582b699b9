from .backends import (
    API_KEY_ENV,
    BackendConfig,
    HttpCritic,
    RecordingCritic,
    RoutedCritic,
    ScriptedCritic,
    build_chat_request,
    complete,
    make_critic,
)
from .oracle import OracleCritic, score_oracle
from .schema import (
    CandidatesReply,
    CommandReply,
    EvaluationReply,
    PinpointReply,
    PlanReply,
    PromptBundle,
    ProposalReply,
    Role,
    ScoreReply,
    TranslationReply,
    facts_section,
    parse_reply,
)

__all__ = [
    "API_KEY_ENV",
    "BackendConfig",
    "CandidatesReply",
    "CommandReply",
    "EvaluationReply",
    "HttpCritic",
    "OracleCritic",
    "PinpointReply",
    "PlanReply",
    "PromptBundle",
    "ProposalReply",
    "RecordingCritic",
    "Role",
    "RoutedCritic",
    "ScoreReply",
    "ScriptedCritic",
    "TranslationReply",
    "build_chat_request",
    "complete",
    "facts_section",
    "make_critic",
    "parse_reply",
    "score_oracle",
]
