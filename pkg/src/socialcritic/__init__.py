"""Social robot behavior authoring from MJCF models, refined by a critic."""

from .artifact import BehaviorArtifact, read_artifact, write_artifact
from .critic import BackendConfig, OracleCritic, RecordingCritic, ScriptedCritic, make_critic, score_oracle
from .mjcf import RobotModel, load_mjcf, parse_mjcf, summarize_morphology
from .pipeline import Pipeline
from .plan import BehaviorPlan, ControlCommand, ControlSequence, Critique, InteractionContext, RefinementProposal
from .ras import RasConfig, run_refinement
from .runner import RunConfig, Runner, Variant, run_behavior

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "BehaviorArtifact",
    "BehaviorPlan",
    "ControlCommand",
    "ControlSequence",
    "Critique",
    "InteractionContext",
    "OracleCritic",
    "Pipeline",
    "RasConfig",
    "RecordingCritic",
    "RefinementProposal",
    "RobotModel",
    "RunConfig",
    "Runner",
    "ScriptedCritic",
    "Variant",
    "load_mjcf",
    "make_critic",
    "parse_mjcf",
    "read_artifact",
    "run_behavior",
    "run_refinement",
    "score_oracle",
    "summarize_morphology",
    "write_artifact",
]
