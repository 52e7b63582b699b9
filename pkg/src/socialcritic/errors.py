"""Exception hierarchy.

Every failure mode has its own class so callers can branch on type rather
than on message text.
"""

from __future__ import annotations


class SocialCriticError(Exception):
    """Base class for all package errors."""


# --- robot description -----------------------------------------------------


class ModelError(SocialCriticError):
    pass


class MalformedXml(ModelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class MalformedModel(ModelError):
    """Well-formed XML that does not describe a usable model."""


class UnsupportedJoint(ModelError):
    def __init__(self, joint: str, kind: str):
        self.joint = joint
        self.kind = kind
        super().__init__(f"joint {joint!r} has unsupported type {kind!r} (only hinge and slide)")


class MissingRange(ModelError):
    def __init__(self, joint: str):
        self.joint = joint
        super().__init__(f"joint {joint!r} has no range attribute")


class InvalidRange(ModelError):
    def __init__(self, joint: str, lo: float, hi: float):
        self.joint = joint
        super().__init__(f"joint {joint!r} range [{lo}, {hi}] is empty")


class DuplicateName(ModelError):
    def __init__(self, kind: str, name: str):
        self.name = name
        super().__init__(f"duplicate {kind} name {name!r}")


class InvalidGeom(ModelError):
    pass


class UnknownJoint(SocialCriticError, KeyError):
    def __init__(self, joint: str):
        self.joint = joint
        super().__init__(joint)

    def __str__(self) -> str:
        return f"unknown joint {self.joint!r}"


# --- kinematics ----------------------------------------------------------------


class PoseLengthMismatch(SocialCriticError, ValueError):
    pass


class EmptyPlan(SocialCriticError, ValueError):
    pass


# --- critic transport --------------------------------------------------------


class CriticError(SocialCriticError):
    pass


class TransportError(CriticError):
    pass


class SchemaViolation(CriticError):
    def __init__(self, message: str, raw_replies: list | None = None):
        self.raw_replies = list(raw_replies or [])
        super().__init__(message)


class ScriptExhausted(CriticError):
    pass


class OracleUnsupportedRole(CriticError):
    pass


class ModelMismatch(CriticError, ValueError):
    pass


# --- behavior pipeline -------------------------------------------------------


class PipelineError(SocialCriticError):
    pass


class CapabilityMismatch(PipelineError):
    def __init__(self, limbs: list[str]):
        self.limbs = list(limbs)
        super().__init__(f"translation references absent limb groups: {', '.join(self.limbs)}")


class NoCandidateJoints(PipelineError):
    pass


class IndexOutOfRange(PipelineError, IndexError):
    pass


class InvalidProposal(PipelineError):
    pass


class PreconditionError(PipelineError, ValueError):
    pass


# --- refinement ----------------------------------------------------------------


class DegenerateRange(SocialCriticError, ValueError):
    pass


class ScorerFailure(SocialCriticError):
    pass


# --- artifact store ----------------------------------------------------------


class ArtifactError(SocialCriticError):
    pass


class ArtifactIoError(ArtifactError, OSError):
    pass


class SchemaVersionMismatch(ArtifactError):
    def __init__(self, found, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"artifact schema_version {found!r}, expected {expected}")


class NonMonotonicIteration(ArtifactError, ValueError):
    pass
