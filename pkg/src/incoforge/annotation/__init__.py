"""Self-hosted verification service: screening, multi-judge labeling,
agreement filtering, and the human-baseline protocol."""

from .store import (
    AgreementPolicy,
    AnnotationError,
    AnnotationStore,
    DuplicateJudgmentError,
    IncompleteJudgmentsError,
    PhaseError,
    UnknownCandidateError,
    UnknownWorkerError,
    candidates_from_instances,
)

__all__ = [
    "AnnotationStore",
    "AgreementPolicy",
    "AnnotationError",
    "DuplicateJudgmentError",
    "IncompleteJudgmentsError",
    "PhaseError",
    "UnknownCandidateError",
    "UnknownWorkerError",
    "candidates_from_instances",
]
