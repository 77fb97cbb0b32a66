from .store import (
    AcceptanceTable,
    AnnotationBatch,
    AnnotationRecord,
    AnnotationStore,
    InsufficientPool,
    NotAssigned,
    ScoreOutOfRange,
    acceptance_rates,
)

__all__ = [
    "AcceptanceTable",
    "AnnotationBatch",
    "AnnotationRecord",
    "AnnotationStore",
    "InsufficientPool",
    "NotAssigned",
    "ScoreOutOfRange",
    "acceptance_rates",
]
