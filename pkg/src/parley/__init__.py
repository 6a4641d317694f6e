"""Multi-party social simulation: engine, broker, evaluation, API, and CLI."""

from .broker import ActionKind, AgentAction, MessageQueue, Observation, initial_observations, route
from .domain import (
    CharacterProfile,
    ConstraintSet,
    EdgeLookup,
    PersonalityTraits,
    Relationship,
    RelationshipType,
    Scenario,
    Violation,
    check_constraints,
    validate_character,
    validate_relationship,
    validate_scenario,
    visible_fields,
)
from .engine import (
    Assignment,
    EpisodeRecord,
    EpisodeRunner,
    Mode,
    SimulationConfig,
    SimulationStatus,
    Termination,
    TerminationReason,
    run_batch,
)
from .evaluation import (
    DimensionScore,
    EvaluationMetric,
    Judge,
    NegotiationOutcome,
    PayoffTable,
    default_suite,
    extract_outcome_scripted,
    hiring_negotiation_table,
    score_negotiation,
)
from .persistence import MemoryStore, RedisStore, Store, open_store

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "AgentAction",
    "Assignment",
    "CharacterProfile",
    "ConstraintSet",
    "DimensionScore",
    "EdgeLookup",
    "EpisodeRecord",
    "EpisodeRunner",
    "EvaluationMetric",
    "Judge",
    "MemoryStore",
    "MessageQueue",
    "Mode",
    "NegotiationOutcome",
    "Observation",
    "PayoffTable",
    "PersonalityTraits",
    "RedisStore",
    "Relationship",
    "RelationshipType",
    "Scenario",
    "SimulationConfig",
    "SimulationStatus",
    "Store",
    "Termination",
    "TerminationReason",
    "Violation",
    "check_constraints",
    "default_suite",
    "extract_outcome_scripted",
    "hiring_negotiation_table",
    "initial_observations",
    "open_store",
    "route",
    "run_batch",
    "score_negotiation",
    "validate_character",
    "validate_relationship",
    "validate_scenario",
    "visible_fields",
    "__version__",
]
