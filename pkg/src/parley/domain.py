"""Core data model: characters, relationships, scenarios, and the visibility rules.

Every entity is an immutable-ish dataclass with a stable JSON form
(lower_snake_case keys, UTF-8). Unknown keys encountered on read are
preserved into the entity's extra map so documents written by newer
versions survive a round-trip. Validation never raises for bad field
values; it returns a list of :class:`Violation` so callers can report
all problems at once.

Relationship kinds form a total closeness order, and profile visibility
between two agents is a monotone function of that order: a stranger
observes nothing, family observes everything except secrets.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

SCHEMA_VERSION = 1

# Fields observable at each closeness tier. Each tier includes everything
# below it; secrets are excluded at every tier.
_ACQUAINTANCE_FIELDS = ("name", "gender", "pronouns", "age", "occupation")
_FRIEND_EXTRA = ("public_info",)
_ROMANTIC_EXTRA = ("personality", "moral_values", "decision_style")


def new_pk() -> str:
    """Random 128-bit identifier in canonical hex form."""
    return uuid.uuid4().hex


class RelationshipType(str, Enum):
    FAMILY = "family"
    ROMANTIC = "romantic"
    FRIEND = "friend"
    ACQUAINTANCE = "acquaintance"
    STRANGER = "stranger"

    @property
    def closeness(self) -> int:
        return _CLOSENESS[self]


_CLOSENESS = {
    RelationshipType.STRANGER: 0,
    RelationshipType.ACQUAINTANCE: 1,
    RelationshipType.FRIEND: 2,
    RelationshipType.ROMANTIC: 3,
    RelationshipType.FAMILY: 4,
}


@dataclass(frozen=True)
class PersonalityTraits:
    """Free-text level per Big Five trait (e.g. "high", "low, avoids risk")."""

    openness: str = ""
    conscientiousness: str = ""
    extraversion: str = ""
    agreeableness: str = ""
    neuroticism: str = ""

    def as_text(self) -> str:
        parts = [
            f"{name}: {value}"
            for name, value in (
                ("openness", self.openness),
                ("conscientiousness", self.conscientiousness),
                ("extraversion", self.extraversion),
                ("agreeableness", self.agreeableness),
                ("neuroticism", self.neuroticism),
            )
            if value
        ]
        return "; ".join(parts)

    def to_dict(self) -> dict[str, str]:
        return {
            "openness": self.openness,
            "conscientiousness": self.conscientiousness,
            "extraversion": self.extraversion,
            "agreeableness": self.agreeableness,
            "neuroticism": self.neuroticism,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None) -> "PersonalityTraits":
        data = data or {}
        return cls(
            openness=str(data.get("openness", "")),
            conscientiousness=str(data.get("conscientiousness", "")),
            extraversion=str(data.get("extraversion", "")),
            agreeableness=str(data.get("agreeableness", "")),
            neuroticism=str(data.get("neuroticism", "")),
        )


@dataclass
class CharacterProfile:
    """A role-playable persona with public and secret attributes."""

    pk: str = field(default_factory=new_pk)
    name: str = ""
    gender: str | None = None
    age: int = 0
    occupation: str = ""
    pronouns: str = ""
    personality: PersonalityTraits = field(default_factory=PersonalityTraits)
    moral_values: list[str] = field(default_factory=list)
    decision_style: str | None = None
    public_info: str = ""
    secret_info: str = ""
    extra_public: dict[str, str] = field(default_factory=dict)
    extra_private: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "pk": self.pk,
            "name": self.name,
            "gender": self.gender,
            "age": self.age,
            "occupation": self.occupation,
            "pronouns": self.pronouns,
            "personality": self.personality.to_dict(),
            "moral_values": list(self.moral_values),
            "decision_style": self.decision_style,
            "public_info": self.public_info,
            "secret_info": self.secret_info,
            "extra_public": dict(self.extra_public),
            "extra_private": dict(self.extra_private),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CharacterProfile":
        known = {
            "schema_version", "pk", "name", "gender", "age", "occupation",
            "pronouns", "personality", "moral_values", "decision_style",
            "public_info", "secret_info", "extra_public", "extra_private",
        }
        extra_private = {str(k): str(v) for k, v in (data.get("extra_private") or {}).items()}
        # Unknown top-level keys are kept, privately, so round-trips never lose data.
        for key, value in data.items():
            if key not in known:
                extra_private[str(key)] = value if isinstance(value, str) else json.dumps(value)
        age = data.get("age", 0)
        return cls(
            pk=str(data.get("pk") or new_pk()),
            name=str(data.get("name", "")),
            gender=None if data.get("gender") is None else str(data["gender"]),
            age=int(age) if isinstance(age, (int, float)) and not isinstance(age, bool) else age,
            occupation=str(data.get("occupation", "")),
            pronouns=str(data.get("pronouns", "")),
            personality=PersonalityTraits.from_dict(data.get("personality")),
            moral_values=[str(v) for v in (data.get("moral_values") or [])],
            decision_style=None if data.get("decision_style") is None else str(data["decision_style"]),
            public_info=str(data.get("public_info", "")),
            secret_info=str(data.get("secret_info", "")),
            extra_public={str(k): str(v) for k, v in (data.get("extra_public") or {}).items()},
            extra_private=extra_private,
        )


@dataclass
class Relationship:
    """Undirected typed edge between two characters; controls visibility."""

    char_a: str
    char_b: str
    kind: RelationshipType
    backstory: str | None = None
    pk: str = field(default_factory=new_pk)
    extra: dict[str, Any] = field(default_factory=dict)

    def pair(self) -> frozenset[str]:
        return frozenset((self.char_a, self.char_b))

    def to_dict(self) -> dict[str, Any]:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "pk": self.pk,
            "char_a": self.char_a,
            "char_b": self.char_b,
            "kind": self.kind.value,
            "backstory": self.backstory,
        }
        doc.update(self.extra)
        return doc

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Relationship":
        known = {"schema_version", "pk", "char_a", "char_b", "kind", "backstory"}
        kind_raw = str(data.get("kind", "stranger")).lower()
        try:
            kind = RelationshipType(kind_raw)
        except ValueError:
            kind = kind_raw  # type: ignore[assignment]  # surfaced by validate_relationship
        return cls(
            pk=str(data.get("pk") or new_pk()),
            char_a=str(data.get("char_a", "")),
            char_b=str(data.get("char_b", "")),
            kind=kind,
            backstory=None if data.get("backstory") is None else str(data["backstory"]),
            extra={k: v for k, v in data.items() if k not in known},
        )


@dataclass
class ConstraintSet:
    """Which character combinations may play a scenario."""

    arity: int = 1
    required_relationship: RelationshipType | None = None
    age_range: tuple[int, int] | None = None
    occupation_filter: list[str] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "arity": self.arity,
            "required_relationship": self.required_relationship.value if self.required_relationship else None,
            "age_range": list(self.age_range) if self.age_range else None,
            "occupation_filter": list(self.occupation_filter) if self.occupation_filter is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None, *, default_arity: int = 1) -> "ConstraintSet":
        data = data or {}
        rel = data.get("required_relationship")
        age_range = data.get("age_range")
        occ = data.get("occupation_filter")
        return cls(
            arity=int(data.get("arity", default_arity)),
            required_relationship=RelationshipType(str(rel).lower()) if rel else None,
            age_range=(int(age_range[0]), int(age_range[1])) if age_range else None,
            occupation_filter=[str(o) for o in occ] if occ is not None else None,
        )


@dataclass
class Scenario:
    """Shared setting plus one private goal per agent slot."""

    context: str
    agent_goals: list[str]
    location: str | None = None
    time: str | None = None
    constraints: ConstraintSet | None = None
    extra_shared: dict[str, str] = field(default_factory=dict)
    pk: str = field(default_factory=new_pk)

    def __post_init__(self) -> None:
        if self.constraints is None:
            self.constraints = ConstraintSet(arity=len(self.agent_goals))

    @property
    def arity(self) -> int:
        return self.constraints.arity if self.constraints else len(self.agent_goals)

    def shared_text(self) -> str:
        lines = [self.context]
        if self.location:
            lines.append(f"Location: {self.location}")
        if self.time:
            lines.append(f"Time: {self.time}")
        for key in sorted(self.extra_shared):
            lines.append(f"{key}: {self.extra_shared[key]}")
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "pk": self.pk,
            "context": self.context,
            "location": self.location,
            "time": self.time,
            "agent_goals": list(self.agent_goals),
            "constraints": self.constraints.to_dict() if self.constraints else None,
            "extra_shared": dict(self.extra_shared),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        known = {
            "schema_version", "pk", "context", "location", "time",
            "agent_goals", "constraints", "extra_shared",
        }
        extra_shared = {str(k): str(v) for k, v in (data.get("extra_shared") or {}).items()}
        for key, value in data.items():
            if key not in known:
                extra_shared[str(key)] = value if isinstance(value, str) else json.dumps(value)
        goals = [str(g) for g in (data.get("agent_goals") or [])]
        return cls(
            pk=str(data.get("pk") or new_pk()),
            context=str(data.get("context", "")),
            location=None if data.get("location") is None else str(data["location"]),
            time=None if data.get("time") is None else str(data["time"]),
            agent_goals=goals,
            constraints=ConstraintSet.from_dict(data.get("constraints"), default_arity=max(len(goals), 1)),
            extra_shared=extra_shared,
        )


# An observable profile is the per-viewer projection of a character:
# plain field name -> rendered text.
ObservableProfile = dict[str, str]


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which field, which rule."""

    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


def validate_character(profile: CharacterProfile) -> list[Violation]:
    violations = []
    if not profile.pk:
        violations.append(Violation("pk", "must be nonempty"))
    if not profile.name:
        violations.append(Violation("name", "must be nonempty"))
    if not isinstance(profile.age, int) or isinstance(profile.age, bool):
        violations.append(Violation("age", "must be an integer"))
    elif profile.age < 0:
        violations.append(Violation("age", "non-negative"))
    return violations


def validate_relationship(rel: Relationship) -> list[Violation]:
    violations = []
    if not rel.char_a or not rel.char_b:
        violations.append(Violation("char_a/char_b", "both endpoints required"))
    if rel.char_a == rel.char_b:
        violations.append(Violation("char_b", "must differ from char_a"))
    if not isinstance(rel.kind, RelationshipType):
        violations.append(Violation("kind", f"unknown relationship type {rel.kind!r}"))
    return violations


def validate_scenario(scenario: Scenario) -> list[Violation]:
    violations = []
    if not scenario.agent_goals:
        violations.append(Violation("agent_goals", "at least one goal required"))
    cons = scenario.constraints
    if cons is not None:
        if cons.arity < 1:
            violations.append(Violation("constraints.arity", "must be >= 1"))
        if scenario.agent_goals and cons.arity != len(scenario.agent_goals):
            violations.append(Violation("constraints.arity", "must equal agent_goals length"))
        if cons.age_range is not None and cons.age_range[0] > cons.age_range[1]:
            violations.append(Violation("constraints.age_range", "min must be <= max"))
    return violations


class ArityMismatchError(ValueError):
    pass


class DuplicateEdgeError(ValueError):
    pass


class EdgeLookup:
    """Relationship lookup over unordered character pairs.

    A missing edge defaults to stranger (least privilege). Constructing a
    lookup with two edges on the same unordered pair raises, enforcing the
    one-edge-per-pair invariant at use time.
    """

    def __init__(self, edges: Iterable[Relationship] = ()):
        self._edges: dict[frozenset[str], Relationship] = {}
        for edge in edges:
            key = edge.pair()
            if key in self._edges:
                a, b = sorted(key)
                raise DuplicateEdgeError(f"duplicate relationship edge between {a} and {b}")
            self._edges[key] = edge

    def kind_between(self, a: str, b: str) -> RelationshipType:
        edge = self._edges.get(frozenset((a, b)))
        return edge.kind if edge is not None else RelationshipType.STRANGER

    def edge_between(self, a: str, b: str) -> Relationship | None:
        return self._edges.get(frozenset((a, b)))

    def __len__(self) -> int:
        return len(self._edges)


def _field_text(profile: CharacterProfile, name: str) -> str | None:
    if name == "age":
        return str(profile.age)
    if name == "personality":
        text = profile.personality.as_text()
        return text or None
    if name == "moral_values":
        return ", ".join(profile.moral_values) or None
    value = getattr(profile, name)
    return value if value else None


def visible_fields(viewer: str, target: CharacterProfile, kind: RelationshipType) -> ObservableProfile:
    """Project `target`'s profile for `viewer` under relationship `kind`.

    Self-views are the caller's responsibility (see :func:`full_profile_view`).
    """
    if viewer == target.pk:
        raise ValueError("visible_fields is for viewer != target; use full_profile_view")
    observable: ObservableProfile = {}
    closeness = kind.closeness
    if closeness >= RelationshipType.ACQUAINTANCE.closeness:
        for name in _ACQUAINTANCE_FIELDS:
            text = _field_text(target, name)
            if text is not None:
                observable[name] = text
    if closeness >= RelationshipType.FRIEND.closeness:
        for name in _FRIEND_EXTRA:
            text = _field_text(target, name)
            if text is not None:
                observable[name] = text
        observable.update(target.extra_public)
    if closeness >= RelationshipType.ROMANTIC.closeness:
        for name in _ROMANTIC_EXTRA:
            text = _field_text(target, name)
            if text is not None:
                observable[name] = text
    return observable


def full_profile_view(profile: CharacterProfile) -> ObservableProfile:
    """The owner's own view: every field, secrets included."""
    view = visible_fields("__self__", profile, RelationshipType.FAMILY)
    if profile.secret_info:
        view["secret_info"] = profile.secret_info
    view.update(profile.extra_private)
    return view


def check_constraints(
    scenario: Scenario,
    cast: list[CharacterProfile],
    edges: EdgeLookup | Iterable[Relationship],
) -> tuple[bool, list[str]]:
    """Does `cast` satisfy the scenario's casting constraints?

    Returns (ok, reasons); reasons name the offending character. Raises
    :class:`ArityMismatchError` when the cast size is wrong, since that is a
    caller bug rather than a constraint outcome.
    """
    cons = scenario.constraints or ConstraintSet(arity=len(scenario.agent_goals))
    if len(cast) != cons.arity:
        raise ArityMismatchError(f"scenario expects {cons.arity} agents, got {len(cast)}")
    lookup = edges if isinstance(edges, EdgeLookup) else EdgeLookup(edges)
    reasons: list[str] = []
    if cons.required_relationship is not None:
        for i in range(len(cast)):
            for j in range(i + 1, len(cast)):
                kind = lookup.kind_between(cast[i].pk, cast[j].pk)
                if kind != cons.required_relationship:
                    reasons.append(
                        f"{cast[i].name} and {cast[j].name} are {kind.value}, "
                        f"scenario requires {cons.required_relationship.value}"
                    )
    if cons.age_range is not None:
        lo, hi = cons.age_range
        for profile in cast:
            if not (lo <= profile.age <= hi):
                reasons.append(f"{profile.name} age {profile.age} outside [{lo}, {hi}]")
    if cons.occupation_filter is not None:
        allowed = set(cons.occupation_filter)
        for profile in cast:
            if profile.occupation not in allowed:
                reasons.append(f"{profile.name} occupation {profile.occupation!r} not allowed")
    return (not reasons, reasons)


def canonical_json(doc: Any) -> str:
    """Stable byte form used for persistence and determinism checks."""
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


_SNAKE_RE = re.compile(r"^[a-z0-9_]+$")


def is_snake_case(key: str) -> bool:
    return bool(_SNAKE_RE.match(key))
