from __future__ import annotations

import sys

import pytest

from parley.agents import PolicySpec
from parley.domain import (
    CharacterProfile,
    ConstraintSet,
    PersonalityTraits,
    Relationship,
    RelationshipType,
    Scenario,
)
from parley.engine import Assignment, Mode, SimulationConfig
from parley.persistence import MemoryStore


def make_character(name: str, *, age: int = 30, occupation: str = "engineer", **kw) -> CharacterProfile:
    defaults = dict(
        pronouns="they/them",
        personality=PersonalityTraits(
            openness="high",
            conscientiousness="medium",
            extraversion="medium",
            agreeableness="high",
            neuroticism="low",
        ),
        moral_values=["fairness"],
        public_info=f"{name} enjoys long walks.",
        secret_info=f"{name} once missed a deadline.",
    )
    defaults.update(kw)
    return CharacterProfile(name=name, age=age, occupation=occupation, **defaults)


def make_scenario(arity: int = 2, **kw) -> Scenario:
    defaults = dict(
        context="Two colleagues catch up in the office kitchen.",
        location="office kitchen",
        time="Monday morning",
        agent_goals=[f"goal for slot {i}" for i in range(arity)],
        constraints=ConstraintSet(arity=arity),
    )
    defaults.update(kw)
    return Scenario(**defaults)


def scripted(script: str, **params) -> PolicySpec:
    return PolicySpec(kind="scripted", script=script, params=params)


def seed_dyad(store: MemoryStore, *, kind: RelationshipType | None = RelationshipType.FRIEND):
    """Two characters + a 2-slot scenario (+ optional relationship) in a store."""
    a = make_character("Riley")
    b = make_character("Jamie", occupation="manager", age=41)
    scenario = make_scenario(2)
    store.put("character", a.pk, a.to_dict())
    store.put("character", b.pk, b.to_dict())
    store.put("scenario", scenario.pk, scenario.to_dict())
    if kind is not None:
        edge = Relationship(char_a=a.pk, char_b=b.pk, kind=kind)
        store.put("relationship", edge.pk, edge.to_dict())
    return scenario, a, b


def dyad_config(scenario: Scenario, a: CharacterProfile, b: CharacterProfile, policy_a: PolicySpec, policy_b: PolicySpec, **kw) -> SimulationConfig:
    defaults = dict(mode=Mode.ROUND_ROBIN, seed=7)
    defaults.update(kw)
    return SimulationConfig(
        scenario=scenario.pk,
        assignments=[Assignment(a.pk, policy_a), Assignment(b.pk, policy_b)],
        **defaults,
    )


@pytest.fixture
def store() -> MemoryStore:
    return MemoryStore()


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        verdict = "PASS" if report.passed else "FAIL"
        sys.stderr.write(f"[{verdict}] {name}\n")
