from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parley.domain import (
    ArityMismatchError,
    CharacterProfile,
    ConstraintSet,
    DuplicateEdgeError,
    EdgeLookup,
    PersonalityTraits,
    Relationship,
    RelationshipType,
    Scenario,
    check_constraints,
    full_profile_view,
    validate_character,
    validate_relationship,
    validate_scenario,
    visible_fields,
)

from conftest import make_character, make_scenario

CLOSENESS_ORDER = [
    RelationshipType.STRANGER,
    RelationshipType.ACQUAINTANCE,
    RelationshipType.FRIEND,
    RelationshipType.ROMANTIC,
    RelationshipType.FAMILY,
]

# The visibility table as declared, used as an independent oracle for
# visible_fields: per kind, exactly these base fields (extra_public keys
# join at friend level and above).
LATTICE_TABLE = {
    RelationshipType.STRANGER: set(),
    RelationshipType.ACQUAINTANCE: {"name", "gender", "pronouns", "age", "occupation"},
    RelationshipType.FRIEND: {"name", "gender", "pronouns", "age", "occupation", "public_info"},
    RelationshipType.ROMANTIC: {
        "name", "gender", "pronouns", "age", "occupation", "public_info",
        "personality", "moral_values", "decision_style",
    },
    RelationshipType.FAMILY: {
        "name", "gender", "pronouns", "age", "occupation", "public_info",
        "personality", "moral_values", "decision_style",
    },
}


def full_character(**kw) -> CharacterProfile:
    defaults = dict(
        gender="nonbinary",
        decision_style="deliberate",
        extra_public={"hobby": "chess"},
        extra_private={"diary": "hidden"},
    )
    defaults.update(kw)
    return make_character("Riley", **defaults)


class TestValidateCharacter:
    def test_well_formed_profile_ok(self):
        assert validate_character(make_character("Ada", age=34)) == []

    def test_negative_age_flagged(self):
        violations = validate_character(make_character("Ada", age=-1))
        assert any(v.field == "age" and "non-negative" in v.rule for v in violations)

    def test_missing_name_flagged(self):
        assert any(v.field == "name" for v in validate_character(CharacterProfile()))


class TestRelationshipType:
    def test_exactly_five_kinds(self):
        assert len(RelationshipType) == 5

    def test_total_closeness_order(self):
        closeness = [kind.closeness for kind in CLOSENESS_ORDER]
        assert closeness == sorted(closeness)
        assert len(set(closeness)) == 5
        assert RelationshipType.FAMILY.closeness > RelationshipType.ROMANTIC.closeness
        assert RelationshipType.ROMANTIC.closeness > RelationshipType.FRIEND.closeness


class TestVisibility:
    def test_stranger_sees_nothing(self):
        target = full_character()
        assert visible_fields("viewer", target, RelationshipType.STRANGER) == {}

    def test_family_sees_all_but_secrets(self):
        target = full_character()
        view = visible_fields("viewer", target, RelationshipType.FAMILY)
        assert "secret_info" not in view
        assert "diary" not in view
        assert view["name"] == "Riley"
        assert view["hobby"] == "chess"
        assert view["public_info"] == target.public_info
        assert "personality" in view and "moral_values" in view

    def test_acquaintance_fixed_field_set(self):
        target = full_character()
        view = visible_fields("viewer", target, RelationshipType.ACQUAINTANCE)
        assert set(view) == {"name", "gender", "pronouns", "age", "occupation"}
        assert view["age"] == "30"

    @pytest.mark.parametrize("kind", list(RelationshipType))
    def test_matches_lattice_table(self, kind):
        target = full_character()
        view = visible_fields("viewer", target, kind)
        expected = set(LATTICE_TABLE[kind])
        if kind.closeness >= RelationshipType.FRIEND.closeness:
            expected = expected | set(target.extra_public)
        assert set(view) == expected

    def test_monotone_in_closeness(self):
        target = full_character()
        previous: set[str] = set()
        for kind in CLOSENESS_ORDER:
            current = set(visible_fields("viewer", target, kind))
            assert previous <= current
            previous = current

    @given(
        secret=st.text(min_size=1, max_size=30),
        diary=st.text(min_size=1, max_size=30),
        kind=st.sampled_from(list(RelationshipType)),
    )
    def test_secrets_never_visible(self, secret, diary, kind):
        target = full_character(secret_info=secret, extra_private={"diary": diary})
        view = visible_fields("viewer", target, kind)
        assert "secret_info" not in view
        assert "diary" not in view

    def test_self_view_goes_through_full_profile(self):
        target = full_character()
        with pytest.raises(ValueError):
            visible_fields(target.pk, target, RelationshipType.FAMILY)
        own = full_profile_view(target)
        assert own["secret_info"] == target.secret_info
        assert own["diary"] == "hidden"


class TestEdgeLookup:
    def test_undirected_and_defaulting(self):
        a, b, c = make_character("A"), make_character("B"), make_character("C")
        lookup = EdgeLookup([Relationship(char_a=a.pk, char_b=b.pk, kind=RelationshipType.FAMILY)])
        assert lookup.kind_between(a.pk, b.pk) is RelationshipType.FAMILY
        assert lookup.kind_between(b.pk, a.pk) is RelationshipType.FAMILY
        assert lookup.kind_between(a.pk, c.pk) is RelationshipType.STRANGER

    def test_duplicate_pair_rejected(self):
        a, b = make_character("A"), make_character("B")
        edges = [
            Relationship(char_a=a.pk, char_b=b.pk, kind=RelationshipType.FRIEND),
            Relationship(char_a=b.pk, char_b=a.pk, kind=RelationshipType.FAMILY),
        ]
        with pytest.raises(DuplicateEdgeError):
            EdgeLookup(edges)

    def test_self_edge_flagged(self):
        a = make_character("A")
        rel = Relationship(char_a=a.pk, char_b=a.pk, kind=RelationshipType.FRIEND)
        assert any(v.field == "char_b" for v in validate_relationship(rel))


class TestCheckConstraints:
    def test_missing_edge_defaults_to_stranger(self):
        # Oracle: with no stored edges, every unordered pair must look like
        # a stranger pair, so a stranger-requiring scenario accepts any cast.
        scenario = make_scenario(2, constraints=ConstraintSet(arity=2, required_relationship=RelationshipType.STRANGER))
        cast = [make_character("A"), make_character("B")]
        lookup = EdgeLookup([])
        for i in range(len(cast)):
            for j in range(i + 1, len(cast)):
                assert lookup.kind_between(cast[i].pk, cast[j].pk) is RelationshipType.STRANGER
        ok, reasons = check_constraints(scenario, cast, lookup)
        assert ok and reasons == []

    def test_age_range_names_offender(self):
        scenario = make_scenario(2, constraints=ConstraintSet(arity=2, age_range=(25, 40)))
        cast = [make_character("A", age=30), make_character("B", age=45)]
        ok, reasons = check_constraints(scenario, cast, [])
        assert not ok
        assert any("B" in reason for reason in reasons)

    def test_no_constraints_vacuously_true(self):
        scenario = make_scenario(3)
        cast = [make_character(n) for n in "ABC"]
        ok, reasons = check_constraints(scenario, cast, [])
        assert ok and reasons == []

    def test_arity_mismatch_is_an_error(self):
        scenario = make_scenario(2)
        with pytest.raises(ArityMismatchError):
            check_constraints(scenario, [make_character("A")], [])

    def test_occupation_filter(self):
        scenario = make_scenario(2, constraints=ConstraintSet(arity=2, occupation_filter=["manager"]))
        cast = [make_character("A", occupation="manager"), make_character("B", occupation="engineer")]
        ok, reasons = check_constraints(scenario, cast, [])
        assert not ok and any("B" in r for r in reasons)

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=30)
    def test_relationship_check_permutation_invariant(self, seed):
        import random

        rng = random.Random(seed)
        cast = [make_character(f"C{i}") for i in range(4)]
        edges = []
        for i in range(4):
            for j in range(i + 1, 4):
                if rng.random() < 0.6:
                    edges.append(Relationship(char_a=cast[i].pk, char_b=cast[j].pk, kind=RelationshipType.FRIEND))
        scenario = make_scenario(4, constraints=ConstraintSet(arity=4, required_relationship=RelationshipType.FRIEND))
        ok, _ = check_constraints(scenario, cast, edges)
        shuffled = cast[:]
        rng.shuffle(shuffled)
        ok_shuffled, _ = check_constraints(scenario, shuffled, edges)
        assert ok == ok_shuffled


names = st.text(st.characters(codec="utf-8", exclude_categories=("Cs", "Cc")), min_size=1, max_size=20)
texts = st.text(st.characters(codec="utf-8", exclude_categories=("Cs", "Cc")), max_size=40)


@st.composite
def characters(draw) -> CharacterProfile:
    return CharacterProfile(
        name=draw(names),
        gender=draw(st.none() | texts),
        age=draw(st.integers(0, 120)),
        occupation=draw(texts),
        pronouns=draw(texts),
        personality=PersonalityTraits(
            openness=draw(texts),
            conscientiousness=draw(texts),
            extraversion=draw(texts),
            agreeableness=draw(texts),
            neuroticism=draw(texts),
        ),
        moral_values=draw(st.lists(texts, max_size=3)),
        decision_style=draw(st.none() | texts),
        public_info=draw(texts),
        secret_info=draw(texts),
        extra_public=draw(st.dictionaries(names, texts, max_size=3)),
        extra_private=draw(st.dictionaries(names, texts, max_size=3)),
    )


class TestSerde:
    @given(profile=characters())
    @settings(max_examples=60)
    def test_character_round_trip(self, profile):
        doc = json.loads(json.dumps(profile.to_dict()))
        assert CharacterProfile.from_dict(doc) == profile

    def test_unknown_keys_preserved_into_extras(self):
        doc = make_character("Ada").to_dict()
        doc["favorite_color"] = "teal"
        profile = CharacterProfile.from_dict(doc)
        assert profile.extra_private["favorite_color"] == "teal"
        assert "favorite_color" in profile.to_dict()["extra_private"]

    def test_scenario_round_trip_with_unknown_keys(self):
        scenario = make_scenario(2, extra_shared={"mood": "tense"})
        doc = scenario.to_dict()
        doc["stakes"] = "high"
        parsed = Scenario.from_dict(doc)
        assert parsed.extra_shared["mood"] == "tense"
        assert parsed.extra_shared["stakes"] == "high"
        assert parsed.agent_goals == scenario.agent_goals
        assert Scenario.from_dict(parsed.to_dict()) == parsed

    def test_relationship_round_trip(self):
        rel = Relationship(char_a="a", char_b="b", kind=RelationshipType.ROMANTIC, backstory="met at work")
        assert Relationship.from_dict(rel.to_dict()) == rel

    def test_validate_survives_round_trip(self):
        profile = make_character("Ada", age=34)
        assert validate_character(profile) == []
        again = CharacterProfile.from_dict(json.loads(json.dumps(profile.to_dict())))
        assert validate_character(again) == []
        assert again == profile


class TestScenarioValidation:
    def test_goalless_scenario_flagged(self):
        scenario = Scenario(context="x", agent_goals=[], constraints=ConstraintSet(arity=1))
        assert any(v.field == "agent_goals" for v in validate_scenario(scenario))

    def test_arity_must_match_goals(self):
        scenario = Scenario(context="x", agent_goals=["a", "b"], constraints=ConstraintSet(arity=3))
        assert any("arity" in v.field for v in validate_scenario(scenario))

    def test_bad_age_range_flagged(self):
        scenario = make_scenario(1, constraints=ConstraintSet(arity=1, age_range=(40, 20)))
        assert any("age_range" in v.field for v in validate_scenario(scenario))
