#!/usr/bin/env python3
"""Seed a store with demo entities: a hiring-negotiation dyad and a
five-person planning group, with relationships and scenarios.

Usage:
    python3 scripts/seed_demo_data.py --store-url redis://127.0.0.1:6379/0
    python3 scripts/seed_demo_data.py --export demo.jsonl
"""

from __future__ import annotations

import argparse
import json

from parley import (
    CharacterProfile,
    ConstraintSet,
    PersonalityTraits,
    Relationship,
    RelationshipType,
    Scenario,
    open_store,
)


def build_entities():
    manager = CharacterProfile(
        name="Morgan Hale",
        gender="woman",
        age=46,
        occupation="hiring manager",
        pronouns="she/her",
        personality=PersonalityTraits(
            openness="moderate", conscientiousness="high", extraversion="moderate",
            agreeableness="low", neuroticism="low",
        ),
        moral_values=["loyalty", "authority"],
        decision_style="analytical",
        public_info="Runs the platform team; known for tight budgets.",
        secret_info="Has approval to go up to the top of the salary band if pressed.",
    )
    candidate = CharacterProfile(
        name="Casey Nguyen",
        gender="nonbinary",
        age=29,
        occupation="software engineer",
        pronouns="they/them",
        personality=PersonalityTraits(
            openness="high", conscientiousness="high", extraversion="low",
            agreeableness="high", neuroticism="moderate",
        ),
        moral_values=["fairness", "care"],
        decision_style="deliberate",
        public_info="Five years of backend experience; finishing a contract in June.",
        secret_info="Has a competing offer that expires next week.",
    )
    planners = [
        CharacterProfile(
            name=name, age=age, occupation=occupation, pronouns=pronouns,
            personality=PersonalityTraits(extraversion=extra, agreeableness=agree),
            public_info=public,
            secret_info=secret,
        )
        for name, age, occupation, pronouns, extra, agree, public, secret in [
            ("Alex Petrov", 34, "product lead", "he/him", "high", "low",
             "Pushes hard for shipping.", "Worried a delay costs him a promotion."),
            ("Taylor Brooks", 31, "designer", "they/them", "moderate", "moderate",
             "Loves the outdoors.", "Already paid a deposit on a campsite."),
            ("Sam Ortiz", 27, "engineer", "she/her", "low", "high",
             "Quiet in groups.", "Wants whatever Jamie wants."),
            ("Riley Chen", 30, "engineer", "he/him", "high", "high",
             "Organizes team events.", "Thinks the work project is understaffed."),
            ("Jamie Doyle", 26, "analyst", "she/her", "moderate", "high",
             "New to the team.", "Hasn't formed an opinion and feels pressure to."),
        ]
    ]
    characters = [manager, candidate, *planners]

    relationships = [
        Relationship(char_a=manager.pk, char_b=candidate.pk, kind=RelationshipType.STRANGER,
                     backstory="They meet for the first time in this negotiation."),
    ]
    for i, left in enumerate(planners):
        for right in planners[i + 1:]:
            relationships.append(
                Relationship(char_a=left.pk, char_b=right.pk, kind=RelationshipType.FRIEND,
                             backstory="Teammates for over a year.")
            )

    negotiation = Scenario(
        context=(
            "A final-round job negotiation over two terms: the start date "
            "(6.1, 6.15, 7.1, 7.15 or 8.1) and the salary in $k (100, 105, 110, 115 or 120). "
            "State any final agreement as 'AGREEMENT: date=<option>; salary=<option>'."
        ),
        location="video call",
        time="Friday afternoon",
        agent_goals=[
            "Hire the candidate while conceding as little as possible: prefer a late start and a low salary.",
            "Join the company on terms that work for you: prefer an early start and a high salary.",
        ],
        constraints=ConstraintSet(arity=2, required_relationship=RelationshipType.STRANGER),
    )
    planning = Scenario(
        context=(
            "Five teammates must settle next month's plan. Alex wants to focus on the work "
            "project; Taylor wants a camping trip; the others are undecided. Group chat and "
            "private messages are both available."
        ),
        location="team chat",
        time="Monday, 10am",
        agent_goals=[
            "Get the group to commit to the work project first.",
            "Get the group to commit to the camping trip.",
            "Avoid conflict; side with the emerging majority.",
            "Find a compromise everyone accepts.",
            "Form an opinion by asking others privately.",
        ],
        constraints=ConstraintSet(arity=5, required_relationship=RelationshipType.FRIEND),
    )
    return characters, relationships, [negotiation, planning]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--store-url", default=None, help="store to seed (default: $STORE_URL)")
    parser.add_argument("--export", default=None, help="also write a JSON-lines dump to this path")
    args = parser.parse_args()

    characters, relationships, scenarios = build_entities()
    store = open_store(args.store_url)
    for character in characters:
        store.put("character", character.pk, character.to_dict())
    for relationship in relationships:
        store.put("relationship", relationship.pk, relationship.to_dict())
    for scenario in scenarios:
        store.put("scenario", scenario.pk, scenario.to_dict())
    print(f"seeded {len(characters)} characters, {len(relationships)} relationships, {len(scenarios)} scenarios")
    for scenario in scenarios:
        print(f"  scenario {scenario.pk}: {scenario.context[:60]}...")

    if args.export:
        with open(args.export, "w", encoding="utf-8") as fh:
            for kind, items in (
                ("character", characters),
                ("relationship", relationships),
                ("scenario", scenarios),
            ):
                for item in items:
                    fh.write(json.dumps({"kind": kind, "doc": item.to_dict()}, ensure_ascii=False) + "\n")
        print(f"wrote {args.export}")


if __name__ == "__main__":
    main()
