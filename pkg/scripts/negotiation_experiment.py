#!/usr/bin/env python3
"""Hiring-negotiation experiment: simulate dyads per personality tag, then
aggregate deal rate and points per group.

With MODEL_BASE_URL and MODEL_API_KEY set, candidate and manager run on a
live model (--model). Without credentials the script falls back to scripted
stand-ins so the full pipeline stays runnable offline; the resulting table
then exercises the machinery, not model behavior.

Usage:
    python3 scripts/negotiation_experiment.py --n 10 --model gpt-4o-mini
    python3 scripts/negotiation_experiment.py --n 10            # offline stand-ins
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import os
import sys

from parley import (
    Assignment,
    EpisodeRecord,
    SimulationConfig,
    extract_outcome_scripted,
    hiring_negotiation_table,
    open_store,
    run_batch,
    score_negotiation,
)
from parley.agents import PolicySpec

sys.path.insert(0, os.path.dirname(__file__))
from seed_demo_data import build_entities  # noqa: E402

PERSONA_TAGS = {
    "high_agreeableness": "You are warm and collaborative; you value reaching an agreement.",
    "low_agreeableness": "You are blunt and competitive; you would rather walk away than concede.",
    "extraversion": "You are talkative and assertive; you push the conversation forward.",
    "introversion": "You are reserved; you answer briefly and avoid confrontation.",
}

# Offline stand-ins: outcomes vary by tag so the aggregate table is non-trivial.
STANDIN_AGREEMENTS = {
    "high_agreeableness": "AGREEMENT: date=7.1; salary=110",
    "low_agreeableness": None,
    "extraversion": "AGREEMENT: date=6.15; salary=115",
    "introversion": "AGREEMENT: date=7.15; salary=105",
}


def standin_policy(tag: str) -> PolicySpec:
    agreement = STANDIN_AGREEMENTS[tag]
    if agreement is None:
        lines = [{"kind": "speak", "content": "Those terms do not work for me."}]
    else:
        lines = [{"kind": "speak", "content": f"Let's settle it. {agreement}"}]
    return PolicySpec(kind="scripted", script="lines", params={"lines": lines, "then": "leave"})


def llm_policy(model: str) -> PolicySpec:
    return PolicySpec(kind="llm", model=model, temperature=0.7)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=4, help="episodes per personality tag")
    parser.add_argument("--model", default=None, help="chat model for both roles (needs MODEL_* env)")
    parser.add_argument("--store-url", default=None)
    parser.add_argument("--parallelism", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    live = bool(args.model and os.environ.get("MODEL_BASE_URL") and os.environ.get("MODEL_API_KEY"))
    if args.model and not live:
        parser.error("--model requires MODEL_BASE_URL and MODEL_API_KEY in the environment")

    store = open_store(args.store_url)
    characters, relationships, scenarios = build_entities()
    negotiation = scenarios[0]
    manager, candidate = characters[0], characters[1]
    for character in (manager, candidate):
        store.put("character", character.pk, character.to_dict())
    store.put("relationship", relationships[0].pk, relationships[0].to_dict())
    store.put("scenario", negotiation.pk, negotiation.to_dict())

    configs = []
    for tag, persona in PERSONA_TAGS.items():
        scenario = negotiation
        if live:
            # fold the personality framing into the candidate's goal
            tagged = type(scenario).from_dict(scenario.to_dict())
            tagged.agent_goals = [scenario.agent_goals[0], f"{persona} {scenario.agent_goals[1]}"]
            store.put("scenario", tagged.pk, tagged.to_dict())
            scenario = tagged
        for i in range(args.n):
            configs.append(
                SimulationConfig(
                    scenario=scenario.pk,
                    assignments=[
                        Assignment(manager.pk, llm_policy(args.model) if live else standin_policy(tag)),
                        Assignment(candidate.pk, llm_policy(args.model) if live else standin_policy(tag)),
                    ],
                    tag=tag,
                    seed=args.seed + i,
                )
            )

    print(f"running {len(configs)} episodes ({'live model' if live else 'scripted stand-ins'})...")
    pks = asyncio.run(run_batch(store, configs, parallelism=args.parallelism))

    table = hiring_negotiation_table()
    groups: dict[str, list] = {}
    for pk in pks:
        doc = store.get("episode", pk)
        if doc is None:
            continue
        record = EpisodeRecord.from_dict(doc)
        score = score_negotiation(extract_outcome_scripted(record), table)
        groups.setdefault(record.tag or "untagged", []).append(score)

    writer = csv.writer(sys.stdout)
    writer.writerow(["trait", "episodes", "deal_rate", "mean_candidate_points", "mean_manager_points"])
    for tag in PERSONA_TAGS:
        scores = groups.get(tag, [])
        if not scores:
            continue
        count = len(scores)
        writer.writerow([
            tag,
            count,
            round(sum(s.deal_made for s in scores) / count, 3),
            round(sum(s.candidate for s in scores) / count, 1),
            round(sum(s.manager for s in scores) / count, 1),
        ])


if __name__ == "__main__":
    main()
