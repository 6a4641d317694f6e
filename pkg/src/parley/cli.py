"""Operator entry points: serve the API, run batches, stress-test, report, move data.

Every command exits 0 on success, 1 on failure, 2 on usage errors, and
takes --json for machine-readable output where it prints results.
"""

from __future__ import annotations

import asyncio
import csv
import io
import json
import math
import os
import socket
import time
from typing import Any

import click

from .agents import PolicySpec
from .api import DEFAULT_PORT, create_app
from .engine import (
    Assignment,
    EpisodeRecord,
    EpisodeRunner,
    Mode,
    SimulationConfig,
    SimulationStatus,
    run_batch,
)
from .evaluation import (
    Judge,
    PayoffTable,
    extract_outcome_scripted,
    hiring_negotiation_table,
    score_negotiation,
)
from .llm import ChatClient, EndpointNotConfigured, endpoint_from_env
from .persistence import MemoryStore, StoreError, open_store

ENTITY_KINDS = ("scenario", "character", "relationship", "episode")


def _store_option(fn):
    return click.option(
        "--store-url",
        default=None,
        help="memory:// (default) or redis://host:port/db; falls back to $STORE_URL",
    )(fn)


def _json_option(fn):
    return click.option("--json", "as_json", is_flag=True, help="machine-readable output")(fn)


def _judge_from_env() -> Judge | None:
    model = os.environ.get("JUDGE_MODEL")
    if not model:
        return None
    endpoint_from_env(os.environ.get("JUDGE_ENDPOINT", "default"))
    return Judge(ChatClient(), model=model, endpoint=os.environ.get("JUDGE_ENDPOINT", "default"))


@click.group()
def main() -> None:
    """Multi-party social simulation toolkit."""


# serve ----------------------------------------------------------------------
@main.command()
@click.option("--port", default=DEFAULT_PORT, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--cors-origin", default=None, help="origin allowed to call the API from a browser")
@click.option("--parallelism", default=4, show_default=True, help="queued episodes run concurrently")
@_store_option
def serve(port: int, host: str, cors_origin: str | None, parallelism: int, store_url: str | None) -> None:
    """Start the HTTP/WebSocket API server."""
    import uvicorn

    try:
        store = open_store(store_url)
        judge = _judge_from_env()
    except (StoreError, EndpointNotConfigured) as exc:
        raise click.ClickException(str(exc))
    try:
        sock = socket.create_server((host, port))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}")
    bound_port = sock.getsockname()[1]
    click.echo(f"listening on http://{host}:{bound_port}")
    app = create_app(store, judge=judge, parallelism=parallelism, cors_origin=cors_origin)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])


# simulate ---------------------------------------------------------------------
@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", default=1, show_default=True, help="episodes to run from this config")
@click.option("--parallelism", default=1, show_default=True)
@_store_option
@_json_option
def simulate(config_path: str, n: int, parallelism: int, store_url: str | None, as_json: bool) -> None:
    """Run N episodes of a config file and print their episode pks."""
    if n < 0:
        raise click.UsageError("--n must be >= 0")
    if n == 0:
        if as_json:
            click.echo(json.dumps({"episodes": []}))
        return
    with open(config_path, "r", encoding="utf-8") as fh:
        try:
            config = SimulationConfig.from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise click.ClickException(f"bad config file: {exc}")
    for assignment in config.assignments:
        if assignment.policy.kind == "llm":
            try:
                endpoint_from_env(assignment.policy.endpoint)
            except EndpointNotConfigured as exc:
                raise click.ClickException(
                    f"{exc} (llm policies need MODEL_BASE_URL and MODEL_API_KEY before simulating)"
                )
    try:
        store = open_store(store_url)
        judge = _judge_from_env() if config.metrics else None
    except (StoreError, EndpointNotConfigured) as exc:
        raise click.ClickException(str(exc))
    configs = []
    base_seed = config.seed if config.seed is not None else 0
    for i in range(n):
        clone = SimulationConfig.from_dict(config.to_dict())
        clone.seed = base_seed + i
        configs.append(clone)
    pks = asyncio.run(run_batch(store, configs, parallelism=parallelism, judge=judge))
    rows = []
    failures = 0
    for pk in pks:
        status_doc = store.get("status", pk) or {}
        status = status_doc.get("status", SimulationStatus.FAILED.value)
        failures += status != SimulationStatus.COMPLETED.value
        rows.append({"episode_pk": pk, "status": status})
    if as_json:
        click.echo(json.dumps({"episodes": rows}))
    else:
        for row in rows:
            click.echo(f"{row['episode_pk']}  {row['status']}")
    if failures:
        raise click.ClickException(f"{failures} of {len(pks)} episodes failed")


# stress -----------------------------------------------------------------------
def stress_episode(agents: int, duration: float, *, seed: int = 0) -> dict[str, Any]:
    """One simultaneous-mode episode of scripted chatter agents, bounded by real time.

    Measures the engine and broker only (no LLM calls). Reports both
    throughput readings: actions emitted per second, and observation
    deliveries to *other* agents per second.
    """
    from .domain import CharacterProfile, ConstraintSet, Scenario

    store = MemoryStore()
    cast_pks = []
    for i in range(agents):
        profile = CharacterProfile(name=f"Agent {i}", age=30, occupation="chatter", pronouns="they/them")
        store.put("character", profile.pk, profile.to_dict())
        cast_pks.append(profile.pk)
    scenario = Scenario(
        context="A very large group chat.",
        agent_goals=[f"keep the chat going ({i})" for i in range(agents)],
        constraints=ConstraintSet(arity=agents),
    )
    store.put("scenario", scenario.pk, scenario.to_dict())
    config = SimulationConfig(
        scenario=scenario.pk,
        assignments=[
            Assignment(pk, PolicySpec(kind="scripted", script="always_speak", params={"content": "ping"}))
            for pk in cast_pks
        ],
        mode=Mode.SIMULTANEOUS,
        max_turns=10**9,
        wall_clock_budget=math.inf,
        seed=seed,
    )
    runner = EpisodeRunner(store, retain_history=False)
    stats: dict[str, Any] = {}
    start = time.monotonic()
    asyncio.run(runner.run(config, real_time_limit=duration, stats_out=stats))
    elapsed = max(time.monotonic() - start, 1e-9)
    return {
        "agents": agents,
        "duration_sec": round(elapsed, 3),
        "actions": stats["actions"],
        "deliveries": stats["deliveries"],
        "actions_per_sec": stats["actions"] / elapsed,
        "deliveries_per_sec": stats["deliveries"] / elapsed,
    }


@main.command()
@click.option("--agents", default=150, show_default=True)
@click.option("--duration", default=30.0, show_default=True, help="seconds of real time per run")
@click.option("--sweep", is_flag=True, help="run rungs of 10..agents step 10 instead of one run")
@click.option("--seed", default=0, show_default=True)
@_json_option
def stress(agents: int, duration: float, sweep: bool, seed: int, as_json: bool) -> None:
    """Throughput stress test with scripted chatter agents (no LLM calls)."""
    if agents < 1:
        raise click.UsageError("--agents must be >= 1")
    rungs = list(range(10, agents + 1, 10)) if sweep else [agents]
    if sweep and not rungs:
        rungs = [agents]
    results = [stress_episode(n, duration, seed=seed) for n in rungs]
    if as_json:
        click.echo(json.dumps({"runs": results}))
        return
    click.echo(f"{'agents':>7} {'actions':>9} {'deliveries':>11} {'actions/s':>10} {'deliveries/s':>13}")
    for result in results:
        click.echo(
            f"{result['agents']:>7} {result['actions']:>9} {result['deliveries']:>11} "
            f"{result['actions_per_sec']:>10.1f} {result['deliveries_per_sec']:>13.1f}"
        )


# report -------------------------------------------------------------------------
@main.command()
@click.option("--scenario", "scenario_pk", required=True, help="scenario pk to aggregate over")
@click.option("--group-by", "group_by", default="tag", show_default=True)
@click.option("--payoff", "payoff_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="payoff table JSON; defaults to the bundled hiring table")
@_store_option
@_json_option
def report(scenario_pk: str, group_by: str, payoff_path: str | None, store_url: str | None, as_json: bool) -> None:
    """Per-group mean deal rate and points over a scenario's episodes (CSV)."""
    if group_by != "tag":
        raise click.UsageError("only --group-by tag is supported (groups come from SimulationConfig.tag)")
    try:
        store = open_store(store_url)
    except StoreError as exc:
        raise click.ClickException(str(exc))
    table = PayoffTable.load(payoff_path) if payoff_path else hiring_negotiation_table()
    groups: dict[str, list] = {}
    for doc in store.list("episode", {"scenario": scenario_pk}):
        record = EpisodeRecord.from_dict(doc)
        outcome = extract_outcome_scripted(record)
        score = score_negotiation(outcome, table)
        groups.setdefault(record.tag or "untagged", []).append(score)
    rows = []
    for group in sorted(groups):
        scores = groups[group]
        count = len(scores)
        rows.append(
            {
                "group": group,
                "episodes": count,
                "deal_rate": sum(s.deal_made for s in scores) / count,
                "mean_candidate_points": sum(s.candidate for s in scores) / count,
                "mean_manager_points": sum(s.manager for s in scores) / count,
            }
        )
    if as_json:
        click.echo(json.dumps({"rows": rows}))
        return
    out = io.StringIO()
    writer = csv.DictWriter(
        out, fieldnames=["group", "episodes", "deal_rate", "mean_candidate_points", "mean_manager_points"]
    )
    writer.writeheader()
    writer.writerows(rows)
    click.echo(out.getvalue().rstrip("\n"))


# data import/export ---------------------------------------------------------------
@main.group()
def data() -> None:
    """Bulk entity import/export as JSON lines."""


@data.command("export")
@click.argument("file", type=click.Path(dir_okay=False))
@_store_option
@_json_option
def data_export(file: str, store_url: str | None, as_json: bool) -> None:
    """Dump every entity to FILE, one {"kind", "doc"} object per line."""
    try:
        store = open_store(store_url)
    except StoreError as exc:
        raise click.ClickException(str(exc))
    count = 0
    with open(file, "w", encoding="utf-8") as fh:
        for kind in ENTITY_KINDS:
            for doc in store.list(kind):
                fh.write(json.dumps({"kind": kind, "doc": doc}, ensure_ascii=False) + "\n")
                count += 1
    if as_json:
        click.echo(json.dumps({"exported": count}))
    else:
        click.echo(f"exported {count} entities to {file}")


@data.command("import")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_store_option
@_json_option
def data_import(file: str, store_url: str | None, as_json: bool) -> None:
    """Load entities from FILE (JSON lines, as written by export)."""
    try:
        store = open_store(store_url)
    except StoreError as exc:
        raise click.ClickException(str(exc))
    count = 0
    with open(file, "r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                kind = entry["kind"]
                doc = entry["doc"]
                if kind not in ENTITY_KINDS:
                    raise ValueError(f"unknown kind {kind!r}")
                store.put(kind, str(doc["pk"]), doc)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, StoreError) as exc:
                raise click.ClickException(f"line {line_number}: {exc}")
            count += 1
    if as_json:
        click.echo(json.dumps({"imported": count}))
    else:
        click.echo(f"imported {count} entities from {file}")


if __name__ == "__main__":
    main()
