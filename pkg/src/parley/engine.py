"""Episode engine: drives agents to a terminated transcript under a turn protocol.

Round-robin mode is a fixed circular order, one action per agent per
round. Simultaneous mode is a discrete-event loop over a simulated
clock: every agent is a logical task that wakes, drains its queue,
decides whether to act, and schedules its next wake after a sampled
latency. Because the clock is simulated and all randomness is seeded,
an episode is a pure function of (config, seed) — transcripts are
byte-identical across reruns and across batch parallelism levels.

A policy failure is retried twice with backoff, then the turn degrades
to a "none" action; three consecutive failed turns remove the agent with
an error note while the episode continues for the others.
"""

from __future__ import annotations

import asyncio
import heapq
import logging
import random
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Awaitable, Callable, Mapping

from .agents import AgentView, Policy, PolicySpec, build_policy, validate_policy_spec
from .broker import (
    ActionKind,
    AgentAction,
    Event,
    MessageQueue,
    initial_observations,
    route,
)
from .domain import (
    ArityMismatchError,
    CharacterProfile,
    EdgeLookup,
    Relationship,
    Scenario,
    Violation,
    check_constraints,
    new_pk,
)
from .evaluation import DimensionScore, EvaluationMetric, Judge, validate_metrics
from .llm import ChatClient, EndpointNotConfigured, endpoint_from_env
from .persistence import Store

logger = logging.getLogger(__name__)

DEFAULT_MAX_TURNS = 20
DEFAULT_SIM_BUDGET = 60.0  # simulated seconds, when a simultaneous config sets no budget


class Mode(str, Enum):
    ROUND_ROBIN = "round_robin"
    SIMULTANEOUS = "simultaneous"


class TerminationReason(str, Enum):
    ALL_LEFT = "all_left"
    MAX_TURNS = "max_turns"
    GOAL_CONDITION = "goal_condition"
    BUDGET = "budget"
    ERROR = "error"


class SimulationStatus(str, Enum):
    QUEUED = "queued"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class ResolutionError(RuntimeError):
    """Config references entities that do not resolve, or the cast is invalid."""


@dataclass
class Assignment:
    character: str
    policy: PolicySpec

    def to_dict(self) -> dict[str, Any]:
        return {"character": self.character, "policy": self.policy.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Assignment":
        return cls(character=str(data["character"]), policy=PolicySpec.from_dict(data.get("policy") or {}))


@dataclass
class SimulationConfig:
    scenario: str
    assignments: list[Assignment]
    mode: Mode = Mode.ROUND_ROBIN
    max_turns: int = DEFAULT_MAX_TURNS
    metrics: list[EvaluationMetric] = field(default_factory=list)
    wall_clock_budget: float | None = None
    tag: str | None = None
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "assignments": [a.to_dict() for a in self.assignments],
            "mode": self.mode.value,
            "max_turns": self.max_turns,
            "metrics": [m.to_dict() for m in self.metrics],
            "wall_clock_budget": self.wall_clock_budget,
            "tag": self.tag,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimulationConfig":
        return cls(
            scenario=str(data.get("scenario", "")),
            assignments=[Assignment.from_dict(a) for a in data.get("assignments") or []],
            mode=Mode(str(data.get("mode", "round_robin"))),
            max_turns=int(data.get("max_turns", DEFAULT_MAX_TURNS)),
            metrics=[EvaluationMetric.from_dict(m) for m in data.get("metrics") or []],
            wall_clock_budget=None if data.get("wall_clock_budget") is None else float(data["wall_clock_budget"]),
            tag=None if data.get("tag") is None else str(data["tag"]),
            seed=None if data.get("seed") is None else int(data["seed"]),
        )


def validate_config(config: SimulationConfig) -> list[Violation]:
    violations = []
    if not config.scenario:
        violations.append(Violation("scenario", "must reference a scenario pk"))
    if not config.assignments:
        violations.append(Violation("assignments", "at least one agent required"))
    if config.max_turns < 1:
        violations.append(Violation("max_turns", "must be >= 1"))
    for index, assignment in enumerate(config.assignments):
        if not assignment.character:
            violations.append(Violation(f"assignments[{index}].character", "must reference a character pk"))
        violations.extend(validate_policy_spec(assignment.policy))
    violations.extend(validate_metrics(config.metrics))
    return violations


@dataclass(frozen=True)
class Termination:
    reason: TerminationReason
    detail: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"reason": self.reason.value, "detail": self.detail}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Termination":
        return cls(reason=TerminationReason(data["reason"]), detail=data.get("detail"))


@dataclass(frozen=True)
class TranscriptEntry:
    turn: int
    action: AgentAction

    def to_dict(self) -> dict[str, Any]:
        return {"turn": self.turn, "actor": self.action.actor, "action": self.action.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TranscriptEntry":
        return cls(turn=int(data["turn"]), action=AgentAction.from_dict(data["action"]))


@dataclass
class EpisodeRecord:
    pk: str
    scenario: str
    cast: list[str]
    policies: list[dict[str, Any]]
    transcript: list[TranscriptEntry]
    termination: Termination
    evaluations: list[DimensionScore] = field(default_factory=list)
    evaluation_errors: list[str] = field(default_factory=list)
    tag: str | None = None
    seed: int | None = None
    created_at: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "pk": self.pk,
            "scenario": self.scenario,
            "cast": list(self.cast),
            "policies": list(self.policies),
            "transcript": [entry.to_dict() for entry in self.transcript],
            "termination": self.termination.to_dict(),
            "evaluations": [score.to_dict() for score in self.evaluations],
            "evaluation_errors": list(self.evaluation_errors),
            "tag": self.tag,
            "seed": self.seed,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EpisodeRecord":
        return cls(
            pk=str(data["pk"]),
            scenario=str(data.get("scenario", "")),
            cast=[str(pk) for pk in data.get("cast") or []],
            policies=list(data.get("policies") or []),
            transcript=[TranscriptEntry.from_dict(e) for e in data.get("transcript") or []],
            termination=Termination.from_dict(data.get("termination") or {"reason": "error"}),
            evaluations=[DimensionScore.from_dict(s) for s in data.get("evaluations") or []],
            evaluation_errors=[str(e) for e in data.get("evaluation_errors") or []],
            tag=data.get("tag"),
            seed=data.get("seed"),
            created_at=str(data.get("created_at", "")),
        )


def validate_record(record: EpisodeRecord) -> list[Violation]:
    violations = []
    last_turn = -1
    left: set[str] = set()
    for entry in record.transcript:
        if entry.turn < last_turn:
            violations.append(Violation("transcript", f"turn {entry.turn} after {last_turn} (must be non-decreasing)"))
        last_turn = entry.turn
        if entry.action.actor in left:
            violations.append(Violation("transcript", f"action by departed actor {entry.action.actor}"))
        if entry.action.kind is ActionKind.LEAVE:
            left.add(entry.action.actor)
    return violations


def next_actor_round_robin(order: list[str], turn: int, departed: set[str]) -> str | None:
    """order[turn mod n], skipping departed slots; None when everyone departed."""
    slot = _next_slot(order, turn, departed)
    return None if slot is None else slot[0]


def _next_slot(order: list[str], turn: int, departed: set[str]) -> tuple[str, int] | None:
    if not order:
        return None
    for offset in range(len(order)):
        candidate = order[(turn + offset) % len(order)]
        if candidate not in departed:
            return candidate, turn + offset
    return None


@dataclass
class EpisodeState:
    """Inputs to the termination decision, in one place."""

    arity: int
    active: int
    error_departed: bool
    actions: int
    max_turns: int
    goal_met: bool = False
    sim_now: float | None = None
    budget: float | None = None
    deadline_hit: bool = False


def check_termination(state: EpisodeState) -> Termination | None:
    """Fixed priority: departures, then goal, then turn limit, then budget.

    A multiparty episode continues while at least two participants remain;
    a single-agent episode only ends when that agent leaves.
    """
    threshold = 2 if state.arity >= 2 else 1
    if state.active < threshold:
        if state.error_departed:
            return Termination(TerminationReason.ERROR, "agent failure ended the episode")
        return Termination(TerminationReason.ALL_LEFT)
    if state.goal_met:
        return Termination(TerminationReason.GOAL_CONDITION)
    if state.actions >= state.max_turns:
        return Termination(TerminationReason.MAX_TURNS)
    if state.deadline_hit:
        return Termination(TerminationReason.BUDGET, "real-time limit reached")
    if state.budget is not None and state.sim_now is not None and state.sim_now >= state.budget:
        return Termination(TerminationReason.BUDGET)
    return None


@dataclass
class _AgentRuntime:
    pk: str
    name: str
    profile: CharacterProfile
    goal: str
    policy: Policy
    rng: random.Random
    queue: MessageQueue = field(default_factory=MessageQueue)
    history: list[Event] = field(default_factory=list)
    visible_profiles: dict[str, Any] = field(default_factory=dict)
    context: str = ""
    departed: bool = False
    error_departed: bool = False
    consecutive_failures: int = 0
    actions_taken: int = 0


GoalCondition = Callable[[list[TranscriptEntry]], bool]
ActionHook = Callable[[TranscriptEntry], Awaitable[None]]


class EpisodeRunner:
    """Runs one episode at a time against a store; safe to reuse sequentially
    and to share across concurrent runs (all per-episode state is local)."""

    def __init__(
        self,
        store: Store,
        *,
        llm_client: ChatClient | None = None,
        judge: Judge | None = None,
        retry_backoff: float = 0.5,
        retain_history: bool = True,
        on_action: ActionHook | None = None,
    ):
        self.store = store
        self._llm_client = llm_client
        self.judge = judge
        self.retry_backoff = retry_backoff
        self.retain_history = retain_history
        self.on_action = on_action

    # resolution -------------------------------------------------------------
    def resolve(self, config: SimulationConfig) -> tuple[Scenario, list[CharacterProfile], EdgeLookup]:
        violations = validate_config(config)
        if violations:
            raise ResolutionError("invalid config: " + "; ".join(str(v) for v in violations))
        scenario_doc = self.store.get("scenario", config.scenario)
        if scenario_doc is None:
            raise ResolutionError(f"scenario {config.scenario!r} not found")
        scenario = Scenario.from_dict(scenario_doc)
        cast = []
        for assignment in config.assignments:
            doc = self.store.get("character", assignment.character)
            if doc is None:
                raise ResolutionError(f"character {assignment.character!r} not found")
            cast.append(CharacterProfile.from_dict(doc))
        if len({c.pk for c in cast}) != len(cast):
            raise ResolutionError("a character may fill only one slot")
        if len(cast) != scenario.arity:
            raise ResolutionError(f"scenario expects {scenario.arity} agents, config assigns {len(cast)}")
        cast_pks = {c.pk for c in cast}
        edges = EdgeLookup(
            Relationship.from_dict(doc)
            for doc in self.store.list("relationship")
            if doc.get("char_a") in cast_pks and doc.get("char_b") in cast_pks
        )
        try:
            ok, reasons = check_constraints(scenario, cast, edges)
        except ArityMismatchError as exc:
            raise ResolutionError(str(exc)) from exc
        if not ok:
            raise ResolutionError("constraints not satisfied: " + "; ".join(reasons))
        for assignment in config.assignments:
            if assignment.policy.kind == "llm" and self._llm_client is None:
                # Fail fast on missing credentials rather than mid-episode.
                endpoint_from_env(assignment.policy.endpoint)
        return scenario, cast, edges

    # main entry -------------------------------------------------------------
    async def run(
        self,
        config: SimulationConfig,
        *,
        episode_pk: str | None = None,
        goal_condition: GoalCondition | None = None,
        real_time_limit: float | None = None,
        stats_out: dict[str, Any] | None = None,
    ) -> EpisodeRecord:
        pk = episode_pk or new_pk()
        try:
            scenario, cast, edges = self.resolve(config)
        except (ResolutionError, EndpointNotConfigured) as exc:
            self._set_status(pk, SimulationStatus.FAILED, detail=str(exc))
            raise ResolutionError(str(exc)) from exc

        self._set_status(pk, SimulationStatus.RUNNING, progress=0)
        client = self._llm_client
        if any(a.policy.kind == "llm" for a in config.assignments) and client is None:
            client = ChatClient()
        seed = config.seed if config.seed is not None else 0
        runtimes: dict[str, _AgentRuntime] = {}
        for slot, (profile, assignment) in enumerate(zip(cast, config.assignments)):
            runtimes[profile.pk] = _AgentRuntime(
                pk=profile.pk,
                name=profile.name,
                profile=profile,
                goal=scenario.agent_goals[slot],
                policy=build_policy(assignment.policy, client=client),
                rng=random.Random(f"{seed}:{slot}:{profile.pk}"),
            )
        for agent_pk, observation in initial_observations(scenario, cast, edges).items():
            agent = runtimes[agent_pk]
            agent.visible_profiles = observation.visible_profiles
            agent.context = observation.context or ""
            agent.queue.enqueue(observation)

        transcript: list[TranscriptEntry] = []
        stats = {"deliveries": 0, "sim_time": 0.0}
        try:
            if config.mode is Mode.ROUND_ROBIN:
                termination = await self._run_round_robin(
                    config, pk, runtimes, list(runtimes), transcript, goal_condition, real_time_limit, stats
                )
            else:
                termination = await self._run_simultaneous(
                    config, pk, runtimes, list(runtimes), transcript, goal_condition, real_time_limit, stats
                )
        except asyncio.CancelledError:
            self._set_status(pk, SimulationStatus.FAILED, detail="cancelled")
            raise
        except Exception as exc:  # engine bug or broker misuse; keep the batch alive
            logger.exception("episode %s crashed", pk)
            termination = Termination(TerminationReason.ERROR, f"engine failure: {exc}")

        record = EpisodeRecord(
            pk=pk,
            scenario=scenario.pk,
            cast=[c.pk for c in cast],
            policies=[a.policy.to_dict() for a in config.assignments],
            transcript=transcript,
            termination=termination,
            tag=config.tag,
            seed=config.seed,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        if config.metrics and self.judge is not None and termination.reason is not TerminationReason.ERROR:
            scores, errors = await self.judge.judge_episode(record, config.metrics, cast, scenario)
            record.evaluations = scores
            record.evaluation_errors = errors
        self.store.put("episode", pk, record.to_dict())
        final = (
            SimulationStatus.FAILED
            if termination.reason is TerminationReason.ERROR
            else SimulationStatus.COMPLETED
        )
        self._set_status(pk, final, progress=len(transcript), detail=termination.detail)
        if stats_out is not None:
            stats_out.update(stats, actions=len(transcript))
        return record

    # decision with the retry contract ----------------------------------------
    async def _decide(
        self, agent: _AgentRuntime, view: AgentView, active: set[str]
    ) -> AgentAction | None:
        last_error: Exception | None = None
        for attempt in range(3):
            if attempt:
                await asyncio.sleep(self.retry_backoff * (2 ** (attempt - 1)))
            try:
                action = await agent.policy.decide(view)
                if action is not None:
                    if action.actor != agent.pk:
                        raise ValueError(f"policy returned action for {action.actor}, not {agent.pk}")
                    if action.to is not None and action.to not in active:
                        raise ValueError(f"addressee {action.to} has departed")
            except Exception as exc:
                last_error = exc
                logger.warning("agent %s decide failed (attempt %d): %s", agent.name, attempt + 1, exc)
                continue
            agent.consecutive_failures = 0
            return action
        agent.consecutive_failures += 1
        logger.warning("agent %s turn degraded to none after retries: %s", agent.name, last_error)
        return AgentAction(actor=agent.pk, kind=ActionKind.NONE)

    @staticmethod
    def _mark_if_struck_out(agent: _AgentRuntime) -> None:
        # Third consecutive failed turn removes the agent; the episode goes on.
        if agent.consecutive_failures >= 3 and not agent.departed:
            agent.departed = True
            agent.error_departed = True
            logger.error("agent %s departed after repeated failures", agent.name)

    def _make_view(self, agent: _AgentRuntime, runtimes: dict[str, _AgentRuntime], turn: int, mode: Mode) -> AgentView:
        drained = agent.queue.drain()
        new_events = [event for obs in drained for event in obs.events]
        if self.retain_history:
            agent.history.extend(new_events)
            history = agent.history
        else:
            history = new_events
        return AgentView(
            pk=agent.pk,
            name=agent.name,
            profile=agent.profile,
            goal=agent.goal,
            scenario_context=agent.context,
            turn=turn,
            own_actions=agent.actions_taken,
            new_events=new_events,
            history=history,
            roster_names={pk: rt.name for pk, rt in runtimes.items()},
            visible_profiles=agent.visible_profiles,
            rng=agent.rng,
            mode=mode.value,
        )

    async def _emit(
        self,
        action: AgentAction,
        runtimes: dict[str, _AgentRuntime],
        transcript: list[TranscriptEntry],
        stats: dict[str, Any],
    ) -> None:
        turn = len(transcript)
        entry = TranscriptEntry(turn=turn, action=action)
        transcript.append(entry)
        active = [pk for pk, rt in runtimes.items() if not rt.departed]
        names = {pk: rt.name for pk, rt in runtimes.items()}
        deltas = route(action, active, names, turn=turn)
        for recipient, delta in deltas.items():
            runtimes[recipient].queue.enqueue(delta)
            if recipient != action.actor:
                stats["deliveries"] += 1
        runtimes[action.actor].actions_taken += 1
        if action.kind is ActionKind.LEAVE:
            runtimes[action.actor].departed = True
        if self.on_action is not None:
            await self.on_action(entry)

    def _episode_state(
        self,
        config: SimulationConfig,
        runtimes: dict[str, _AgentRuntime],
        transcript: list[TranscriptEntry],
        goal_condition: GoalCondition | None,
        *,
        sim_now: float | None = None,
        budget: float | None = None,
        deadline_hit: bool = False,
    ) -> EpisodeState:
        active = sum(1 for rt in runtimes.values() if not rt.departed)
        return EpisodeState(
            arity=len(runtimes),
            active=active,
            error_departed=any(rt.error_departed for rt in runtimes.values()),
            actions=len(transcript),
            max_turns=config.max_turns,
            goal_met=bool(goal_condition(transcript)) if goal_condition else False,
            sim_now=sim_now,
            budget=budget,
            deadline_hit=deadline_hit,
        )

    # round-robin ------------------------------------------------------------
    async def _run_round_robin(
        self,
        config: SimulationConfig,
        pk: str,
        runtimes: dict[str, _AgentRuntime],
        order: list[str],
        transcript: list[TranscriptEntry],
        goal_condition: GoalCondition | None,
        real_time_limit: float | None,
        stats: dict[str, Any],
    ) -> Termination:
        deadline = None if real_time_limit is None else time.monotonic() + real_time_limit
        slot = 0
        while True:
            deadline_hit = deadline is not None and time.monotonic() >= deadline
            termination = check_termination(
                self._episode_state(config, runtimes, transcript, goal_condition, deadline_hit=deadline_hit)
            )
            if termination is not None:
                return termination
            departed = {agent_pk for agent_pk, rt in runtimes.items() if rt.departed}
            nxt = _next_slot(order, slot, departed)
            if nxt is None:
                return Termination(TerminationReason.ALL_LEFT)
            actor_pk, used_slot = nxt
            slot = used_slot + 1
            agent = runtimes[actor_pk]
            active = {a for a, rt in runtimes.items() if not rt.departed}
            view = self._make_view(agent, runtimes, len(transcript), Mode.ROUND_ROBIN)
            action = await self._decide(agent, view, active)
            if action is None:  # waiting is not a round-robin option
                action = AgentAction(actor=agent.pk, kind=ActionKind.NONE)
            await self._emit(action, runtimes, transcript, stats)
            self._mark_if_struck_out(agent)
            self._set_status(pk, SimulationStatus.RUNNING, progress=len(transcript))

    # simultaneous (discrete-event over a simulated clock) --------------------
    async def _run_simultaneous(
        self,
        config: SimulationConfig,
        pk: str,
        runtimes: dict[str, _AgentRuntime],
        order: list[str],
        transcript: list[TranscriptEntry],
        goal_condition: GoalCondition | None,
        real_time_limit: float | None,
        stats: dict[str, Any],
    ) -> Termination:
        budget = config.wall_clock_budget if config.wall_clock_budget is not None else DEFAULT_SIM_BUDGET
        deadline = None if real_time_limit is None else time.monotonic() + real_time_limit
        now = 0.0
        seq = 0
        wakes: list[tuple[float, int, str]] = []
        for agent_pk in order:
            agent = runtimes[agent_pk]
            heapq.heappush(wakes, (agent.policy.latency(agent.rng), seq, agent_pk))
            seq += 1
        while wakes:
            deadline_hit = deadline is not None and time.monotonic() >= deadline
            termination = check_termination(
                self._episode_state(
                    config, runtimes, transcript, goal_condition,
                    sim_now=now, budget=budget, deadline_hit=deadline_hit,
                )
            )
            if termination is not None:
                stats["sim_time"] = now
                return termination
            wake_time, _, actor_pk = heapq.heappop(wakes)
            if wake_time >= budget:
                stats["sim_time"] = budget
                return Termination(TerminationReason.BUDGET)
            now = wake_time
            agent = runtimes[actor_pk]
            if agent.departed:
                continue
            active = {a for a, rt in runtimes.items() if not rt.departed}
            view = self._make_view(agent, runtimes, len(transcript), Mode.SIMULTANEOUS)
            action = await self._decide(agent, view, active)
            if action is not None:
                await self._emit(action, runtimes, transcript, stats)
                if len(transcript) % 50 == 0:
                    self._set_status(pk, SimulationStatus.RUNNING, progress=len(transcript))
            self._mark_if_struck_out(agent)
            if not agent.departed:
                heapq.heappush(wakes, (now + agent.policy.latency(agent.rng), seq, actor_pk))
                seq += 1
        stats["sim_time"] = now
        termination = check_termination(
            self._episode_state(config, runtimes, transcript, goal_condition, sim_now=now, budget=budget)
        )
        return termination or Termination(TerminationReason.BUDGET)

    # status docs -------------------------------------------------------------
    def _set_status(
        self,
        pk: str,
        status: SimulationStatus,
        *,
        progress: int | None = None,
        detail: str | None = None,
    ) -> None:
        doc: dict[str, Any] = {"pk": pk, "status": status.value}
        if progress is not None:
            doc["progress"] = progress
        if detail:
            doc["detail"] = detail
        self.store.put("status", pk, doc)


def set_queued(store: Store, pk: str) -> None:
    store.put("status", pk, {"pk": pk, "status": SimulationStatus.QUEUED.value, "progress": 0})


async def run_batch(
    store: Store,
    configs: list[SimulationConfig],
    parallelism: int = 1,
    *,
    llm_client: ChatClient | None = None,
    judge: Judge | None = None,
    retry_backoff: float = 0.5,
) -> list[str]:
    """Run every config with at most `parallelism` episodes in flight.

    Each episode persists (or fails) independently; the returned pks are in
    config order and each has a terminal status document.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    runner = EpisodeRunner(
        store, llm_client=llm_client, judge=judge, retry_backoff=retry_backoff
    )
    pks = [new_pk() for _ in configs]
    for pk in pks:
        set_queued(store, pk)
    semaphore = asyncio.Semaphore(parallelism)

    async def run_one(config: SimulationConfig, pk: str) -> None:
        async with semaphore:
            try:
                await runner.run(config, episode_pk=pk)
            except ResolutionError:
                pass  # status already FAILED; keep the batch going
            except Exception as exc:  # defensive: never abort sibling episodes
                logger.exception("episode %s failed", pk)
                store.put("status", pk, {"pk": pk, "status": SimulationStatus.FAILED.value, "detail": str(exc)})

    await asyncio.gather(*(run_one(config, pk) for config, pk in zip(configs, pks)))
    return pks
