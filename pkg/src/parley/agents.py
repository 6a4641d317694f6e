"""Agent policies: deterministic scripts for tests and LLM-backed role-play.

A policy sees only its own agent's view (profile, goal, drained events,
profiles visible under the relationship lattice) and produces an
:class:`~parley.broker.AgentAction`, or None to stay quiet this wake in
simultaneous mode. Scripted policies are pure functions of that view, so
episodes built from them are reproducible bit-for-bit.

The LLM wire grammar is deliberately dual: keyed lines

    action_type: speak
    argument: hello there
    to: Jamie

or an equivalent JSON object. Parsing is tolerant of surrounding prose
and casing, but never guesses an addressee — ambiguous names fail the
parse rather than misdeliver a private message.
"""

from __future__ import annotations

import asyncio
import json
import random
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .broker import ActionKind, AgentAction, Event
from .domain import CharacterProfile, ObservableProfile, Violation
from .llm import ChatClient


class ParseFailure(ValueError):
    """Model reply did not map to a well-formed action; carries the raw text."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass
class PolicySpec:
    """Serializable description of how one agent slot decides."""

    kind: str  # "scripted" | "llm"
    script: str | None = None
    params: dict[str, Any] = field(default_factory=dict)
    model: str | None = None
    endpoint: str = "default"
    temperature: float = 0.7
    max_output_tokens: int = 256

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "scripted":
            return {"kind": "scripted", "script": self.script, "params": dict(self.params)}
        return {
            "kind": "llm",
            "model": self.model,
            "endpoint": self.endpoint,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PolicySpec":
        kind = str(data.get("kind", "scripted"))
        return cls(
            kind=kind,
            script=data.get("script"),
            params=dict(data.get("params") or {}),
            model=data.get("model"),
            endpoint=str(data.get("endpoint", "default")),
            temperature=float(data.get("temperature", 0.7)),
            max_output_tokens=int(data.get("max_output_tokens", 256)),
        )


def validate_policy_spec(spec: PolicySpec) -> list[Violation]:
    violations = []
    if spec.kind == "llm":
        if not spec.model:
            violations.append(Violation("policy.model", "must be nonempty for llm policies"))
        if not (0.0 <= spec.temperature <= 2.0):
            violations.append(Violation("policy.temperature", "must be within [0, 2]"))
    elif spec.kind == "scripted":
        if spec.script not in SCRIPTS:
            violations.append(Violation("policy.script", f"unknown script {spec.script!r}"))
    else:
        violations.append(Violation("policy.kind", f"unknown policy kind {spec.kind!r}"))
    return violations


@dataclass
class AgentView:
    """Everything a policy may legitimately condition on."""

    pk: str
    name: str
    profile: CharacterProfile
    goal: str
    scenario_context: str
    turn: int              # global action count so far
    own_actions: int       # how many actions this agent has taken
    new_events: list[Event]
    history: list[Event]   # all events this agent has observed, in order
    roster_names: dict[str, str]
    visible_profiles: dict[str, ObservableProfile]
    rng: random.Random
    mode: str = "round_robin"

    def others(self) -> list[str]:
        return [pk for pk in self.roster_names if pk != self.pk]


class Policy:
    """Base policy. Subclasses implement decide()."""

    async def decide(self, view: AgentView) -> AgentAction | None:
        raise NotImplementedError

    def latency(self, rng: random.Random) -> float:
        """Simulated seconds until this agent's next wake (simultaneous mode)."""
        return rng.uniform(0.0, 0.5)


# ---------------------------------------------------------------------------
# Scripted policies

ScriptFn = Callable[[AgentView, dict[str, Any]], AgentAction | None]
SCRIPTS: dict[str, ScriptFn] = {}


def script(name: str) -> Callable[[ScriptFn], ScriptFn]:
    def register(fn: ScriptFn) -> ScriptFn:
        SCRIPTS[name] = fn
        return fn
    return register


@script("silent")
def _silent(view: AgentView, params: dict[str, Any]) -> AgentAction | None:
    if view.mode == "simultaneous":
        return None  # wait; never speaks
    return AgentAction(actor=view.pk, kind=ActionKind.NONE)


@script("always_speak")
def _always_speak(view: AgentView, params: dict[str, Any]) -> AgentAction:
    content = params.get("content", "Let me add to that.")
    return AgentAction(actor=view.pk, kind=ActionKind.SPEAK, content=str(content))


@script("speak_once")
def _speak_once(view: AgentView, params: dict[str, Any]) -> AgentAction | None:
    if view.own_actions > 0:
        return None if view.mode == "simultaneous" else AgentAction(actor=view.pk, kind=ActionKind.NONE)
    content = params.get("content", f"{view.name} checking in.")
    return AgentAction(actor=view.pk, kind=ActionKind.SPEAK, content=str(content))


@script("leave_at_turn")
def _leave_at_turn(view: AgentView, params: dict[str, Any]) -> AgentAction:
    leave_turn = int(params.get("turn", 0))
    if view.turn >= leave_turn:
        return AgentAction(actor=view.pk, kind=ActionKind.LEAVE)
    content = params.get("content", "I don't have long.")
    return AgentAction(actor=view.pk, kind=ActionKind.SPEAK, content=str(content))


@script("echo")
def _echo(view: AgentView, params: dict[str, Any]) -> AgentAction:
    for event in reversed(view.history):
        if event.kind is ActionKind.SPEAK and event.actor != view.pk:
            match = re.search(r'"(.*)"', event.text, re.DOTALL)
            content = match.group(1) if match else event.text
            return AgentAction(actor=view.pk, kind=ActionKind.SPEAK, content=content)
    return AgentAction(actor=view.pk, kind=ActionKind.NONE)


@script("lines")
def _lines(view: AgentView, params: dict[str, Any]) -> AgentAction | None:
    lines = params.get("lines") or []
    index = view.own_actions
    if index >= len(lines):
        then = params.get("then", "none")
        if then == "leave":
            return AgentAction(actor=view.pk, kind=ActionKind.LEAVE)
        if then == "repeat" and lines:
            index = index % len(lines)
        else:
            return None if view.mode == "simultaneous" else AgentAction(actor=view.pk, kind=ActionKind.NONE)
    line = lines[index]
    to = None
    if line.get("to_name"):
        to = resolve_name(str(line["to_name"]), view.roster_names, raw="scripted line")
    return AgentAction(
        actor=view.pk,
        kind=ActionKind(line.get("kind", "speak")),
        content=str(line.get("content", "")),
        to=to,
    )


_CHATTER = (
    "How is everyone doing today?",
    "I was thinking about the plan for next week.",
    "Does anyone want to grab lunch later?",
    "That reminds me of something I read recently.",
    "Let's make sure we're all on the same page.",
)


@script("random_chatter")
def _random_chatter(view: AgentView, params: dict[str, Any]) -> AgentAction:
    rng = view.rng
    content = rng.choice(_CHATTER)
    others = view.others()
    direct_prob = float(params.get("direct_prob", 0.25))
    if others and rng.random() < direct_prob:
        return AgentAction(actor=view.pk, kind=ActionKind.SPEAK, content=content, to=rng.choice(others))
    if rng.random() < 0.15:
        return AgentAction(actor=view.pk, kind=ActionKind.NON_VERBAL, content="nods thoughtfully")
    return AgentAction(actor=view.pk, kind=ActionKind.SPEAK, content=content)


class ScriptedPolicy(Policy):
    def __init__(self, script_id: str, params: dict[str, Any] | None = None):
        if script_id not in SCRIPTS:
            raise ValueError(f"unknown script {script_id!r}")
        self.script_id = script_id
        self.params = dict(params or {})

    async def decide(self, view: AgentView) -> AgentAction | None:
        delay = float(self.params.get("delay_s", 0.0))
        if delay > 0:
            await asyncio.sleep(delay)  # real time; used to make status transitions observable
        return SCRIPTS[self.script_id](view, self.params)

    def latency(self, rng: random.Random) -> float:
        latency = self.params.get("latency")
        if latency is None:
            return super().latency(rng)
        if isinstance(latency, (list, tuple)):
            return rng.uniform(float(latency[0]), float(latency[1]))
        return float(latency)


# ---------------------------------------------------------------------------
# Prompt assembly

FORMAT_INSTRUCTIONS = (
    "Reply with exactly one action in this format:\n"
    "action_type: <speak | non-verbal communication | action | none | leave>\n"
    "argument: <what you say or do>\n"
    "to: <participant name>   (optional; include it only for a private message)"
)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    history: list[str]
    instruction: str

    def messages(self) -> list[dict[str, str]]:
        user_parts = list(self.history) + [self.instruction]
        return [
            {"role": "system", "content": self.system},
            {"role": "user", "content": "\n".join(user_parts)},
        ]


def _profile_lines(view_fields: ObservableProfile) -> list[str]:
    return [f"  {key}: {value}" for key, value in view_fields.items()]


def build_prompt(
    profile: CharacterProfile,
    scenario_context: str,
    goal: str,
    visible_profiles: dict[str, ObservableProfile],
    history: list[Event],
    turn: int,
) -> PromptBundle:
    """Deterministic prompt assembly from one agent's own view.

    Other participants appear only through their lattice-filtered profiles;
    a stranger contributes nothing to the participants section.
    """
    sections = [f"You are role-playing {profile.name}. Stay in character."]
    own = visible_profiles.get(profile.pk, {})
    sections.append("Your character:\n" + "\n".join(_profile_lines(own)))
    sections.append("Scenario:\n" + scenario_context)
    if goal:
        sections.append("Your private goal (do not reveal it directly):\n" + goal)
    other_lines: list[str] = []
    for pk, fields in visible_profiles.items():
        if pk == profile.pk or not fields:
            continue
        label = fields.get("name", "participant")
        other_lines.append(f"- {label}:")
        other_lines.extend("  " + line for line in _profile_lines(fields))
    sections.append("What you know about the other participants:\n" + "\n".join(other_lines))
    sections.append(FORMAT_INSTRUCTIONS)
    system = "\n\n".join(sections)
    rendered = [f"{event.actor_name} {event.text}" for event in history]
    instruction = (
        f"It is turn {turn}. Decide {profile.name}'s next move and reply in the action format."
    )
    return PromptBundle(system=system, history=rendered, instruction=instruction)


# ---------------------------------------------------------------------------
# Action grammar

_KIND_ALIASES = {
    "speak": ActionKind.SPEAK,
    "say": ActionKind.SPEAK,
    "non-verbal communication": ActionKind.NON_VERBAL,
    "non-verbal": ActionKind.NON_VERBAL,
    "nonverbal": ActionKind.NON_VERBAL,
    "non verbal communication": ActionKind.NON_VERBAL,
    "action": ActionKind.PHYSICAL,
    "physical action": ActionKind.PHYSICAL,
    "none": ActionKind.NONE,
    "do nothing": ActionKind.NONE,
    "leave": ActionKind.LEAVE,
}

_KEY_LINE = re.compile(r"^\s*(action_type|argument|to)\s*:\s*(.*?)\s*$", re.IGNORECASE)


def resolve_name(name: str, roster_names: Mapping[str, str], *, raw: str) -> str:
    """Exact case-insensitive name -> pk; ambiguity or no match fails the parse."""
    wanted = name.strip().lower()
    matches = [pk for pk, known in roster_names.items() if known.lower() == wanted]
    if len(matches) != 1:
        reason = "ambiguous" if len(matches) > 1 else "unknown"
        raise ParseFailure(f"{reason} addressee name {name!r}", raw=raw)
    return matches[0]


def _extract_json_object(text: str) -> dict[str, Any] | None:
    candidates = re.findall(r"```(?:json)?\s*(\{.*?\})\s*```", text, re.DOTALL)
    start = text.find("{")
    end = text.rfind("}")
    if start != -1 and end > start:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            obj = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def parse_action(text: str, *, actor: str, roster_names: Mapping[str, str]) -> AgentAction:
    """Tolerantly parse a model reply into an action.

    Accepts the keyed-line grammar or a JSON object; surrounding prose is
    ignored. Raises :class:`ParseFailure` (with the raw reply attached) on
    anything that cannot be mapped safely.
    """
    fields: dict[str, str] = {}
    obj = _extract_json_object(text)
    if obj is not None:
        for key, value in obj.items():
            lowered = str(key).lower()
            if lowered in ("action_type", "argument", "to") and value is not None:
                fields[lowered] = str(value)
    if "action_type" not in fields:
        fields = {}
        for line in text.splitlines():
            match = _KEY_LINE.match(line)
            if match:
                key = match.group(1).lower()
                fields.setdefault(key, match.group(2))
    kind_raw = fields.get("action_type", "").strip().strip("\"'`").lower()
    if kind_raw not in _KIND_ALIASES:
        raise ParseFailure(f"unmapped action_type {kind_raw!r}", raw=text)
    kind = _KIND_ALIASES[kind_raw]
    to: str | None = None
    to_name = fields.get("to", "").strip()
    if to_name:
        to = resolve_name(to_name, roster_names, raw=text)
        if to == actor:
            raise ParseFailure("addressee resolves to the actor itself", raw=text)
    try:
        return AgentAction(actor=actor, kind=kind, content=fields.get("argument", ""), to=to)
    except ValueError as exc:
        raise ParseFailure(str(exc), raw=text) from exc


def render_action(action: AgentAction, roster_names: Mapping[str, str]) -> str:
    """Inverse of parse_action for well-formed actions.

    Content that the keyed-line grammar cannot carry verbatim (newlines,
    edge whitespace) is emitted as the JSON encoding instead.
    """
    if "\n" in action.content or action.content != action.content.strip():
        obj: dict[str, str] = {"action_type": action.kind.value, "argument": action.content}
        if action.to is not None:
            obj["to"] = roster_names[action.to]
        return json.dumps(obj, ensure_ascii=False)
    lines = [f"action_type: {action.kind.value}"]
    if action.content:
        lines.append(f"argument: {action.content}")
    if action.to is not None:
        lines.append(f"to: {roster_names[action.to]}")
    return "\n".join(lines)


class LlmPolicy(Policy):
    def __init__(self, spec: PolicySpec, client: ChatClient):
        self.spec = spec
        self.client = client

    async def decide(self, view: AgentView) -> AgentAction:
        bundle = build_prompt(
            view.profile,
            view.scenario_context,
            view.goal,
            view.visible_profiles,
            view.history,
            view.turn,
        )
        reply = await self.client.complete(
            bundle.messages(),
            model=self.spec.model or "",
            endpoint=self.spec.endpoint,
            temperature=self.spec.temperature,
            max_tokens=self.spec.max_output_tokens,
        )
        return parse_action(reply.text, actor=view.pk, roster_names=view.roster_names)


def build_policy(spec: PolicySpec, *, client: ChatClient | None = None) -> Policy:
    violations = validate_policy_spec(spec)
    if violations:
        raise ValueError("; ".join(str(v) for v in violations))
    if spec.kind == "scripted":
        return ScriptedPolicy(spec.script or "", spec.params)
    if client is None:
        raise ValueError("llm policy requires a chat client")
    return LlmPolicy(spec, client)
