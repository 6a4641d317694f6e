"""Message broker: turns one agent's action into per-recipient observations.

The broker is the only place where information flow between agents is
decided. Broadcast actions reach every active participant (the actor gets
an echo so its transcript view is self-contained); direct actions reach
exactly the actor and the addressee; a "none" action reaches nobody.
Profile visibility is applied once, in the turn-0 observations; message
content itself is not filtered by relationship.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .domain import (
    CharacterProfile,
    EdgeLookup,
    ObservableProfile,
    Scenario,
    full_profile_view,
    visible_fields,
)


class ActionKind(str, Enum):
    """The five things an agent can do on its turn.

    Values double as the wire grammar's action_type tokens.
    """

    SPEAK = "speak"
    NON_VERBAL = "non-verbal communication"
    PHYSICAL = "action"
    NONE = "none"
    LEAVE = "leave"


ALL_ACTION_KINDS = tuple(ActionKind)


class UnknownActorError(KeyError):
    pass


class UnknownAddresseeError(KeyError):
    pass


@dataclass(frozen=True)
class AgentAction:
    """One agent action. `to` is an agent pk for direct messages, None for broadcast."""

    actor: str
    kind: ActionKind
    content: str = ""
    to: str | None = None

    def __post_init__(self) -> None:
        if self.to is not None and self.to == self.actor:
            raise ValueError("direct addressee must differ from actor")
        if self.kind in (ActionKind.NONE, ActionKind.LEAVE):
            object.__setattr__(self, "content", "")
        elif not self.content:
            raise ValueError(f"{self.kind.value} requires content")

    @property
    def is_direct(self) -> bool:
        return self.to is not None

    def to_dict(self) -> dict:
        return {"actor": self.actor, "kind": self.kind.value, "content": self.content, "to": self.to}

    @classmethod
    def from_dict(cls, data: dict) -> "AgentAction":
        return cls(
            actor=str(data["actor"]),
            kind=ActionKind(data["kind"]),
            content=str(data.get("content", "")),
            to=data.get("to"),
        )


@dataclass(frozen=True)
class Event:
    """A rendered, perceivable occurrence as delivered to one recipient."""

    actor: str
    actor_name: str
    kind: ActionKind
    text: str
    to: str | None = None  # direct addressee pk, None for broadcast


@dataclass
class Observation:
    """What one agent gets to see at one point in time."""

    turn: int
    events: list[Event] = field(default_factory=list)
    visible_profiles: dict[str, ObservableProfile] = field(default_factory=dict)
    available_actions: tuple[ActionKind, ...] = ALL_ACTION_KINDS
    context: str | None = None  # set on the turn-0 observation only
    goal: str | None = None


class MessageQueue:
    """Per-agent FIFO of pending observations; many producers, one consumer."""

    def __init__(self) -> None:
        self._items: deque[Observation] = deque()
        self._cond = threading.Condition()

    def enqueue(self, observation: Observation) -> None:
        with self._cond:
            self._items.append(observation)
            self._cond.notify()

    def drain(self) -> list[Observation]:
        """Return all pending observations in FIFO order and empty the queue."""
        with self._cond:
            items = list(self._items)
            self._items.clear()
        return items

    def drain_wait(self, timeout: float | None = None) -> list[Observation]:
        """Block until at least one observation is pending (or timeout), then drain."""
        with self._cond:
            self._cond.wait_for(lambda: bool(self._items), timeout=timeout)
            items = list(self._items)
            self._items.clear()
        return items

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


def render_event_text(action: AgentAction, names: dict[str, str]) -> str:
    """Human-readable rendering of an action, without the actor's name."""
    if action.kind is ActionKind.SPEAK:
        if action.is_direct:
            return f'said privately to {names.get(action.to, action.to)}: "{action.content}"'
        return f'said: "{action.content}"'
    if action.kind is ActionKind.NON_VERBAL:
        return f"[non-verbal] {action.content}"
    if action.kind is ActionKind.PHYSICAL:
        return f"[action] {action.content}"
    if action.kind is ActionKind.LEAVE:
        return "left the conversation"
    return "did nothing"


def route(
    action: AgentAction,
    roster: list[str],
    names: dict[str, str],
    turn: int = 0,
) -> dict[str, Observation]:
    """Map one action to per-recipient observation deltas.

    `roster` must contain only active (non-departed) agents; routing to
    departed agents is the caller's mistake, not the broker's job.
    """
    if action.actor not in roster:
        raise UnknownActorError(action.actor)
    if action.is_direct and action.to not in roster:
        raise UnknownAddresseeError(action.to)
    if action.kind is ActionKind.NONE:
        return {}
    event = Event(
        actor=action.actor,
        actor_name=names.get(action.actor, action.actor),
        kind=action.kind,
        text=render_event_text(action, names),
        to=action.to,
    )
    if action.is_direct:
        recipients = [action.actor, action.to]
    else:
        recipients = list(roster)
    return {pk: Observation(turn=turn, events=[event]) for pk in recipients}


def initial_observations(
    scenario: Scenario,
    cast: list[CharacterProfile],
    edges: EdgeLookup,
) -> dict[str, Observation]:
    """Turn-0 observation per agent: shared context, own profile and goal,
    and every other cast member projected through the governing relationship."""
    shared = scenario.shared_text()
    observations: dict[str, Observation] = {}
    for slot, me in enumerate(cast):
        profiles: dict[str, ObservableProfile] = {me.pk: full_profile_view(me)}
        for other in cast:
            if other.pk == me.pk:
                continue
            kind = edges.kind_between(me.pk, other.pk)
            profiles[other.pk] = visible_fields(me.pk, other, kind)
        observations[me.pk] = Observation(
            turn=0,
            visible_profiles=profiles,
            context=shared,
            goal=scenario.agent_goals[slot],
        )
    return observations
