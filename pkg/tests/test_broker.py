from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parley.broker import (
    ActionKind,
    AgentAction,
    MessageQueue,
    Observation,
    UnknownActorError,
    UnknownAddresseeError,
    initial_observations,
    route,
)
from parley.domain import EdgeLookup, Relationship, RelationshipType

from conftest import make_character, make_scenario

ROSTER = [f"agent{i}" for i in range(5)]
NAMES = {pk: pk.capitalize() for pk in ROSTER}


class TestAgentAction:
    def test_direct_to_self_rejected(self):
        with pytest.raises(ValueError):
            AgentAction(actor="a", kind=ActionKind.SPEAK, content="hi", to="a")

    def test_none_carries_no_content(self):
        action = AgentAction(actor="a", kind=ActionKind.NONE, content="ignored")
        assert action.content == ""

    def test_speak_requires_content(self):
        with pytest.raises(ValueError):
            AgentAction(actor="a", kind=ActionKind.SPEAK, content="")

    def test_five_kinds(self):
        assert len(ActionKind) == 5


class TestRoute:
    def test_broadcast_reaches_whole_roster(self):
        action = AgentAction(actor="agent0", kind=ActionKind.SPEAK, content="hello all")
        deltas = route(action, ROSTER, NAMES, turn=3)
        assert set(deltas) == set(ROSTER)
        for obs in deltas.values():
            assert obs.turn == 3
            assert len(obs.events) == 1
            assert obs.events[0].actor == "agent0"

    def test_direct_reaches_exactly_actor_and_addressee(self):
        action = AgentAction(actor="agent0", kind=ActionKind.SPEAK, content="psst", to="agent3")
        deltas = route(action, ROSTER, NAMES)
        assert set(deltas) == {"agent0", "agent3"}
        assert deltas["agent3"].events[0].to == "agent3"

    def test_none_routes_to_nobody(self):
        action = AgentAction(actor="agent0", kind=ActionKind.NONE)
        assert route(action, ROSTER, NAMES) == {}

    def test_leave_announced_to_all(self):
        action = AgentAction(actor="agent2", kind=ActionKind.LEAVE)
        deltas = route(action, ROSTER, NAMES)
        assert set(deltas) == set(ROSTER)
        assert all("left" in obs.events[0].text for obs in deltas.values())

    def test_unknown_actor_and_addressee(self):
        with pytest.raises(UnknownActorError):
            route(AgentAction(actor="ghost", kind=ActionKind.SPEAK, content="x"), ROSTER, NAMES)
        with pytest.raises(UnknownAddresseeError):
            route(
                AgentAction(actor="agent0", kind=ActionKind.SPEAK, content="x", to="ghost"),
                ROSTER,
                NAMES,
            )

    @given(
        size=st.integers(1, 8),
        kind=st.sampled_from([ActionKind.SPEAK, ActionKind.NON_VERBAL, ActionKind.PHYSICAL, ActionKind.NONE, ActionKind.LEAVE]),
        direct=st.booleans(),
    )
    @settings(max_examples=80)
    def test_conservation(self, size, kind, direct):
        roster = [f"a{i}" for i in range(size)]
        names = {pk: pk for pk in roster}
        to = roster[1] if direct and size > 1 and kind not in (ActionKind.NONE, ActionKind.LEAVE) else None
        content = "" if kind in (ActionKind.NONE, ActionKind.LEAVE) else "words"
        action = AgentAction(actor=roster[0], kind=kind, content=content, to=to)
        deltas = route(action, roster, names)
        if kind is ActionKind.NONE:
            assert len(deltas) == 0
        elif to is not None:
            assert len(deltas) == 2
        else:
            assert len(deltas) == len(roster)

    def test_direct_event_never_delivered_to_third_parties(self):
        action = AgentAction(actor="agent0", kind=ActionKind.SPEAK, content="secret plan", to="agent1")
        deltas = route(action, ROSTER, NAMES)
        for recipient, obs in deltas.items():
            for event in obs.events:
                if event.to is not None:
                    assert recipient in (event.to, event.actor)


class TestInitialObservations:
    def make_cast(self, kind: RelationshipType | None):
        a = make_character("Riley", secret_info="riley-secret")
        b = make_character("Jamie", secret_info="jamie-secret")
        scenario = make_scenario(2)
        edges = EdgeLookup(
            [] if kind is None else [Relationship(char_a=a.pk, char_b=b.pk, kind=kind)]
        )
        return scenario, a, b, edges

    def test_strangers_see_empty_profiles(self):
        scenario, a, b, edges = self.make_cast(None)
        obs = initial_observations(scenario, [a, b], edges)
        assert obs[a.pk].visible_profiles[b.pk] == {}
        assert obs[b.pk].visible_profiles[a.pk] == {}

    def test_family_sees_all_but_secrets(self):
        scenario, a, b, edges = self.make_cast(RelationshipType.FAMILY)
        obs = initial_observations(scenario, [a, b], edges)
        view = obs[a.pk].visible_profiles[b.pk]
        assert view["name"] == "Jamie"
        assert "secret_info" not in view

    def test_own_goal_present_other_goals_absent(self):
        scenario, a, b, edges = self.make_cast(RelationshipType.FRIEND)
        obs = initial_observations(scenario, [a, b], edges)
        assert obs[a.pk].goal == scenario.agent_goals[0]
        assert obs[b.pk].goal == scenario.agent_goals[1]
        assert scenario.agent_goals[1] not in (obs[a.pk].goal or "")

    def test_shared_context_present_for_everyone(self):
        scenario, a, b, edges = self.make_cast(RelationshipType.FRIEND)
        obs = initial_observations(scenario, [a, b], edges)
        for agent_obs in obs.values():
            assert scenario.context in (agent_obs.context or "")

    def test_own_profile_includes_secret(self):
        scenario, a, b, edges = self.make_cast(None)
        obs = initial_observations(scenario, [a, b], edges)
        assert obs[a.pk].visible_profiles[a.pk]["secret_info"] == "riley-secret"


class TestMessageQueue:
    def obs(self, turn: int) -> Observation:
        return Observation(turn=turn)

    def test_fifo(self):
        queue = MessageQueue()
        o1, o2 = self.obs(1), self.obs(2)
        queue.enqueue(o1)
        queue.enqueue(o2)
        assert queue.drain() == [o1, o2]
        assert queue.drain() == []

    def test_drain_empty(self):
        assert MessageQueue().drain() == []

    def test_concurrent_producers_lose_nothing(self):
        # N producers, M items each; per-producer order must survive.
        queue = MessageQueue()
        producers, per_producer = 8, 50
        barrier = threading.Barrier(producers)

        def produce(producer: int) -> None:
            barrier.wait()
            for i in range(per_producer):
                queue.enqueue(Observation(turn=producer * 1000 + i))

        threads = [threading.Thread(target=produce, args=(p,)) for p in range(producers)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        drained = queue.drain()
        assert len(drained) == producers * per_producer
        for producer in range(producers):
            turns = [obs.turn for obs in drained if obs.turn // 1000 == producer]
            assert turns == sorted(turns)

    def test_drain_wait_blocks_until_item(self):
        queue = MessageQueue()
        result: list = []

        def consume() -> None:
            result.extend(queue.drain_wait(timeout=5))

        thread = threading.Thread(target=consume)
        thread.start()
        queue.enqueue(self.obs(9))
        thread.join(timeout=5)
        assert not thread.is_alive()
        assert [obs.turn for obs in result] == [9]
