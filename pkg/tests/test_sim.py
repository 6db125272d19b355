import pytest

from refinement_acting.core import DomainError, GroundAction, Task
from refinement_acting.sim import (PRE_FAIL_COST, Environment, ExoEvent, Problem, Rng, Status, ground_outcomes,
                                   pending_events, pick, sample)


def test_rng_streams_are_reproducible_and_independent():
    a, b = Rng(3, "x"), Rng(3, "x")
    assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
    assert a.draws == 5
    assert Rng(3, "x").split("env").random() != Rng(3, "x").split("select").random()
    assert Rng(3, "x").random() != Rng(4, "x").random()


def test_pick_follows_cumulative_probabilities(domains, micro_state):
    d = domains("micro-choice")
    outs = ground_outcomes(d, micro_state(d), GroundAction("risky", ()))
    assert [round(o.prob, 2) for o in outs] == [0.6, 0.4]
    assert pick(outs, 0.0) == 0 and pick(outs, 0.59) == 0 and pick(outs, 0.6) == 1 and pick(outs, 0.999999) == 1


def test_sample_frequencies(domains, micro_state):
    d = domains("micro-choice")
    rng = Rng(0, "freq")
    ok = sum(sample(d, micro_state(d), GroundAction("risky", ()), rng)[0] is not None for _ in range(20000))
    assert ok / 20000 == pytest.approx(0.6, abs=0.015)


def test_false_precondition_fails_at_fixed_cost(domains):
    d = domains("courier")
    s = d.space.state({("at", ("p1",)): "depot", ("at", ("p2",)): "depot", ("bridgeOpen", ()): False,
                       ("stocked", ("shop",)): False})
    assert ground_outcomes(d, s, GroundAction("bridge", ("p1", "shop"))) == ((1.0, None, PRE_FAIL_COST),)


def test_unknown_action_is_an_error(domains, micro_state):
    d = domains("micro-choice")
    with pytest.raises(DomainError):
        ground_outcomes(d, micro_state(d), GroundAction("fly", ()))
    with pytest.raises(DomainError):
        ground_outcomes(d, micro_state(d), GroundAction("slow", ("extra",)))


def test_environment_respects_durations_and_logs_mutations(domains):
    d = domains("courier")
    s = d.space.state({("at", ("p1",)): "depot", ("at", ("p2",)): "depot", ("bridgeOpen", ()): True,
                       ("stocked", ("shop",)): False})
    env = Environment(d, s, Rng(0))
    h = env.start(GroundAction("walk", ("p1", "mid")))
    assert env.execute(h).status is Status.RUNNING
    env.clock.advance()
    assert env.execute(h).status is Status.RUNNING
    env.clock.advance()
    res = env.execute(h)
    assert res.status is Status.DONE and res.cost == 1.0 and env.state.get("at", "p1") == "mid"
    assert env.mutations == [(2, "action walk(p1, mid)", [(("at", ("p1",)), "depot", "mid")])]


def test_events_are_released_in_tick_order(domains):
    d = domains("courier")
    ev = [ExoEvent(3, changes=((("bridgeOpen", ()), False),)), ExoEvent(1, Task("stock", ("shop",)))]
    s = d.space.state({("at", ("p1",)): "depot", ("at", ("p2",)): "depot", ("bridgeOpen", ()): True,
                       ("stocked", ("shop",)): False})
    env = Environment(d, s, Rng(0), ev)
    assert env.due_events() == []
    env.clock.tick = 5
    due = env.due_events()
    assert [e.tick for e in due] == [1, 3] and env.schedule == []
    env.apply_event(due[1])
    assert env.state.get("bridgeOpen") is False
    with pytest.raises(ValueError):
        ExoEvent(-1, Task("t"))
    with pytest.raises(ValueError):
        ExoEvent(0)


def test_pending_events_leaves_future_ones():
    from refinement_acting.sim import EnvClock

    sched = [ExoEvent(0, Task("a")), ExoEvent(2, Task("b"))]
    assert len(pending_events(EnvClock(1), sched)) == 1 and len(sched) == 1


@pytest.mark.parametrize("name", ["fetch", "nav", "sr", "explore"])
def test_problem_roundtrip(domains, name):
    d = domains(name)
    p = d.generator(Rng(5, "gen/0"), 0)
    q = Problem.loads(p.dumps(), d)
    assert q.dumps() == p.dumps()
    assert q.state == p.state and q.tasks == p.tasks and q.events == p.events


def test_problem_load_errors(domains):
    d = domains("fetch")
    p = d.generator(Rng(5, "gen/0"), 0).to_dict()
    with pytest.raises(DomainError):
        Problem.from_dict({**p, "version": 99}, d)
    with pytest.raises(DomainError):
        Problem.from_dict({**p, "domain": "nav"}, d)
    with pytest.raises(DomainError):
        Problem.from_dict({**p, "tasks": [{"name": "fetch", "args": ["o9"], "arrival": 0}]}, d)
