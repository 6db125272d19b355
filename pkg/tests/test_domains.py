import pytest

from refinement_acting.core import Task, applicable
from refinement_acting.domains import BENCHMARKS, build, names
from refinement_acting.engine import PlannerSelector, PolicySelector, ReactiveSelector, rae_run
from refinement_acting.learn import Hyper, LearnedHeuristic, MethodPolicy, generate_data
from refinement_acting.planner import PlannerConfig
from refinement_acting.sim import Problem, Rng

COUNTS = {
    "fetch": (7, 10, 9),
    "nav": (6, 10, 10),
    "sr": (7, 16, 14),
    "explore": (9, 17, 14),
}
FEATURES = ("exogenous_events", "dead_ends", "sensing", "collaboration", "parallel_tasks")


def test_registry():
    assert set(BENCHMARKS) <= set(names())
    with pytest.raises(KeyError):
        build("chess")


@pytest.mark.parametrize("name", BENCHMARKS)
def test_declaration_counts_and_features(domains, name):
    d = domains(name)
    c = d.counts()
    assert (c["tasks"], c["methods"], c["actions"]) == COUNTS[name]
    assert set(d.features) == set(FEATURES)
    assert any(t.event for t in d.tasks.values()) == (name != "nav")


@pytest.mark.parametrize("name", BENCHMARKS)
def test_generator_is_seeded(domains, name):
    d = domains(name)
    a = d.generator(Rng(9, "gen/2"), 2)
    b = d.generator(Rng(9, "gen/2"), 2)
    assert a.dumps() == b.dumps()
    for t, _ in a.tasks:
        d.check_task(t)


@pytest.fixture(scope="module")
def learned(domains):
    out = {}
    for name in BENCHMARKS:
        d = domains(name)
        cfg = PlannerConfig(n_ro=10)
        hyper = Hyper(epochs=3, hidden=8)
        lm = generate_data(d, 4, "lm2", cfg, Rng(0, "smoke"))
        lh = generate_data(d, 4, "lh", cfg, Rng(0, "smoke"))
        out[name] = (MethodPolicy.fit(d, lm, hyper), LearnedHeuristic.fit(d, lh, hyper))
    return out


@pytest.mark.parametrize("name", BENCHMARKS)
@pytest.mark.parametrize("mode", ["reactive", "upom", "lm", "upom+nnH"])
def test_smoke_every_mode(domains, learned, name, mode):
    d = domains(name)
    policy, heuristic = learned[name]
    for i in range(3):
        sel = {"reactive": lambda: ReactiveSelector(),
               "upom": lambda: PlannerSelector(PlannerConfig(n_ro=20)),
               "lm": lambda: PolicySelector(policy),
               "upom+nnH": lambda: PlannerSelector(PlannerConfig(n_ro=20, d_max=5, heuristic=heuristic))}[mode]()
        r = rae_run(d, d.generator(Rng(2, f"gen/{i}"), i), sel, seed=2)
        assert r.tasks and all(t.finished is not None for t in r.tasks)
        assert all(t.cost >= 0 for t in r.tasks)


def _sr_state(d, overrides=()):
    vals = {decl.key: decl.range[0] for decl in d.space.decls}
    vals.update({("loc", ("u1",)): "base", ("flying", ("u1",)): True})
    for g in ("g1", "g2", "g3"):
        vals[("busy", (g,))] = True
    vals.update(dict(overrides))
    return d.space.state(vals)


def test_sr_survey_with_forced_outcomes():
    from refinement_acting.domains.sr import SRConstants
    from refinement_acting.domains.sr import build as build_sr

    d = build_sr(SRConstants(p_person=1.0, p_move_ok=1.0, p_drop=1.0))
    state = _sr_state(d, {("hasSupply", ("u1",)): True})
    p = Problem("forced", "sr", state, [(Task("survey", ("u1", "base")), 0)])
    r = rae_run(d, p, ReactiveSelector())
    done = [line.split(" ", 3)[3].rsplit(" cost=", 1)[0] for line in r.trace if " #0 done " in line]
    assert done == [
        # first neighbour: a person is found and the supply is dropped
        "moveTo(u1, a)", "detectPerson(u1, cam1)", "dropSupply(u1, a)", "detectPerson(u1, cam2)",
        # no supply left, so later finds raise the alarm
        "moveTo(u1, b)", "detectPerson(u1, cam1)", "triggerAlarm(u1, b)", "detectPerson(u1, cam2)",
        "moveTo(u1, c)", "detectPerson(u1, cam1)", "triggerAlarm(u1, c)", "detectPerson(u1, cam2)",
        "moveTo(u1, d)", "detectPerson(u1, cam1)", "triggerAlarm(u1, d)", "detectPerson(u1, cam2)",
    ]
    assert r.tasks[0].success
    # flying costs half the grid distance: 0.5 + 0.5 + 1.5 + 0.5, plus 8 detections, 1 drop, 3 alarms
    assert r.tasks[0].cost == pytest.approx(3.0 + 8 + 1 + 1.5)
    assert [t.task.args[0] for t in r.tasks if t.event] == ["b", "c", "d"]


def test_sr_get_supplies_from_nearest_other_robot():
    from refinement_acting.domains.sr import build as build_sr

    d = build_sr()
    s = _sr_state(d, {("loc", ("g1",)): "a", ("loc", ("g2",)): "b", ("loc", ("g3",)): "e",
                        ("hasMedicine", ("g2",)): True, ("hasMedicine", ("g3",)): True,
                        ("hasMedicine", ("g1",)): True})
    ms = [m.name for m in applicable(s, Task("GetSupplies", ("g1",)), d)]
    assert ms == ["m1-GetSupplies", "m2-GetSupplies"]
    from refinement_acting.core import MethodInstance, RefinementStack
    from refinement_acting.interp import assign_step, current_op, ground_op, start_frame

    st = start_frame(d, RefinementStack(), Task("GetSupplies", ("g1",)), MethodInstance("m2-GetSupplies", ("g1",)), s)
    st = assign_step(d, st, s)
    act = ground_op(d, st, s, current_op(d, st, s))
    assert str(act) == "moveTo(g1, b)"  # g2 is closest, g1 itself is excluded


def test_fetch_dead_end_without_charge(domains):
    d = domains("fetch")
    vals = {decl.key: decl.range[0] for decl in d.space.decls}
    vals.update({("loc", ("r1",)): "l4", ("charge", ("r1",)): 0, ("loc", ("r2",)): "l4", ("charge", ("r2",)): 0,
                 ("chargerAt", ()): "base"})
    for o in ("o1", "o2", "o3"):
        vals[("pos", (o,))] = "unknown"
    p = Problem("stuck", "fetch", d.space.state(vals), [(Task("fetch", ("o1",)), 0)])
    r = rae_run(d, p, ReactiveSelector())
    assert r.tasks[0].success is False


def test_nav_routes_follow_doors(domains):
    d = domains("nav")
    sp = d.space
    assert sp.rigid("nextRoom", ("hall", "office")) in ("lab", "store")
    assert sp.rigid("doorOf", ("hall", "lab")) == "d1"
    assert sp.rigid("doorOf", ("hall", "office")) is None
    assert sp.rigid("nextRoom", ("lab", "lab")) == "lab"
