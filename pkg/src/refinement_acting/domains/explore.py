"""Explore: chargeable UGVs and UAVs survey, screen and monitor a terrain.

Data storage is small, so robots return to base or relay data to a partner.
Screening needs a probe kept at base or carried by some robot. A robot that
runs dry away from base is stuck. Animals show up as exogenous events.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..core import Task
from ..interp import (
    Action,
    Fail,
    ForIn,
    If,
    Subtask,
    add,
    and_,
    eq,
    ge,
    ite,
    lt,
    maximum,
    member,
    mul,
    ne,
    not_,
    rigid,
    sub,
    sv,
    v,
)
from ..sim import ExoEvent, Problem
from .builder import DomainBuilder, failure, outcome, set_
from .common import grid_distances, pick_arrivals


@dataclass(frozen=True)
class ExploreConstants:
    coords: dict = field(default_factory=lambda: {
        "base": (0, 0), "z1": (2, 0), "z2": (0, 2), "z3": (2, 2), "z4": (3, 1)})
    ugvs: tuple = ("g1", "g2")
    uavs: tuple = ("u1",)
    equipment: tuple = ("probe",)
    capacity: int = 6
    storage: int = 2
    dock_drain: int = 2
    p_move_ok: float = 0.9
    p_fly_ok: float = 0.95
    p_survey: float = 0.8
    p_screen: float = 0.7
    p_quick_screen: float = 0.4
    p_monitor: float = 0.8
    p_scare: float = 0.6
    scare_attempts: int = 3
    p_animal: float = 0.6
    animal_window: tuple = (2, 12)
    arrival_window: tuple = (0, 6)

    @property
    def locations(self) -> tuple:
        return tuple(self.coords)

    @property
    def robots(self) -> tuple:
        return self.ugvs + self.uavs


def build(constants: ExploreConstants | None = None):
    k = constants or ExploreConstants()
    L, R, G, U, E = k.locations, k.robots, k.ugvs, k.uavs, k.equipment
    b = DomainBuilder("explore")
    b.var("loc", L, over=R)
    b.var("charge", range(k.capacity + 1), over=R)
    b.var("data", range(k.storage + 1), over=R)
    b.var("equipAt", L + R, over=E)
    b.var("animal", (False, True), over=L)
    for flag in ("surveyed", "screened", "monitored"):
        b.var(flag, (False, True), over=L)
    b.rigid("dist", grid_distances(k.coords))
    b.rigid("robotType", {**{g: "UGV" for g in G}, **{u: "UAV" for u in U}})

    here = sv("loc", v("r"))
    d_to = rigid("dist", here, v("l"))
    chg = sv("charge", v("r"))
    data = sv("data", v("r"))
    is_uav = eq(rigid("robotType", v("r")), "UAV")
    has_room = lt(data, k.storage)
    record = set_(data, add(data, 1))

    def travel(p_ok, cost, kind):
        return [outcome(p_ok, set_(here, v("l")), set_(chg, sub(chg, d_to)), cost=cost), failure(1 - p_ok)], \
            and_(member(v("l"), L), ne(here, v("l")), eq(rigid("robotType", v("r")), kind), ge(chg, d_to))

    outs, pre = travel(k.p_move_ok, d_to, "UGV")
    b.action("move", ("r", "l"), outs, pre=pre)
    outs, pre = travel(k.p_fly_ok, maximum(0.5, mul(0.5, d_to)), "UAV")
    b.action("fly", ("r", "l"), outs, pre=pre)
    b.action("charge", ("r",), effects=[set_(chg, k.capacity)], cost=2.0, pre=eq(here, "base"), duration=2)
    # a UAV tops up from a UGV's battery
    b.action("dock", ("r", "g"), effects=[set_(chg, k.capacity),
                                          set_(sv("charge", v("g")), maximum(0, sub(sv("charge", v("g")), k.dock_drain)))],
             cost=1.0, pre=and_(eq(here, sv("loc", v("g"))), ne(v("r"), v("g"))))
    b.action("deposit", ("r",), effects=[set_(data, 0)], cost=1.0, pre=eq(here, "base"))
    b.action("relay", ("r", "g"), effects=[set_(data, 0), set_(sv("data", v("g")), add(sv("data", v("g")), data))],
             cost=1.0, pre=and_(ne(v("r"), v("g")), eq(here, sv("loc", v("g"))),
                                ge(k.storage, add(sv("data", v("g")), data))))
    b.action("pickEquip", ("r", "e"), effects=[set_(sv("equipAt", v("e")), v("r"))], cost=1.0,
             pre=eq(sv("equipAt", v("e")), here))
    b.action("handover", ("r2", "r", "e"), effects=[set_(sv("equipAt", v("e")), v("r"))], cost=1.0,
             pre=and_(eq(sv("equipAt", v("e")), v("r2")), eq(sv("loc", v("r2")), here)))
    at_l = and_(eq(here, v("l")), has_room)
    b.action("surveyArea", ("r", "l"), [
        outcome(k.p_survey, set_(sv("surveyed", v("l")), True), record, cost=ite(is_uav, 1.0, 3.0)),
        failure(1 - k.p_survey)], pre=at_l)
    b.action("screenArea", ("r", "l"), [
        outcome(k.p_screen, set_(sv("screened", v("l")), True), record, cost=2.0),
        failure(1 - k.p_screen)], pre=and_(at_l, eq(sv("equipAt", "probe"), v("r")), not_(sv("animal", v("l")))))
    b.action("quickScreen", ("r", "l"), [
        outcome(k.p_quick_screen, set_(sv("screened", v("l")), True), record, cost=1.0),
        failure(1 - k.p_quick_screen)], pre=and_(at_l, is_uav))
    b.action("monitorArea", ("r", "l"), [
        outcome(k.p_monitor, set_(sv("monitored", v("l")), True), record, cost=2.0),
        failure(1 - k.p_monitor)], pre=at_l, duration=2)
    b.action("jointMonitor", ("r", "g", "l"), effects=[set_(sv("monitored", v("l")), True),
                                                       set_(sv("data", v("g")), add(sv("data", v("g")), 1))],
             cost=3.0, pre=and_(eq(here, v("l")), eq(sv("loc", v("g")), v("l")), lt(sv("data", v("g")), k.storage)))
    b.action("scare", ("r", "l"), [
        outcome(k.p_scare, set_(sv("animal", v("l")), False), cost=1.0),
        outcome(1 - k.p_scare, cost=1.0)], pre=eq(here, v("l")))

    b.task("explore", ("l",), ranges=(L,))
    b.task("survey", ("l",), ranges=(L,))
    b.task("screen", ("l",), ranges=(L,))
    b.task("monitor", ("l",), ranges=(L,))
    b.task("goto", ("r", "l"), ranges=(R, L))
    b.task("recharge", ("r",), ranges=(R,))
    b.task("depositData", ("r",), ranges=(R,))
    b.task("getEquipment", ("r", "e"), ranges=(R, E))
    b.task("handleAnimal", ("l",), ranges=(L,), event=True)

    def room(r="r"):
        return If(ge(sv("data", v(r)), k.storage), [Subtask("depositData", v(r))])

    b.method("m-explore", "explore", ("l",), [
        Subtask("survey", v("l")),
        Subtask("screen", v("l")),
        Subtask("monitor", v("l")),
    ])
    b.method("m1-survey", "survey", ("l",), [
        room(), Subtask("goto", v("r"), v("l")), Action("surveyArea", v("r"), v("l")),
    ], free={"r": U})
    b.method("m2-survey", "survey", ("l",), [
        room(), Subtask("goto", v("r"), v("l")), Action("surveyArea", v("r"), v("l")),
    ], free={"r": G})
    b.method("m1-screen", "screen", ("l",), [
        If(ne(sv("equipAt", "probe"), v("r")), [Subtask("getEquipment", v("r"), "probe")]),
        room(), Subtask("goto", v("r"), v("l")), Action("screenArea", v("r"), v("l")),
    ], free={"r": G})
    b.method("m2-screen", "screen", ("l",), [
        room(), Subtask("goto", v("r"), v("l")), Action("quickScreen", v("r"), v("l")),
    ], free={"r": U})
    b.method("m1-monitor", "monitor", ("l",), [
        room(), Subtask("goto", v("r"), v("l")), Action("monitorArea", v("r"), v("l")),
    ], free={"r": R})
    # a UAV and a UGV watch together; the UGV stores the data
    b.method("m2-monitor", "monitor", ("l",), [
        room("g"),
        Subtask("goto", v("r"), v("l")),
        Subtask("goto", v("g"), v("l")),
        Action("jointMonitor", v("r"), v("g"), v("l")),
    ], free={"r": U, "g": G})

    b.method("m1-goto", "goto", ("r", "l"), [If(ne(here, v("l")), [Action("move", v("r"), v("l"))])],
             pre=eq(rigid("robotType", v("r")), "UGV"))
    b.method("m2-goto", "goto", ("r", "l"), [
        Subtask("recharge", v("r")),
        If(is_uav, [Action("fly", v("r"), v("l"))], [Action("move", v("r"), v("l"))]),
    ], pre=ne(here, v("l")))
    b.method("m3-goto", "goto", ("r", "l"), [If(ne(here, v("l")), [Action("fly", v("r"), v("l"))])],
             pre=is_uav)

    b.method("m1-recharge", "recharge", ("r",), [
        If(ne(here, "base"), [If(is_uav, [Action("fly", v("r"), "base")], [Action("move", v("r"), "base")])]),
        Action("charge", v("r")),
    ])
    b.method("m2-recharge", "recharge", ("r",), [
        If(ne(here, sv("loc", v("g"))), [Action("fly", v("r"), sv("loc", v("g")))]),
        Action("dock", v("r"), v("g")),
    ], free={"g": G}, pre=is_uav)

    b.method("m1-depositData", "depositData", ("r",), [
        Subtask("goto", v("r"), "base"), Action("deposit", v("r")),
    ])
    b.method("m2-depositData", "depositData", ("r",), [Action("relay", v("r"), v("g"))],
             free={"g": R}, pre=and_(ne(v("g"), v("r")), eq(here, sv("loc", v("g")))))

    b.method("m1-getEquipment", "getEquipment", ("r", "e"), [
        If(not_(member(sv("equipAt", v("e")), L)), [Fail()]),
        Subtask("goto", v("r"), sv("equipAt", v("e"))),
        Action("pickEquip", v("r"), v("e")),
    ], pre=member(sv("equipAt", v("e")), L))
    b.method("m2-getEquipment", "getEquipment", ("r", "e"), [
        Subtask("goto", v("r"), sv("loc", v("r2"))),
        Action("handover", v("r2"), v("r"), v("e")),
    ], free={"r2": R}, pre=and_(ne(v("r2"), v("r")), eq(sv("equipAt", v("e")), v("r2"))))

    b.method("m-handleAnimal", "handleAnimal", ("l",), [
        Subtask("goto", v("r"), v("l")),
        ForIn("attempt", tuple(range(k.scare_attempts)), [
            If(sv("animal", v("l")), [Action("scare", v("r"), v("l"))]),
        ]),
        If(sv("animal", v("l")), [Fail()]),
    ], free={"r": R})

    holder = {}
    dom = b.build(generator=lambda rng, index=0: holder["gen"](rng, index),
                  features={"exogenous_events": True, "dead_ends": True, "sensing": False,
                            "collaboration": True, "parallel_tasks": True},
                  constants=k)
    holder["gen"] = lambda rng, index=0: generate(dom, k, rng, index)
    return dom


def generate(domain, k: ExploreConstants, rng, index: int = 0) -> Problem:
    L = k.locations
    values = {}
    for r in k.robots:
        values[("loc", (r,))] = rng.choice(L)
        values[("charge", (r,))] = rng.randint(2, k.capacity)
        values[("data", (r,))] = rng.randint(0, 1)
    for e in k.equipment:
        values[("equipAt", (e,))] = "base"
    for l in L:
        for flag in ("animal", "surveyed", "screened", "monitored"):
            values[(flag, (l,))] = False
    state = domain.space.state(values)
    n = rng.randint(1, 3)
    zones = rng.sample(L[1:], n)
    tasks = [(Task("explore", (z,)), at) for z, at in zip(zones, pick_arrivals(rng, n, k.arrival_window))]
    events = []
    if rng.random() < k.p_animal:
        t, spot = rng.randint(*k.animal_window), rng.choice(L[1:])
        events.append(ExoEvent(t, changes=((("animal", (spot,)), True),)))
        events.append(ExoEvent(t, Task("handleAnimal", (spot,))))
    return Problem(f"explore-{index:03d}", domain.name, state, tasks, events, rng.seed)
