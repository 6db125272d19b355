"""S&R: UAVs survey a partially mapped area, UGVs bring supplies to injured people.

Includes the survey and supply methods ``m1-survey``, ``m1-GetSupplies`` and
``m2-GetSupplies``. Storms ground the UAVs and debris blocks UGVs; both arrive
as exogenous state changes. A triggered alarm becomes an event task.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..core import Task
from ..interp import (
    Action,
    Assign,
    Fail,
    ForIn,
    If,
    Subtask,
    While,
    and_,
    argmin,
    eq,
    ite,
    member,
    mul,
    ne,
    not_,
    rigid,
    sv,
    v,
)
from ..sim import ExoEvent, Problem
from .builder import DomainBuilder, failure, outcome, set_
from .common import grid_distances, pick_arrivals


@dataclass(frozen=True)
class SRConstants:
    coords: dict = field(default_factory=lambda: {
        "base": (0, 0), "a": (1, 0), "b": (2, 0), "c": (0, 1), "d": (1, 1), "e": (2, 1)})
    uavs: tuple = ("u1",)
    ugvs: tuple = ("g1", "g2", "g3")
    cameras: dict = field(default_factory=lambda: {"u1": ("cam1", "cam2"), "g1": ("front",),
                                                   "g2": ("front",), "g3": ("front",)})
    p_person: float = 0.3
    p_move_ok: float = 0.95
    p_clear: float = 0.6
    p_aid: float = 0.9
    p_drop: float = 0.8
    p_calm: float = 0.5
    p_storm: float = 0.5
    p_debris: float = 0.6
    event_window: tuple = (1, 10)
    storm_length: tuple = (3, 8)
    arrival_window: tuple = (0, 4)

    @property
    def locations(self) -> tuple:
        return tuple(self.coords)

    @property
    def robots(self) -> tuple:
        return self.uavs + self.ugvs


NEIGHBOUR_RADIUS = 2
STATUS = ("unknown", "clear", "injured", "alarmed", "rescued")


def build(constants: SRConstants | None = None):
    k = constants or SRConstants()
    L, R, U, G = k.locations, k.robots, k.uavs, k.ugvs
    dist = grid_distances(k.coords)
    b = DomainBuilder("sr")
    b.var("loc", L, over=R)
    b.var("hasSupply", (False, True), over=R)
    b.var("hasMedicine", (False, True), over=R)
    b.var("busy", (False, True), over=G)
    b.var("flying", (False, True), over=U)
    b.var("status", STATUS, over=L)
    b.var("debris", (False, True), over=L)
    b.var("weather", ("calm", "storm"))
    b.rigid("dist", dist)
    b.rigid("robotType", {**{u: "UAV" for u in U}, **{g: "UGV" for g in G}})
    b.rigid("cameras", dict(k.cameras))
    b.rigid("neighbours", {l: tuple(m for m in L if 0 < dist[(l, m)] <= NEIGHBOUR_RADIUS) for l in L})
    b.rigid("BASE", "base")
    b.rigid("robots", R)

    here = sv("loc", v("r"))
    is_uav = eq(rigid("robotType", v("r")), "UAV")
    d_to = rigid("dist", here, v("l"))
    st = sv("status", here)
    needs_help = member(sv("status", v("l")), ("injured", "alarmed"))

    # UAVs fly (cheaper, calm weather only); UGVs drive and are stopped by debris
    b.action("moveTo", ("r", "l"), [
        outcome(k.p_move_ok, set_(here, v("l")), cost=ite(is_uav, mul(0.5, d_to), d_to)),
        failure(1 - k.p_move_ok),
    ], pre=and_(ne(here, v("l")),
                ite(is_uav, and_(sv("flying", v("r")), eq(sv("weather"), "calm")), not_(sv("debris", v("l"))))))
    # sensing: a person is spotted at the robot's location or the place is found clear
    b.action("detectPerson", ("r", "cam"), [
        outcome(k.p_person, set_(st, ite(eq(st, "unknown"), "injured", st)), cost=1.0),
        outcome(1 - k.p_person, set_(st, ite(eq(st, "unknown"), "clear", st)), cost=1.0),
    ])
    b.action("triggerAlarm", ("r", "l"), effects=[set_(sv("status", v("l")), "alarmed")], cost=0.5,
             pre=eq(sv("status", v("l")), "injured"), raises=Subtask("handleAlarm", v("l")))
    b.action("dropSupply", ("r", "l"), [
        outcome(k.p_drop, set_(sv("status", v("l")), "rescued"), set_(sv("hasSupply", v("r")), False), cost=1.0),
        failure(1 - k.p_drop),
    ], pre=and_(eq(here, v("l")), sv("hasSupply", v("r")), needs_help))
    b.action("loadSupply", ("r",), effects=[set_(sv("hasSupply", v("r")), True)], cost=1.0,
             pre=and_(eq(here, "base"), not_(sv("flying", v("r")))))
    b.action("takeoff", ("r",), effects=[set_(sv("flying", v("r")), True)], cost=1.0,
             pre=and_(not_(sv("flying", v("r"))), eq(sv("weather"), "calm")))
    b.action("land", ("r",), effects=[set_(sv("flying", v("r")), False)], cost=1.0, pre=sv("flying", v("r")))
    b.action("ReplenishSupplies", ("r",), effects=[set_(sv("hasSupply", v("r")), True)], cost=2.0,
             pre=eq(here, "base"))
    b.action("Transfer", ("r2", "r"), effects=[set_(sv("hasMedicine", v("r2")), False),
                                               set_(sv("hasSupply", v("r")), True)],
             cost=1.0, pre=and_(eq(sv("loc", v("r2")), sv("loc", v("r"))), sv("hasMedicine", v("r2"))))
    b.action("clearDebris", ("r", "l"), [
        outcome(k.p_clear, set_(sv("debris", v("l")), False), cost=3.0),
        failure(1 - k.p_clear, cost=3.0),
    ], pre=sv("debris", v("l")))
    b.action("giveFirstAid", ("r", "l"), [
        outcome(k.p_aid, set_(sv("status", v("l")), "rescued"), set_(sv("hasSupply", v("r")), False), cost=2.0),
        failure(1 - k.p_aid, cost=2.0),
    ], pre=and_(eq(here, v("l")), sv("hasSupply", v("r")), needs_help))
    b.action("waitOut", ("r",), [
        outcome(k.p_calm, set_(sv("weather"), "calm"), cost=1.0),
        outcome(1 - k.p_calm, cost=1.0),
    ])
    b.action("dispatch", ("g", "l"), effects=[set_(sv("busy", v("g")), True)], cost=0.5,
             pre=not_(sv("busy", v("g"))))
    b.action("standDown", ("g",), effects=[set_(sv("busy", v("g")), False)], cost=0.5)

    b.task("survey", ("r", "l"), ranges=(R, L))
    b.task("navigate", ("r", "l"), ranges=(R, L))
    b.task("rescue", ("r", "l"), ranges=(R, L))
    b.task("GetSupplies", ("r",), ranges=(R,))
    b.task("clearPath", ("r", "l"), ranges=(R, L))
    b.task("prepareFlight", ("r",), ranges=(U,))
    b.task("handleAlarm", ("l",), ranges=(L,), event=True)

    b.method("m1-survey", "survey", ("r", "l"), [
        ForIn("l2", rigid("neighbours", v("l")), [
            Action("moveTo", v("r"), v("l2")),
            ForIn("cam", rigid("cameras", v("r")), [
                Action("detectPerson", v("r"), v("cam")),
                If(eq(sv("status", v("l2")), "injured"), [
                    If(sv("hasSupply", v("r")),
                       [Subtask("rescue", v("r"), v("l2"))],
                       [Action("triggerAlarm", v("r"), v("l2"))]),
                ]),
            ]),
        ]),
    ], pre=and_(eq(rigid("robotType", v("r")), "UAV"), eq(here, v("l"))))
    # ground survey: drive to each neighbour, clearing debris on the way
    b.method("m2-survey", "survey", ("r", "l"), [
        ForIn("l2", rigid("neighbours", v("l")), [
            Subtask("navigate", v("r"), v("l2")),
            Action("detectPerson", v("r"), "front"),
            If(eq(sv("status", v("l2")), "injured"), [
                If(sv("hasSupply", v("r")),
                   [Subtask("rescue", v("r"), v("l2"))],
                   [Action("triggerAlarm", v("r"), v("l2"))]),
            ]),
        ]),
    ], pre=and_(eq(rigid("robotType", v("r")), "UGV"), eq(here, v("l"))))
    # a grounded UAV first gets airborne
    b.method("m3-survey", "survey", ("r", "l"), [
        Subtask("prepareFlight", v("r")),
        Subtask("survey", v("r"), v("l")),
    ], pre=and_(eq(rigid("robotType", v("r")), "UAV"), eq(here, v("l")), not_(sv("flying", v("r")))))

    b.method("m1-navigate", "navigate", ("r", "l"), [
        If(ne(here, v("l")), [
            If(sv("debris", v("l")), [Subtask("clearPath", v("r"), v("l"))]),
            Action("moveTo", v("r"), v("l")),
        ]),
    ], pre=eq(rigid("robotType", v("r")), "UGV"))
    b.method("m2-navigate", "navigate", ("r", "l"), [
        If(ne(here, v("l")), [
            If(not_(sv("flying", v("r"))), [Subtask("prepareFlight", v("r"))]),
            Action("moveTo", v("r"), v("l")),
        ]),
    ], pre=eq(rigid("robotType", v("r")), "UAV"))

    b.method("m1-rescue", "rescue", ("r", "l"), [
        If(not_(sv("hasSupply", v("r"))), [Subtask("GetSupplies", v("r"))]),
        Subtask("navigate", v("r"), v("l")),
        Action("giveFirstAid", v("r"), v("l")),
    ], pre=eq(rigid("robotType", v("r")), "UGV"))
    b.method("m2-rescue", "rescue", ("r", "l"), [
        Subtask("navigate", v("r"), v("l")),
        Action("dropSupply", v("r"), v("l")),
    ], pre=and_(eq(rigid("robotType", v("r")), "UAV"), sv("hasSupply", v("r"))))

    b.method("m1-GetSupplies", "GetSupplies", ("r",), [
        Action("moveTo", v("r"), rigid("BASE")),
        Action("ReplenishSupplies", v("r")),
    ], pre=eq(rigid("robotType", v("r")), "UGV"))
    b.method("m2-GetSupplies", "GetSupplies", ("r",), [
        Assign("r2", argmin("x", rigid("robots"), rigid("dist", here, sv("loc", v("x"))),
                            where=and_(eq(sv("hasMedicine", v("x")), True), ne(v("x"), v("r"))))),
        If(eq(v("r2"), None), [Fail()], [
            If(ne(here, sv("loc", v("r2"))), [Action("moveTo", v("r"), sv("loc", v("r2")))]),
            Action("Transfer", v("r2"), v("r")),
        ]),
    ], pre=eq(rigid("robotType", v("r")), "UGV"))
    b.method("m3-GetSupplies", "GetSupplies", ("r",), [
        Subtask("navigate", v("r"), "base"),
        Action("land", v("r")),
        Action("loadSupply", v("r")),
    ], pre=and_(eq(rigid("robotType", v("r")), "UAV"), sv("flying", v("r"))))

    b.method("m1-clearPath", "clearPath", ("r", "l"), [Action("clearDebris", v("r"), v("l"))])
    # another UGV lends a hand
    b.method("m2-clearPath", "clearPath", ("r", "l"), [Action("clearDebris", v("h"), v("l"))],
             free={"h": G}, pre=and_(ne(v("h"), v("r")), not_(sv("busy", v("h")))))

    b.method("m1-prepareFlight", "prepareFlight", ("r",), [Action("takeoff", v("r"))])
    b.method("m2-prepareFlight", "prepareFlight", ("r",), [
        While(eq(sv("weather"), "storm"), [Action("waitOut", v("r"))]),
        Action("takeoff", v("r")),
    ])

    # the closest free UGV is the sensible pick; the planner has to find it
    b.method("m1-handleAlarm", "handleAlarm", ("l",), [
        Action("dispatch", v("g"), v("l")),
        Subtask("rescue", v("g"), v("l")),
        Action("standDown", v("g")),
    ], free={"g": G}, pre=and_(not_(sv("busy", v("g"))), needs_help))
    b.method("m2-handleAlarm", "handleAlarm", ("l",), [Subtask("rescue", v("u"), v("l"))],
             free={"u": U}, pre=and_(sv("hasSupply", v("u")), needs_help))

    holder = {}
    dom = b.build(generator=lambda rng, index=0: holder["gen"](rng, index),
                  features={"exogenous_events": True, "dead_ends": True, "sensing": True,
                            "collaboration": True, "parallel_tasks": True},
                  constants=k)
    holder["gen"] = lambda rng, index=0: generate(dom, k, rng, index)
    return dom


def generate(domain, k: SRConstants, rng, index: int = 0) -> Problem:
    L = k.locations
    values = {}
    for r in k.robots:
        values[("loc", (r,))] = rng.choice(L)
        values[("hasSupply", (r,))] = rng.random() < 0.3
        values[("hasMedicine", (r,))] = r in k.ugvs and rng.random() < 0.5
    for g in k.ugvs:
        values[("busy", (g,))] = False
    for u in k.uavs:
        values[("flying", (u,))] = rng.random() < 0.5
    for l in L:
        values[("status", (l,))] = "unknown"
        values[("debris", (l,))] = False
    values[("weather", ())] = "calm"
    state = domain.space.state(values)
    n = rng.randint(1, 3)
    surveyors = rng.sample(k.robots, n)
    tasks = [(Task("survey", (r, values[("loc", (r,))])), at)
             for r, at in zip(surveyors, pick_arrivals(rng, n, k.arrival_window))]
    events = []
    if rng.random() < k.p_storm:
        t0 = rng.randint(*k.event_window)
        events.append(ExoEvent(t0, changes=((("weather", ()), "storm"),)))
        events.append(ExoEvent(t0 + rng.randint(*k.storm_length), changes=((("weather", ()), "calm"),)))
    if rng.random() < k.p_debris:
        spot = rng.choice(L[1:])
        events.append(ExoEvent(rng.randint(*k.event_window), changes=((("debris", (spot,)), True),)))
    return Problem(f"sr-{index:03d}", domain.name, state, tasks, events, rng.seed)
