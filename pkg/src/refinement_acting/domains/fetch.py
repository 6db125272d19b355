"""Fetch: rechargeable robots search for objects and bring them back to base.

Object positions are unknown until a robot perceives at the right place.
A robot far from the charger with too little charge is stuck (dead end).
Emergencies arrive as event tasks.
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
    add,
    and_,
    argmin,
    count,
    eq,
    ge,
    gt,
    maximum,
    member,
    mul,
    ne,
    not_,
    or_,
    rigid,
    sub,
    sv,
    v,
    where,
)
from ..sim import ExoEvent, Problem
from .builder import DomainBuilder, failure, outcome, set_
from .common import grid_distances, pick_arrivals


@dataclass(frozen=True)
class FetchConstants:
    coords: dict = field(default_factory=lambda: {
        "base": (0, 0), "l1": (1, 0), "l2": (2, 1), "l3": (0, 2), "l4": (3, 2)})
    robots: tuple = ("r1", "r2")
    objects: tuple = ("o1", "o2", "o3")
    capacity: int = 6
    p_move_ok: float = 0.95
    p_perceive: float = 0.45
    p_charge_ok: float = 0.9
    p_address_ok: float = 0.9
    charge_cost: float = 2.0
    address_cost: float = 2.0
    min_start_charge: int = 1
    p_emergency: float = 0.5
    emergency_window: tuple = (2, 14)
    arrival_window: tuple = (0, 6)

    @property
    def locations(self) -> tuple:
        return tuple(self.coords)


UNKNOWN = "unknown"
NIL = "nil"


def build(constants: FetchConstants | None = None):
    k = constants or FetchConstants()
    L, R, O = k.locations, k.robots, k.objects
    b = DomainBuilder("fetch")
    b.var("loc", L, over=R)
    b.var("charge", range(k.capacity + 1), over=R)
    b.var("load", (NIL,) + O, over=R)
    b.var("pos", L + (UNKNOWN,) + R, over=O)
    b.var("chargerAt", L + R)
    b.rigid("dist", grid_distances(k.coords))
    b.rigid("locations", L)

    here = sv("loc", v("r"))
    d_to = rigid("dist", here, v("l"))
    b.action("move", ("r", "l"), [
        outcome(k.p_move_ok, set_(sv("loc", v("r")), v("l")),
                set_(sv("charge", v("r")), sub(sv("charge", v("r")), d_to)), cost=d_to),
        failure(1 - k.p_move_ok),
    ], pre=and_(member(v("l"), L), ne(here, v("l")), ge(sv("charge", v("r")), d_to)))
    # faster, but drains one extra unit of charge
    b.action("rush", ("r", "l"), [
        outcome(1.0, set_(sv("loc", v("r")), v("l")),
                set_(sv("charge", v("r")), sub(sv("charge", v("r")), add(d_to, 1))),
                cost=maximum(0.5, mul(0.5, d_to))),
    ], pre=and_(ne(here, v("l")), ge(sv("charge", v("r")), add(d_to, 1))))
    # sensing: the object shows up here with a fixed probability
    b.action("perceive", ("r", "o"), [
        outcome(k.p_perceive, set_(sv("pos", v("o")), here), cost=1.0),
        outcome(1 - k.p_perceive, cost=1.0),
    ], pre=eq(sv("pos", v("o")), UNKNOWN))
    b.action("take", ("r", "o"), effects=[set_(sv("load", v("r")), v("o")), set_(sv("pos", v("o")), v("r"))],
             cost=1.0, pre=and_(eq(sv("pos", v("o")), here), eq(sv("load", v("r")), NIL)))
    b.action("put", ("r", "o"), effects=[set_(sv("load", v("r")), NIL), set_(sv("pos", v("o")), here)],
             cost=1.0, pre=eq(sv("load", v("r")), v("o")))
    can_charge = or_(eq(sv("chargerAt"), here), eq(sv("chargerAt"), v("r")))
    b.action("charge", ("r",), [
        outcome(k.p_charge_ok, set_(sv("charge", v("r")), k.capacity), cost=k.charge_cost),
        failure(1 - k.p_charge_ok),
    ], pre=can_charge, duration=2)
    b.action("takeCharger", ("r",), effects=[set_(sv("chargerAt"), v("r"))], cost=1.0,
             pre=eq(sv("chargerAt"), here))
    b.action("putCharger", ("r",), effects=[set_(sv("chargerAt"), here)], cost=1.0,
             pre=eq(sv("chargerAt"), v("r")))
    b.action("address", ("r", "l"), [outcome(k.p_address_ok, cost=k.address_cost), failure(1 - k.p_address_ok)],
             pre=eq(here, v("l")))

    b.task("fetch", ("o",), ranges=(O,))
    b.task("search", ("r", "o"), ranges=(R, O))
    b.task("goto", ("r", "l"), ranges=(R, L))
    b.task("recharge", ("r",), ranges=(R,))
    b.task("deliver", ("r", "o"), ranges=(R, O))
    b.task("bringCharger", ("r",), ranges=(R,))
    b.task("emergency", ("l",), ranges=(L,), event=True)

    b.method("m-fetch", "fetch", ("o",), [
        If(eq(sv("pos", v("o")), UNKNOWN), [Subtask("search", v("r"), v("o"))]),
        Subtask("deliver", v("r"), v("o")),
        If(eq(sv("chargerAt"), v("r")), [Action("putCharger", v("r"))]),
    ], free={"r": R}, pre=eq(sv("load", v("r")), NIL))

    # fixed sweep in map order
    b.method("m1-search", "search", ("r", "o"), [
        ForIn("l", L, [If(eq(sv("pos", v("o")), UNKNOWN), [
            Subtask("goto", v("r"), v("l")),
            Action("perceive", v("r"), v("o")),
        ])]),
        If(eq(sv("pos", v("o")), UNKNOWN), [Fail()]),
    ])
    # carry the charger, then visit the nearest unvisited place each time
    b.method("m2-search", "search", ("r", "o"), [
        If(ne(sv("chargerAt"), v("r")), [Subtask("bringCharger", v("r"))]),
        Assign("todo", L),
        While(and_(gt(count(v("todo")), 0), eq(sv("pos", v("o")), UNKNOWN)), [
            Assign("next", argmin("x", v("todo"), rigid("dist", here, v("x")))),
            Subtask("goto", v("r"), v("next")),
            Action("perceive", v("r"), v("o")),
            Assign("todo", where("x", v("todo"), ne(v("x"), v("next")))),
        ]),
        If(eq(sv("pos", v("o")), UNKNOWN), [Fail()]),
    ])

    b.method("m1-goto", "goto", ("r", "l"), [If(ne(here, v("l")), [Action("move", v("r"), v("l"))])])
    b.method("m2-goto", "goto", ("r", "l"), [
        Subtask("recharge", v("r")),
        Action("move", v("r"), v("l")),
    ], pre=ne(here, v("l")))

    # the charger may have been taken by another robot in the meantime
    b.method("m1-recharge", "recharge", ("r",), [
        If(not_(member(sv("chargerAt"), L)), [Fail()]),
        If(ne(here, sv("chargerAt")), [Action("move", v("r"), sv("chargerAt"))]),
        Action("charge", v("r")),
    ], pre=member(sv("chargerAt"), L))
    b.method("m2-recharge", "recharge", ("r",), [Action("charge", v("r"))], pre=eq(sv("chargerAt"), v("r")))

    b.method("m-deliver", "deliver", ("r", "o"), [
        If(ne(sv("load", v("r")), v("o")), [
            If(not_(member(sv("pos", v("o")), L)), [Fail()]),
            Subtask("goto", v("r"), sv("pos", v("o"))),
            Action("take", v("r"), v("o")),
        ]),
        Subtask("goto", v("r"), "base"),
        Action("put", v("r"), v("o")),
    ], pre=or_(member(sv("pos", v("o")), L), eq(sv("pos", v("o")), v("r"))))

    b.method("m-bring", "bringCharger", ("r",), [
        If(not_(member(sv("chargerAt"), L)), [Fail()]),
        Subtask("goto", v("r"), sv("chargerAt")),
        Action("takeCharger", v("r")),
    ], pre=member(sv("chargerAt"), L))

    b.method("m-emergency", "emergency", ("l",), [
        If(ne(here, v("l")), [Action("rush", v("r"), v("l"))]),
        Action("address", v("r"), v("l")),
    ], free={"r": R}, pre=or_(eq(here, v("l")), ge(sv("charge", v("r")), add(d_to, 1))))

    holder = {}
    dom = b.build(generator=lambda rng, index=0: holder["gen"](rng, index),
                  features={"exogenous_events": True, "dead_ends": True, "sensing": True,
                            "collaboration": False, "parallel_tasks": True},
                  constants=k)
    holder["gen"] = lambda rng, index=0: generate(dom, k, rng, index)
    return dom


def generate(domain, k: FetchConstants, rng, index: int = 0) -> Problem:
    L, R, O = k.locations, k.robots, k.objects
    values = {}
    for r in R:
        values[("loc", (r,))] = rng.choice(L)
        values[("charge", (r,))] = rng.randint(k.min_start_charge, k.capacity)
        values[("load", (r,))] = NIL
    for o in O:
        values[("pos", (o,))] = UNKNOWN
    values[("chargerAt", ())] = rng.choice(L)
    state = domain.space.state(values)
    n = rng.randint(1, 3)
    objs = rng.sample(O, n)
    tasks = [(Task("fetch", (o,)), at) for o, at in zip(objs, pick_arrivals(rng, n, k.arrival_window))]
    events = []
    if rng.random() < k.p_emergency:
        events.append(ExoEvent(rng.randint(*k.emergency_window), Task("emergency", (rng.choice(L),))))
    return Problem(f"fetch-{index:03d}", domain.name, state, tasks, events, rng.seed)
