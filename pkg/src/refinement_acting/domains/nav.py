"""Nav: robots move objects between rooms through ordinary and spring doors.

A spring door closes unless held open. A loaded robot cannot hold one, so it
asks a free robot for help. Door types are unknown until sensed.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..core import Task
from ..interp import (
    Action,
    If,
    Subtask,
    While,
    and_,
    eq,
    member,
    ne,
    not_,
    or_,
    rigid,
    sv,
    v,
)
from ..sim import Problem
from .builder import DomainBuilder, failure, outcome, set_
from .common import pick_arrivals


@dataclass(frozen=True)
class NavConstants:
    rooms: tuple = ("hall", "lab", "store", "office")
    doors: dict = field(default_factory=lambda: {
        "d1": ("hall", "lab"), "d2": ("hall", "store"), "d3": ("store", "office"), "d4": ("lab", "office")})
    robots: tuple = ("a1", "a2", "a3", "a4")
    objects: tuple = ("b1", "b2", "b3")
    p_spring: float = 0.5
    p_open_ok: float = 0.7
    open_cost: float = 1.0
    force_cost: float = 2.5
    push_cost: float = 2.0
    arrival_window: tuple = (0, 5)


NIL = "nil"
UNKNOWN = "unknown"


def _routes(rooms, doors):
    # next room on a shortest path, and the door between adjacent rooms
    adj = {r: [] for r in rooms}
    door_of = {(a, b): None for a in rooms for b in rooms}
    for d, (a, b) in doors.items():
        adj[a].append(b)
        adj[b].append(a)
        door_of[(a, b)] = door_of[(b, a)] = d
    nxt = {}
    for dst in rooms:
        seen, q = {dst}, deque([dst])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    nxt[(y, dst)] = x
                    q.append(y)
        nxt[(dst, dst)] = dst
    return nxt, door_of


def build(constants: NavConstants | None = None):
    k = constants or NavConstants()
    L, D, R, O = k.rooms, tuple(k.doors), k.robots, k.objects
    nxt, door_of = _routes(L, k.doors)
    b = DomainBuilder("nav")
    b.var("loc", L, over=R)
    b.var("load", (NIL,) + O, over=R)
    b.var("busy", (False, True), over=R)
    b.var("objAt", L + R, over=O)
    b.var("doorType", (UNKNOWN, "ordinary", "spring"), over=D)
    b.var("doorOpen", (False, True), over=D)
    b.var("holder", (NIL,) + R, over=D)
    b.rigid("nextRoom", nxt)
    b.rigid("doorOf", door_of)
    b.rigid("sides", dict(k.doors))
    # the side of each door a robot reaches first from each room
    b.rigid("nearSide", {(r0, d): (a if _hops(nxt, r0, a) <= _hops(nxt, r0, c) else c)
                         for r0 in L for d, (a, c) in k.doors.items()})

    here = sv("loc", v("r"))
    dtype = sv("doorType", v("d"))
    through = eq(rigid("doorOf", here, v("l")), v("d"))
    b.action("senseDoor", ("r", "d"), [
        outcome(k.p_spring, set_(dtype, "spring"), cost=1.0),
        outcome(1 - k.p_spring, set_(dtype, "ordinary"), cost=1.0),
    ], pre=and_(eq(dtype, UNKNOWN), member(here, rigid("sides", v("d")))))
    b.action("openDoor", ("r", "d"), [
        outcome(k.p_open_ok, set_(sv("doorOpen", v("d")), True), cost=k.open_cost),
        failure(1 - k.p_open_ok, cost=k.open_cost),
    ], pre=and_(eq(dtype, "ordinary"), member(here, rigid("sides", v("d")))))
    b.action("forceOpen", ("r", "d"), effects=[set_(sv("doorOpen", v("d")), True)], cost=k.force_cost,
             pre=and_(eq(dtype, "ordinary"), member(here, rigid("sides", v("d")))))
    b.action("pass", ("r", "d", "l"), effects=[set_(here, v("l"))], cost=1.0,
             pre=and_(through, or_(and_(eq(dtype, "ordinary"), sv("doorOpen", v("d"))),
                                   and_(eq(dtype, "spring"), ne(sv("holder", v("d")), NIL),
                                        ne(sv("holder", v("d")), v("r"))))))
    b.action("pushThrough", ("r", "d", "l"), effects=[set_(here, v("l"))], cost=k.push_cost,
             pre=and_(through, eq(dtype, "spring"), eq(sv("load", v("r")), NIL)))
    b.action("hold", ("h", "d"), effects=[set_(sv("holder", v("d")), v("h"))], cost=1.0,
             pre=and_(eq(sv("doorType", v("d")), "spring"), eq(sv("holder", v("d")), NIL),
                      eq(sv("load", v("h")), NIL), member(sv("loc", v("h")), rigid("sides", v("d")))))
    b.action("release", ("h", "d"), effects=[set_(sv("holder", v("d")), NIL), set_(sv("busy", v("h")), False)],
             cost=0.5, pre=and_(ne(v("h"), NIL), eq(sv("holder", v("d")), v("h"))))
    # reserve a robot, for a transfer or as a door holder
    b.action("claim", ("h",), effects=[set_(sv("busy", v("h")), True)], cost=0.5,
             pre=eq(sv("busy", v("h")), False))
    b.action("pick", ("r", "o"), effects=[set_(sv("load", v("r")), v("o")), set_(sv("objAt", v("o")), v("r"))],
             cost=1.0, pre=and_(eq(sv("objAt", v("o")), here), eq(sv("load", v("r")), NIL)))
    b.action("drop", ("r", "o"), effects=[set_(sv("load", v("r")), NIL), set_(sv("objAt", v("o")), here),
                                          set_(sv("busy", v("r")), False)],
             cost=1.0, pre=eq(sv("load", v("r")), v("o")))

    b.task("transfer", ("o", "l"), ranges=(O, L))
    b.task("navigate", ("r", "l"), ranges=(R, L))
    b.task("cross", ("r", "d", "l"), ranges=(R, D, L))
    b.task("open", ("r", "d"), ranges=(R, D))
    b.task("getHelp", ("r", "d"), ranges=(R, D))
    b.task("holdDoor", ("h", "d"), ranges=(R, D))

    b.method("m-transfer", "transfer", ("o", "l"), [
        Action("claim", v("r")),
        Subtask("navigate", v("r"), sv("objAt", v("o"))),
        Action("pick", v("r"), v("o")),
        Subtask("navigate", v("r"), v("l")),
        Action("drop", v("r"), v("o")),
    ], free={"r": R}, pre=and_(eq(sv("load", v("r")), NIL), eq(sv("busy", v("r")), False),
                               member(sv("objAt", v("o")), L)))
    b.method("m-navigate", "navigate", ("r", "l"), [
        # a helper request may move the robot, so the next hop is grounded in one step
        While(ne(here, v("l")), [
            Subtask("cross", v("r"), rigid("doorOf", here, rigid("nextRoom", here, v("l"))),
                    rigid("nextRoom", here, v("l"))),
        ]),
    ])
    b.method("m1-cross", "cross", ("r", "d", "l"), [
        Action("senseDoor", v("r"), v("d")),
        Subtask("cross", v("r"), v("d"), v("l")),
    ], pre=eq(dtype, UNKNOWN))
    b.method("m2-cross", "cross", ("r", "d", "l"), [
        If(not_(sv("doorOpen", v("d"))), [Subtask("open", v("r"), v("d"))]),
        Action("pass", v("r"), v("d"), v("l")),
    ], pre=eq(dtype, "ordinary"))
    b.method("m3-cross", "cross", ("r", "d", "l"), [Action("pushThrough", v("r"), v("d"), v("l"))],
             pre=and_(eq(dtype, "spring"), eq(sv("load", v("r")), NIL)))
    b.method("m4-cross", "cross", ("r", "d", "l"), [
        Subtask("getHelp", v("r"), v("d")),
        Action("pass", v("r"), v("d"), v("l")),
        Action("release", sv("holder", v("d")), v("d")),
    ], pre=eq(dtype, "spring"))
    b.method("m1-open", "open", ("r", "d"), [Action("openDoor", v("r"), v("d"))])
    b.method("m2-open", "open", ("r", "d"), [Action("forceOpen", v("r"), v("d"))])
    b.method("m-getHelp", "getHelp", ("r", "d"), [
        Action("claim", v("h")),
        Subtask("holdDoor", v("h"), v("d")),
    ], free={"h": R}, pre=and_(ne(v("h"), v("r")), eq(sv("busy", v("h")), False),
                               eq(sv("load", v("h")), NIL)))
    b.method("m-holdDoor", "holdDoor", ("h", "d"), [
        If(not_(member(sv("loc", v("h")), rigid("sides", v("d")))),
           [Subtask("navigate", v("h"), rigid("nearSide", sv("loc", v("h")), v("d")))]),
        Action("hold", v("h"), v("d")),
    ])

    holder = {}
    dom = b.build(generator=lambda rng, index=0: holder["gen"](rng, index),
                  features={"exogenous_events": False, "dead_ends": False, "sensing": True,
                            "collaboration": True, "parallel_tasks": True},
                  constants=k)
    holder["gen"] = lambda rng, index=0: generate(dom, k, rng, index)
    return dom


def _hops(nxt, a, b):
    n = 0
    while a != b:
        a = nxt[(a, b)]
        n += 1
    return n


def generate(domain, k: NavConstants, rng, index: int = 0) -> Problem:
    values = {}
    for r in k.robots:
        values[("loc", (r,))] = rng.choice(k.rooms)
        values[("load", (r,))] = NIL
        values[("busy", (r,))] = False
    for o in k.objects:
        values[("objAt", (o,))] = rng.choice(k.rooms)
    for d in k.doors:
        values[("doorType", (d,))] = UNKNOWN
        values[("doorOpen", (d,))] = False
        values[("holder", (d,))] = NIL
    state = domain.space.state(values)
    n = rng.randint(1, 3)
    objs = rng.sample(k.objects, n)
    tasks = []
    for o, at in zip(objs, pick_arrivals(rng, n, k.arrival_window)):
        dest = rng.choice([x for x in k.rooms if x != values[("objAt", (o,))]])
        tasks.append((Task("transfer", (o, dest)), at))
    return Problem(f"nav-{index:03d}", domain.name, state, tasks, [], rng.seed)
