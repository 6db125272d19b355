"""Tiny fixture domains whose outcome trees can be enumerated exhaustively."""
from __future__ import annotations

from ..core import Task
from ..interp import (
    Action,
    Assign,
    Fail,
    ForIn,
    If,
    Subtask,
    While,
    argmin,
    eq,
    lt,
    mul,
    add,
    ne,
    rigid,
    sv,
    v,
)
from ..sim import Problem
from .builder import DomainBuilder, failure, outcome, set_

ORACLE_DOMAINS = ("micro-choice", "micro-seq", "micro-nested", "micro-param", "micro-control")


def _single_task_problem(domain, task=Task("t")):
    def gen(rng, index=0):
        return Problem(f"{domain.name}-{index:03d}", domain.name, initial_state(domain), [(task, 0)], [], rng.seed)

    return gen


def initial_state(domain):
    return domain.space.state({d.key: d.range[0] for d in domain.space.decls})


def micro_choice():
    """Deterministic cost 2 versus a cheap action that fails 40% of the time."""
    b = DomainBuilder("micro-choice")
    b.var("done", (False, True))
    b.action("slow", effects=[set_(sv("done"), True)], cost=2.0)
    b.action("risky", outcomes=[outcome(0.6, set_(sv("done"), True), cost=1.0), failure(0.4)])
    b.task("t")
    b.method("mA", "t", (), [Action("slow")])
    b.method("mB", "t", (), [Action("risky")])
    return _finish(b)


def micro_seq():
    """Three single-level methods: a two-step sequence, a variable-cost action, a risky one."""
    b = DomainBuilder("micro-seq")
    b.var("stage", (0, 1, 2))
    b.action("x1", effects=[set_(sv("stage"), 1)], cost=1.0)
    b.action("x2", effects=[set_(sv("stage"), 2)], cost=2.0)
    b.action("y", outcomes=[outcome(0.5, set_(sv("stage"), 2), cost=1.0),
                            outcome(0.5, set_(sv("stage"), 2), cost=4.0)])
    b.action("z", outcomes=[outcome(0.9, set_(sv("stage"), 2), cost=2.0), failure(0.1)])
    b.task("t")
    b.method("m1", "t", (), [Action("x1"), Action("x2")])
    b.method("m2", "t", (), [Action("y")])
    b.method("m3", "t", (), [Action("z")])
    return _finish(b)


def micro_nested():
    """A root method with a subtask that has its own choice."""
    b = DomainBuilder("micro-nested")
    b.var("pos", (0, 1, 2))
    b.action("a", effects=[set_(sv("pos"), 1)], cost=1.0)
    b.action("b", effects=[set_(sv("pos"), 2)], cost=3.0)
    b.action("c", outcomes=[outcome(0.5, set_(sv("pos"), 2), cost=1.0), failure(0.5)])
    b.action("d", effects=[set_(sv("pos"), 2)], cost=1.5)
    b.task("t")
    b.task("u")
    b.method("m1", "t", (), [Action("a"), Subtask("u")])
    b.method("m2", "t", (), [Action("b")])
    b.method("u1", "u", (), [Action("c")])
    b.method("u2", "u", (), [Action("d")])
    return _finish(b)


def micro_param():
    """One template with a free parameter whose candidates are filtered by the precondition."""
    b = DomainBuilder("micro-param")
    b.var("at", ("home", "A", "B", "C"))
    b.rigid("dist", {"A": 1.0, "B": 1.6, "C": 4.0})
    b.rigid("reliable", {"A": False, "B": True, "C": True})
    b.action("go", ("l",), effects=[set_(sv("at"), v("l"))], cost=rigid("dist", v("l")),
             pre=rigid("reliable", v("l")))
    b.action("dash", ("l",), outcomes=[outcome(0.8, set_(sv("at"), v("l")), cost=mul(2, rigid("dist", v("l")))),
                                       failure(0.2)])
    b.task("t")
    b.method("m-go", "t", (), [Action("go", v("l"))], free={"l": ("A", "B", "C")},
             pre=rigid("reliable", v("l")))
    b.method("m-dash", "t", (), [Action("dash", v("l"))], free={"l": ("A", "B", "C")},
             pre=eq(v("l"), "A"))
    return _finish(b)


def micro_control():
    """Loops, assignment, argmin, branching and an explicit Fail."""
    b = DomainBuilder("micro-control")
    b.var("count", (0, 1, 2))
    b.var("spent", (0, 1, 2, 3, 4, 5, 6))
    b.var("hasTool", (False,))
    b.rigid("tools", ("t1", "t2"))
    b.action("step", ("k",), effects=[set_(sv("spent"), add(sv("spent"), v("k")))], cost=v("k"))
    b.action("inc", outcomes=[outcome(0.8, set_(sv("count"), add(sv("count"), 1)), cost=1.0), failure(0.2)])
    b.action("use", ("tool",), cost=1.0)
    b.task("t")
    b.method("m-for", "t", (), [ForIn("k", (1, 2, 3), [Action("step", v("k"))])])
    b.method("m-while", "t", (), [While(lt(sv("count"), 2), [Action("inc")])])
    b.method("m-tool", "t", (), [
        Assign("r", argmin("x", rigid("tools"), 0, where=sv("hasTool"))),
        If(eq(v("r"), None), [Fail()], [Action("use", v("r"))]),
    ])
    return _finish(b)


def micro_always_fail():
    """Planner can only pick the single method, whose action always fails when acted."""
    b = DomainBuilder("micro-always-fail")
    b.var("done", (False, True))
    b.action("doomed", outcomes=[failure(1.0)])
    b.task("t")
    b.method("m-doomed", "t", (), [Action("doomed")])
    return _finish(b)


def micro_deterministic():
    """All-deterministic two-method domain; every method succeeds."""
    b = DomainBuilder("micro-deterministic")
    b.var("done", (False, True))
    b.action("one", effects=[set_(sv("done"), True)], cost=1.0)
    b.action("two", effects=[set_(sv("done"), True)], cost=2.0)
    b.task("t")
    b.method("m-two", "t", (), [Action("two")])
    b.method("m-one", "t", (), [Action("one")])
    return _finish(b)


def _finish(b: DomainBuilder):
    holder = {}
    dom = b.build(generator=lambda rng, index=0: holder["gen"](rng, index),
                  features={"exogenous_events": False, "dead_ends": False, "sensing": False,
                            "collaboration": False, "parallel_tasks": False})
    holder["gen"] = _single_task_problem(dom)
    return dom


def courier():
    """Deterministic three-task domain used for hand-checked engine traces.

    ``deliver`` has two methods; the first uses the ``bridge`` action which fails
    whenever the bridge is closed, forcing a retry with the second.
    """
    b = DomainBuilder("courier")
    locs = ("depot", "mid", "shop")
    b.var("at", locs, over=["p1", "p2"])
    b.var("bridgeOpen", (True, False))
    b.var("stocked", (False, True), over=["shop"])
    b.action("walk", ("p", "l"), effects=[set_(sv("at", v("p")), v("l"))], cost=1.0, duration=2)
    b.action("bridge", ("p", "l"), effects=[set_(sv("at", v("p")), v("l"))], cost=1.0, pre=sv("bridgeOpen"))
    b.action("restock", ("s",), effects=[set_(sv("stocked", v("s")), True)], cost=2.0)
    b.task("deliver", ("p", "l"))
    b.task("goto", ("p", "l"))
    b.task("stock", ("s",))
    b.method("m-bridge", "deliver", ("p", "l"), [Action("bridge", v("p"), v("l"))])
    b.method("m-walk", "deliver", ("p", "l"), [Subtask("goto", v("p"), "mid"), Subtask("goto", v("p"), v("l"))])
    b.method("m-goto", "goto", ("p", "l"), [If(ne(sv("at", v("p")), v("l")), [Action("walk", v("p"), v("l"))])])
    b.method("m-stock", "stock", ("s",), [If(eq(sv("stocked", v("s")), False), [Action("restock", v("s"))])])
    return b.build(features={"exogenous_events": True, "dead_ends": False, "sensing": False,
                             "collaboration": False, "parallel_tasks": True})


BUILDERS = {
    "micro-choice": micro_choice,
    "micro-seq": micro_seq,
    "micro-nested": micro_nested,
    "micro-param": micro_param,
    "micro-control": micro_control,
    "micro-always-fail": micro_always_fail,
    "micro-deterministic": micro_deterministic,
    "courier": courier,
}
