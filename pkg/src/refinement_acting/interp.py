"""Method-body instruction AST, its compiled form, and the step successor ``next``.

Bodies are written with the AST classes below (``Action``, ``Subtask``, ``If`` ...)
and compiled once per template into a flat op list with jumps. A frame's
step pointer is ``(pc, iters, locals)``: the program counter, the cursors of
enclosing ``ForIn`` loops, and method-local variables.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

from .core import (
    DomainError,
    EmptyStackError,
    Frame,
    GroundAction,
    InterpreterError,
    MethodInstance,
    RefinementStack,
    State,
    Task,
)


class EvaluationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def ev(self, state: State, env: dict) -> Any:
        raise NotImplementedError

    def refs(self):
        """Yield (kind, name) pairs for declaration checks."""
        return iter(())


def _wrap(x) -> Expr:
    return x if isinstance(x, Expr) else Const(x)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = tuple(value) if isinstance(value, list) else value

    def ev(self, state, env):
        return self.value

    def __repr__(self):
        return repr(self.value)


class Var(Expr):
    """Method parameter or local variable."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def ev(self, state, env):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {self.name!r}") from None

    def __repr__(self):
        return self.name


class SV(Expr):
    """State-variable read, e.g. ``loc(r)``."""

    __slots__ = ("name", "args")

    def __init__(self, name: str, *args):
        self.name = name
        self.args = tuple(_wrap(a) for a in args)

    def key(self, state, env) -> tuple:
        return (self.name, tuple(a.ev(state, env) for a in self.args))

    def ev(self, state, env):
        return state[self.key(state, env)]

    def refs(self):
        yield ("sv", self.name)
        for a in self.args:
            yield from a.refs()

    def __repr__(self):
        return f"{self.name}({', '.join(map(repr, self.args))})"


class Rigid(Expr):
    """Lookup in a rigid relation (a table that never changes)."""

    __slots__ = ("name", "args")

    def __init__(self, name: str, *args):
        self.name = name
        self.args = tuple(_wrap(a) for a in args)

    def ev(self, state, env):
        return state.space.rigid(self.name, tuple(a.ev(state, env) for a in self.args))

    def refs(self):
        yield ("rigid", self.name)
        for a in self.args:
            yield from a.refs()

    def __repr__(self):
        return f"{self.name}[{', '.join(map(repr, self.args))}]"


_BINARY = {
    "+": operator.add, "-": operator.sub, "*": operator.mul,
    "==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
    ">": operator.gt, ">=": operator.ge, "min": min, "max": max,
}


class BinOp(Expr):
    __slots__ = ("op", "fn", "a", "b")

    def __init__(self, op: str, a, b):
        self.op, self.fn = op, _BINARY[op]
        self.a, self.b = _wrap(a), _wrap(b)

    def ev(self, state, env):
        return self.fn(self.a.ev(state, env), self.b.ev(state, env))

    def refs(self):
        yield from self.a.refs()
        yield from self.b.refs()

    def __repr__(self):
        return f"({self.a!r} {self.op} {self.b!r})"


class And(Expr):
    __slots__ = ("parts",)

    def __init__(self, *parts):
        self.parts = tuple(_wrap(p) for p in parts)

    def ev(self, state, env):
        return all(p.ev(state, env) for p in self.parts)

    def refs(self):
        for p in self.parts:
            yield from p.refs()


class Or(And):
    __slots__ = ()

    def ev(self, state, env):
        return any(p.ev(state, env) for p in self.parts)


class Not(Expr):
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = _wrap(a)

    def ev(self, state, env):
        return not self.a.ev(state, env)

    def refs(self):
        return self.a.refs()


class IfExpr(Expr):
    __slots__ = ("cond", "a", "b")

    def __init__(self, cond, a, b):
        self.cond, self.a, self.b = _wrap(cond), _wrap(a), _wrap(b)

    def ev(self, state, env):
        return self.a.ev(state, env) if self.cond.ev(state, env) else self.b.ev(state, env)

    def refs(self):
        for p in (self.cond, self.a, self.b):
            yield from p.refs()


class In(Expr):
    __slots__ = ("item", "coll")

    def __init__(self, item, coll):
        self.item, self.coll = _wrap(item), _wrap(coll)

    def ev(self, state, env):
        return self.item.ev(state, env) in self.coll.ev(state, env)

    def refs(self):
        yield from self.item.refs()
        yield from self.coll.refs()


class Filter(Expr):
    """Ordered sub-collection ``[x for x in coll if where]``."""

    __slots__ = ("var", "coll", "where")

    def __init__(self, var: str, coll, where):
        self.var, self.coll, self.where = var, _wrap(coll), _wrap(where)

    def ev(self, state, env):
        local = dict(env)
        out = []
        for x in self.coll.ev(state, env):
            local[self.var] = x
            if self.where.ev(state, local):
                out.append(x)
        return tuple(out)

    def refs(self):
        yield from self.coll.refs()
        yield from self.where.refs()


class Count(Expr):
    __slots__ = ("coll",)

    def __init__(self, coll):
        self.coll = _wrap(coll)

    def ev(self, state, env):
        return len(self.coll.ev(state, env))

    def refs(self):
        return self.coll.refs()


class ArgBest(Expr):
    """argmin/argmax of ``score`` over ``coll`` (filtered by ``where``).

    Ties go to the earliest element; an empty candidate set yields ``None``.
    """

    __slots__ = ("minimize", "var", "coll", "score", "where")

    def __init__(self, minimize: bool, var: str, coll, score, where=None):
        self.minimize, self.var = minimize, var
        self.coll, self.score = _wrap(coll), _wrap(score)
        self.where = None if where is None else _wrap(where)

    def ev(self, state, env):
        local = dict(env)
        best, best_score = None, None
        for x in self.coll.ev(state, env):
            local[self.var] = x
            if self.where is not None and not self.where.ev(state, local):
                continue
            sc = self.score.ev(state, local)
            if best_score is None or (sc < best_score if self.minimize else sc > best_score):
                best, best_score = x, sc
        return best

    def refs(self):
        yield from self.coll.refs()
        yield from self.score.refs()
        if self.where is not None:
            yield from self.where.refs()


# builder shorthands; bare Python values become constants, variables need ``v``
def c(value) -> Const:
    return Const(value)


def v(name: str) -> Var:
    return Var(name)


def sv(name: str, *args) -> SV:
    return SV(name, *args)


def rigid(name: str, *args) -> Rigid:
    return Rigid(name, *args)


def eq(a, b): return BinOp("==", a, b)
def ne(a, b): return BinOp("!=", a, b)
def lt(a, b): return BinOp("<", a, b)
def le(a, b): return BinOp("<=", a, b)
def gt(a, b): return BinOp(">", a, b)
def ge(a, b): return BinOp(">=", a, b)
def add(a, b): return BinOp("+", a, b)
def sub(a, b): return BinOp("-", a, b)
def mul(a, b): return BinOp("*", a, b)
def minimum(a, b): return BinOp("min", a, b)
def maximum(a, b): return BinOp("max", a, b)
def and_(*parts): return And(*parts)
def or_(*parts): return Or(*parts)
def not_(a): return Not(a)
def member(item, coll): return In(item, coll)
def ite(cond, a, b): return IfExpr(cond, a, b)
def where(var, coll, cond): return Filter(var, coll, cond)
def count(coll): return Count(coll)


def argmin(var, coll, score, where=None):
    return ArgBest(True, var, coll, score, where)


def argmax(var, coll, score, where=None):
    return ArgBest(False, var, coll, score, where)


def evaluate(expr, state: State, env: dict | None = None):
    return _wrap(expr).ev(state, env or {})


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------

class Instr:
    __slots__ = ()


@dataclass(frozen=True, eq=False)
class Action(Instr):
    name: str
    args: tuple = ()

    def __init__(self, name, *args):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(_wrap(a) for a in args))

    def ground(self, state, env) -> GroundAction:
        return GroundAction(self.name, tuple(a.ev(state, env) for a in self.args))

    def __repr__(self):
        return f"Action({self.name}, {list(self.args)})"


@dataclass(frozen=True, eq=False)
class Subtask(Instr):
    name: str
    args: tuple = ()

    def __init__(self, name, *args):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "args", tuple(_wrap(a) for a in args))

    def ground(self, state, env) -> Task:
        return Task(self.name, tuple(a.ev(state, env) for a in self.args))

    def __repr__(self):
        return f"Subtask({self.name}, {list(self.args)})"


@dataclass(frozen=True, eq=False)
class Assign(Instr):
    var: str
    expr: Any

    def __post_init__(self):
        object.__setattr__(self, "expr", _wrap(self.expr))


@dataclass(frozen=True, eq=False)
class If(Instr):
    cond: Any
    then: tuple
    orelse: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cond", _wrap(self.cond))
        object.__setattr__(self, "then", tuple(self.then))
        object.__setattr__(self, "orelse", tuple(self.orelse))


@dataclass(frozen=True, eq=False)
class While(Instr):
    cond: Any
    body: tuple

    def __post_init__(self):
        object.__setattr__(self, "cond", _wrap(self.cond))
        object.__setattr__(self, "body", tuple(self.body))
        if not self.body:
            raise DomainError("While needs a non-empty body")


@dataclass(frozen=True, eq=False)
class ForIn(Instr):
    var: str
    coll: Any
    body: tuple

    def __post_init__(self):
        object.__setattr__(self, "coll", _wrap(self.coll))
        object.__setattr__(self, "body", tuple(self.body))
        if not self.body:
            raise DomainError("ForIn needs a non-empty body")


@dataclass(frozen=True, eq=False)
class Fail(Instr):
    pass


class _End:
    __slots__ = ()

    def __repr__(self):
        return "END"


END = _End()


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

# atomic op kinds are the steps a frame can rest on
ACT, SUB, ASSIGN, FAIL, JF, JMP, FOR_INIT, FOR_NEXT = range(8)
_ATOMIC = FAIL


class Op(NamedTuple):
    kind: int
    instr: Any = None
    expr: Any = None
    target: int = -1
    var: str | None = None


def compile_body(body: Sequence[Instr]) -> tuple[Op, ...]:
    ops: list[Op] = []

    def emit(seq):
        for ins in seq:
            if isinstance(ins, Action):
                ops.append(Op(ACT, ins))
            elif isinstance(ins, Subtask):
                ops.append(Op(SUB, ins))
            elif isinstance(ins, Assign):
                ops.append(Op(ASSIGN, ins, ins.expr, var=ins.var))
            elif isinstance(ins, Fail):
                ops.append(Op(FAIL, ins))
            elif isinstance(ins, If):
                jf = len(ops)
                ops.append(None)
                emit(ins.then)
                if ins.orelse:
                    jmp = len(ops)
                    ops.append(None)
                    ops[jf] = Op(JF, ins, ins.cond, len(ops))
                    emit(ins.orelse)
                    ops[jmp] = Op(JMP, ins, target=len(ops))
                else:
                    ops[jf] = Op(JF, ins, ins.cond, len(ops))
            elif isinstance(ins, While):
                head = len(ops)
                ops.append(None)
                emit(ins.body)
                ops.append(Op(JMP, ins, target=head))
                ops[head] = Op(JF, ins, ins.cond, len(ops))
            elif isinstance(ins, ForIn):
                ops.append(Op(FOR_INIT, ins, ins.coll))
                head = len(ops)
                ops.append(None)
                emit(ins.body)
                ops.append(Op(JMP, ins, target=head))
                ops[head] = Op(FOR_NEXT, ins, target=len(ops), var=ins.var)
            else:
                raise DomainError(f"unknown instruction {ins!r}")

    emit(body)
    return tuple(ops)


def iter_instrs(body):
    for ins in body:
        yield ins
        if isinstance(ins, If):
            yield from iter_instrs(ins.then)
            yield from iter_instrs(ins.orelse)
        elif isinstance(ins, (While, ForIn)):
            yield from iter_instrs(ins.body)


# ---------------------------------------------------------------------------
# Step pointers and next
# ---------------------------------------------------------------------------

class StepPointer(NamedTuple):
    pc: int
    iters: tuple = ()
    locals: tuple = ()


_CONTROL_LIMIT = 100_000


def _set_local(local: tuple, name: str, value) -> tuple:
    d = dict(local)
    d[name] = value
    return tuple(sorted(d.items()))


def frame_env(domain, method: MethodInstance, ptr: StepPointer | None) -> dict:
    env = domain.template(method.name).binding(method.args)
    if ptr is not None and ptr.locals:
        env.update(ptr.locals)
    return env


def resolve(domain, method: MethodInstance, ptr: StepPointer | None, state: State) -> StepPointer:
    """Run control ops from ``ptr`` until an atomic op or the end of the body."""
    code = domain.template(method.name).code
    if ptr is None:
        ptr = StepPointer(0)
    pc, iters, local = ptr
    n = len(code)
    env = None
    for _ in range(_CONTROL_LIMIT):
        if pc >= n:
            if pc > n:
                raise InterpreterError(f"step pointer {pc} beyond body of {method.name}")
            return StepPointer(pc, iters, local)
        if pc < 0:
            raise InterpreterError(f"negative step pointer in {method.name}")
        op = code[pc]
        kind = op.kind
        if kind <= _ATOMIC:
            return StepPointer(pc, iters, local)
        if env is None:
            env = frame_env(domain, method, StepPointer(pc, iters, local))
        if kind == JF:
            pc = pc + 1 if op.expr.ev(state, env) else op.target
        elif kind == JMP:
            pc = op.target
        elif kind == FOR_INIT:
            iters = iters + ((tuple(op.expr.ev(state, env)), 0),)
            pc += 1
        else:  # FOR_NEXT
            if not iters:
                raise InterpreterError(f"loop cursor missing in {method.name}")
            items, pos = iters[-1]
            if pos < len(items):
                iters = iters[:-1] + ((items, pos + 1),)
                local = _set_local(local, op.var, items[pos])
                env[op.var] = items[pos]
                pc += 1
            else:
                iters = iters[:-1]
                pc = op.target
    raise InterpreterError(f"control flow in {method.name} never reaches an instruction")


def current_op(domain, stack: Sequence[Frame], state: State) -> Op | None:
    """The atomic op at the top frame, or None at the end of the body."""
    if not stack:
        raise EmptyStackError("empty refinement stack")
    task, method, ptr = stack[-1]
    if method is None:
        raise InterpreterError(f"no method chosen yet for {task}")
    if ptr is None or ptr.pc < 0 or (ptr.pc < len(domain.template(method.name).code)
                                      and domain.template(method.name).code[ptr.pc].kind > _ATOMIC):
        ptr = resolve(domain, method, ptr, state)
    code = domain.template(method.name).code
    if ptr.pc == len(code):
        return None
    if ptr.pc > len(code):
        raise InterpreterError(f"step pointer {ptr.pc} beyond body of {method.name}")
    return code[ptr.pc]


def current_instr(domain, stack: Sequence[Frame], state: State):
    """Instruction addressed by the top frame, ``END`` when the body is exhausted."""
    op = current_op(domain, stack, state)
    return END if op is None else op.instr


def _settle(domain, frames: list, state: State) -> RefinementStack:
    # advance the top frame by one step; pop frames whose bodies end, advancing the one below
    while frames:
        task, method, ptr = frames[-1]
        pc = -1 if ptr is None else ptr.pc
        ptr = resolve(domain, method, StepPointer(pc + 1, *(ptr[1:] if ptr else ())), state)
        if ptr.pc < len(domain.template(method.name).code):
            frames[-1] = Frame(task, method, ptr)
            return RefinementStack(frames)
        frames.pop()
    return RefinementStack()


def next_stack(domain, stack: Sequence[Frame], state: State) -> RefinementStack:
    """Stack after the top frame's current step completed successfully in ``state``."""
    if not stack:
        raise EmptyStackError("next on an empty refinement stack")
    if stack[-1].method is None:
        raise InterpreterError("next on a frame without a method")
    return _settle(domain, list(stack), state)


def start_frame(domain, stack: Sequence[Frame], task: Task, method: MethodInstance,
                state: State) -> RefinementStack:
    """Push ``(task, method)`` and position it at its first step.

    An empty (or immediately finished) body pops at once, like any completed frame.
    """
    frames = list(stack)
    frames.append(Frame(task, method, StepPointer(-1)))
    return _settle(domain, frames, state)


def assign_step(domain, stack: Sequence[Frame], state: State) -> RefinementStack:
    """Execute the Assign at the top frame (locals only) and advance."""
    task, method, ptr = stack[-1]
    op = domain.template(method.name).code[ptr.pc]
    if op.kind != ASSIGN:
        raise InterpreterError("assign_step on a non-assignment")
    value = op.expr.ev(state, frame_env(domain, method, ptr))
    frames = list(stack)
    frames[-1] = Frame(task, method, StepPointer(ptr.pc, ptr.iters, _set_local(ptr.locals, op.var, value)))
    return _settle(domain, frames, state)


def ground_op(domain, stack: Sequence[Frame], state: State, op: Op):
    """Ground the action or subtask at the top frame."""
    _, method, ptr = stack[-1]
    return op.instr.ground(state, frame_env(domain, method, ptr))


# ---------------------------------------------------------------------------
# Domain validation
# ---------------------------------------------------------------------------

def _check_refs(domain, expr, where: str):
    if expr is None:
        return
    expr = _wrap(expr)
    names = {d.name for d in domain.space.decls}
    for kind, name in expr.refs():
        if kind == "sv" and name not in names:
            raise DomainError(f"{where}: undeclared state variable {name!r}")
        if kind == "rigid" and name not in domain.space.rigids:
            raise DomainError(f"{where}: undeclared rigid relation {name!r}")


def validate_domain(domain) -> None:
    """Check that every symbol used by actions and method bodies is declared."""
    for a in domain.actions.values():
        _check_refs(domain, a.pre, f"action {a.name} pre")
        for i, o in enumerate(a.outcomes):
            if not isinstance(o.cost, (int, float)):
                _check_refs(domain, o.cost, f"action {a.name} outcome {i} cost")
            for e in o.effects:
                if not isinstance(e.target, SV):
                    raise DomainError(f"action {a.name} outcome {i}: effect target must be a state variable")
                _check_refs(domain, e.target, f"action {a.name} outcome {i} effect")
                _check_refs(domain, e.value, f"action {a.name} outcome {i} effect")
        if a.raises is not None:
            decl = domain.tasks.get(a.raises.name)
            if decl is None or not decl.event:
                raise DomainError(f"action {a.name} raises {a.raises.name!r}, which is not a declared event")
            if len(a.raises.args) != len(decl.params):
                raise DomainError(f"action {a.name}: event {a.raises.name} expects {len(decl.params)} arguments")
            for x in a.raises.args:
                _check_refs(domain, x, f"action {a.name} raises")
    for t in domain.templates:
        where = f"method {t.name}"
        _check_refs(domain, t.pre, where)
        for ins in iter_instrs(t.body):
            if isinstance(ins, Action):
                spec = domain.actions.get(ins.name)
                if spec is None:
                    raise DomainError(f"{where}: undeclared action {ins.name!r}")
                if len(ins.args) != len(spec.params):
                    raise DomainError(f"{where}: action {ins.name} expects {len(spec.params)} arguments")
                for a in ins.args:
                    _check_refs(domain, a, where)
            elif isinstance(ins, Subtask):
                decl = domain.tasks.get(ins.name)
                if decl is None:
                    raise DomainError(f"{where}: undeclared task {ins.name!r}")
                if len(ins.args) != len(decl.params):
                    raise DomainError(f"{where}: task {ins.name} expects {len(decl.params)} arguments")
                for a in ins.args:
                    _check_refs(domain, a, where)
            elif isinstance(ins, (If, While)):
                _check_refs(domain, ins.cond, where)
            elif isinstance(ins, ForIn):
                _check_refs(domain, ins.coll, where)
            elif isinstance(ins, Assign):
                _check_refs(domain, ins.expr, where)
        t.code  # noqa: B018  compile eagerly so malformed bodies fail at load
