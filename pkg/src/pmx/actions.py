"""The embedded action language: expression/statement AST, static type
checking against a component's variables and ports, guard evaluation and
action execution.

Guards are side-effect free boolean expressions. Action execution returns a
new environment and forwards send/reply effects to an emitter in program
order; integer arithmetic is 64-bit signed and overflow is a runtime error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import (
    INPUT, OUTPUT, MsgRef, PmxError, SystemModel, Component, Violation,
    port_messages,
)

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1


class ActionError(PmxError):
    """Runtime failure while evaluating a guard or executing actions."""


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Lit:
    value: object  # int | bool | str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class PayloadRef:
    field: str


@dataclass(frozen=True)
class Receipt:
    """receipt(m) — true iff m names the most recently received message."""

    message: str


@dataclass(frozen=True)
class Random:
    """random() — next value from the run's seeded generator."""


@dataclass(frozen=True)
class Unary:
    op: str  # '!' | '-'
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Assign:
    name: str
    expr: object


@dataclass(frozen=True)
class Send:
    port: str
    message: str
    args: tuple = ()


@dataclass(frozen=True)
class Reply:
    message: str
    args: tuple = ()


@dataclass(frozen=True)
class Log:
    expr: object


@dataclass(frozen=True)
class If:
    cond: object
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class Probe:
    """Internal: ask the input provider for a decision-point selection."""

    dec_p: str


@dataclass(frozen=True)
class ActionBlock:
    statements: tuple = ()

    def __bool__(self) -> bool:
        return bool(self.statements)


# ---------------------------------------------------------------------------
# Execution context


@dataclass
class ExecContext:
    """Everything exec/eval may touch besides the variable environment."""

    emit: Callable[[str, str, list], None] = lambda port, msg, args: None
    log: Callable[[str], None] = lambda text: None
    payload: dict = field(default_factory=dict)
    reply_to: Optional[MsgRef] = None  # port/message the current message arrived on
    reply: Optional[Callable[[str, list], None]] = None
    probe: Optional[Callable[[str, dict], int]] = None  # (dec_p id, live env) -> selection
    rng: Optional[object] = None  # random.Random
    last_message: Optional[str] = None
    scratch: Optional[dict] = None  # session-defined variables, may shadow nothing


def _check_int(v: int) -> int:
    if not (INT_MIN <= v <= INT_MAX):
        raise ActionError(f"integer overflow: {v}")
    return v


def eval_expr(env: dict, expr, ctx: Optional[ExecContext] = None):
    ctx = ctx or ExecContext()
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        if expr.name in env:
            return env[expr.name]
        if ctx.scratch is not None and expr.name in ctx.scratch:
            return ctx.scratch[expr.name]
        raise ActionError(f"unbound variable {expr.name!r}")
    if isinstance(expr, PayloadRef):
        if expr.field not in ctx.payload:
            raise ActionError(f"no payload field {expr.field!r} on the current message")
        return ctx.payload[expr.field]
    if isinstance(expr, Receipt):
        return ctx.last_message == expr.message
    if isinstance(expr, Random):
        if ctx.rng is None:
            raise ActionError("random() used without a seeded generator")
        return ctx.rng.randrange(0, 2 ** 31)
    if isinstance(expr, Unary):
        v = eval_expr(env, expr.operand, ctx)
        if expr.op == "!":
            if not isinstance(v, bool):
                raise ActionError("'!' expects a bool")
            return not v
        if expr.op == "-":
            if not isinstance(v, int) or isinstance(v, bool):
                raise ActionError("unary '-' expects an int")
            return _check_int(-v)
    if isinstance(expr, Binary):
        if expr.op in ("&&", "||"):
            lv = eval_expr(env, expr.left, ctx)
            if not isinstance(lv, bool):
                raise ActionError(f"{expr.op!r} expects bools")
            if expr.op == "&&" and not lv:
                return False
            if expr.op == "||" and lv:
                return True
            rv = eval_expr(env, expr.right, ctx)
            if not isinstance(rv, bool):
                raise ActionError(f"{expr.op!r} expects bools")
            return rv
        lv = eval_expr(env, expr.left, ctx)
        rv = eval_expr(env, expr.right, ctx)
        op = expr.op
        if op in ("==", "!="):
            res = lv == rv
            return res if op == "==" else not res
        if op in ("<", "<=", ">", ">="):
            if not (isinstance(lv, int) and isinstance(rv, int)) or isinstance(lv, bool) or isinstance(rv, bool):
                raise ActionError(f"comparison {op!r} expects ints")
            return {"<": lv < rv, "<=": lv <= rv, ">": lv > rv, ">=": lv >= rv}[op]
        if op in ("+", "-", "*", "/", "%"):
            if not (isinstance(lv, int) and isinstance(rv, int)) or isinstance(lv, bool) or isinstance(rv, bool):
                raise ActionError(f"arithmetic {op!r} expects ints")
            if op == "+":
                return _check_int(lv + rv)
            if op == "-":
                return _check_int(lv - rv)
            if op == "*":
                return _check_int(lv * rv)
            if rv == 0:
                raise ActionError("division by zero")
            if op == "/":
                q = abs(lv) // abs(rv)
                return _check_int(q if (lv >= 0) == (rv >= 0) else -q)
            return _check_int(lv - rv * (abs(lv) // abs(rv)) * (1 if (lv >= 0) == (rv >= 0) else -1))
    raise ActionError(f"cannot evaluate {expr!r}")


def eval_guard(env: dict, guard, ctx: Optional[ExecContext] = None) -> bool:
    """Evaluate a guard; pure, the environment is never changed."""
    if guard is None:
        return True
    v = eval_expr(env, guard, ctx)
    if not isinstance(v, bool):
        raise ActionError(f"guard evaluated to non-bool {v!r}")
    return v


def _exec_stmt(env: dict, stmt, ctx: ExecContext) -> None:
    if isinstance(stmt, Assign):
        v = eval_expr(env, stmt.expr, ctx)
        if stmt.name in env:
            env[stmt.name] = v
        elif ctx.scratch is not None:
            ctx.scratch[stmt.name] = v
        else:
            raise ActionError(f"assignment to undeclared variable {stmt.name!r}")
    elif isinstance(stmt, Send):
        ctx.emit(stmt.port, stmt.message, [eval_expr(env, a, ctx) for a in stmt.args])
    elif isinstance(stmt, Reply):
        if ctx.reply is None:
            raise ActionError("reply outside a message context")
        ctx.reply(stmt.message, [eval_expr(env, a, ctx) for a in stmt.args])
    elif isinstance(stmt, Log):
        ctx.log(str(eval_expr(env, stmt.expr, ctx)))
    elif isinstance(stmt, If):
        branch = stmt.then if eval_expr(env, stmt.cond, ctx) else stmt.orelse
        for s in branch:
            _exec_stmt(env, s, ctx)
    elif isinstance(stmt, Probe):
        if ctx.probe is None:
            raise ActionError("decision point reached without an input provider")
        env["__pmx_sel"] = int(ctx.probe(stmt.dec_p, env))
    else:
        raise ActionError(f"cannot execute {stmt!r}")


def exec_actions(env: dict, actions, ctx: Optional[ExecContext] = None) -> dict:
    """Execute statements in program order; returns the updated environment.

    The input environment is not mutated; effects go through the context.
    """
    ctx = ctx or ExecContext()
    new_env = dict(env)
    if actions is None:
        return new_env
    stmts = actions.statements if isinstance(actions, ActionBlock) else tuple(actions)
    for s in stmts:
        _exec_stmt(new_env, s, ctx)
    return new_env


# ---------------------------------------------------------------------------
# Static type checking (used by model validation)

_TYPES = ("int", "bool", "string")
_PY = {"int": int, "bool": bool, "string": str}


class _TypeEnv:
    def __init__(self, model: SystemModel, comp: Component, payload: Optional[dict] = None):
        self.model = model
        self.comp = comp
        self.vars = {v.name: v.type for v in comp.variables}
        self.payload = payload or {}

    def sendable(self, port: str, message: str):
        p = self.comp.port(port)
        if p is None:
            return None
        for m in port_messages(self.model, self.comp, p, OUTPUT):
            if m.name == message:
                return m
        return None


def _type_of(expr, tenv: _TypeEnv, errs: list[str]) -> Optional[str]:
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return "bool"
        if isinstance(expr.value, int):
            return "int"
        return "string"
    if isinstance(expr, Var):
        t = tenv.vars.get(expr.name)
        if t is None:
            errs.append(f"unknown variable {expr.name!r}")
        return t
    if isinstance(expr, PayloadRef):
        t = tenv.payload.get(expr.field)
        if t is None:
            # payload shape depends on the triggering message; checked dynamically
            return None
        return t
    if isinstance(expr, (Receipt,)):
        return "bool"
    if isinstance(expr, Random):
        return "int"
    if isinstance(expr, Unary):
        t = _type_of(expr.operand, tenv, errs)
        want = "bool" if expr.op == "!" else "int"
        if t is not None and t != want:
            errs.append(f"operator {expr.op!r} expects {want}, got {t}")
        return want
    if isinstance(expr, Binary):
        lt = _type_of(expr.left, tenv, errs)
        rt = _type_of(expr.right, tenv, errs)
        if expr.op in ("&&", "||"):
            for t in (lt, rt):
                if t is not None and t != "bool":
                    errs.append(f"operator {expr.op!r} expects bools")
            return "bool"
        if expr.op in ("==", "!="):
            if lt is not None and rt is not None and lt != rt:
                errs.append(f"cannot compare {lt} with {rt}")
            return "bool"
        if expr.op in ("<", "<=", ">", ">="):
            for t in (lt, rt):
                if t is not None and t != "int":
                    errs.append(f"operator {expr.op!r} expects ints")
            return "bool"
        for t in (lt, rt):
            if t is not None and t != "int":
                errs.append(f"operator {expr.op!r} expects ints")
        return "int"
    errs.append(f"unknown expression {expr!r}")
    return None


def _check_stmt(stmt, tenv: _TypeEnv, errs: list[str]) -> None:
    if isinstance(stmt, Assign):
        t = _type_of(stmt.expr, tenv, errs)
        declared = tenv.vars.get(stmt.name)
        if declared is None:
            errs.append(f"assignment to undeclared variable {stmt.name!r}")
        elif t is not None and t != declared:
            errs.append(f"cannot assign {t} to {declared} variable {stmt.name!r}")
    elif isinstance(stmt, Send):
        m = tenv.sendable(stmt.port, stmt.message)
        if m is None:
            errs.append(f"cannot send {stmt.message!r} on port {stmt.port!r}")
        elif len(stmt.args) != len(m.payload):
            errs.append(f"{stmt.port}.{stmt.message} expects {len(m.payload)} argument(s), got {len(stmt.args)}")
        else:
            for a, (fname, ftype) in zip(stmt.args, m.payload):
                t = _type_of(a, tenv, errs)
                if t is not None and t != ftype:
                    errs.append(f"argument {fname!r} of {stmt.message} expects {ftype}, got {t}")
    elif isinstance(stmt, Reply):
        for a in stmt.args:
            _type_of(a, tenv, errs)
    elif isinstance(stmt, Log):
        _type_of(stmt.expr, tenv, errs)
    elif isinstance(stmt, If):
        t = _type_of(stmt.cond, tenv, errs)
        if t is not None and t != "bool":
            errs.append("if condition must be bool")
        for s in stmt.then + stmt.orelse:
            _check_stmt(s, tenv, errs)
    elif isinstance(stmt, Probe):
        pass
    else:
        errs.append(f"unknown statement {stmt!r}")


def _has_side_effects(expr) -> bool:
    if isinstance(expr, (Send, Reply, Assign)):
        return True
    if isinstance(expr, Unary):
        return _has_side_effects(expr.operand)
    if isinstance(expr, Binary):
        return _has_side_effects(expr.left) or _has_side_effects(expr.right)
    return False


def check_component(model: SystemModel, comp: Component, violations: list[Violation]) -> None:
    """Type-check every guard and action block of a component's HSM."""
    hsm = comp.behavior
    if hsm is None:
        return
    tenv = _TypeEnv(model, comp)
    for v in comp.variables:
        if v.type not in _TYPES:
            violations.append(Violation("UnknownType", f"{comp.name}.{v.name}",
                                        f"unsupported variable type {v.type!r}"))
        elif v.init is not None and not isinstance(v.init, _PY[v.type]) or isinstance(v.init, bool) and v.type != "bool":
            if v.init is not None:
                violations.append(Violation("ActionType", f"{comp.name}.{v.name}",
                                            f"initializer does not match type {v.type!r}"))

    def check_block(block, where: str):
        if not block:
            return
        errs: list[str] = []
        for s in block.statements:
            _check_stmt(s, tenv, errs)
        for e in errs:
            violations.append(Violation("ActionType", where, e))

    for s in hsm.states.values():
        check_block(s.entry, f"{comp.name}.{s.id}.entry")
        check_block(s.exit, f"{comp.name}.{s.id}.exit")
    for t in hsm.transitions:
        check_block(t.act, f"{comp.name}.{t.id}.act")
        if t.guard is not None:
            errs: list[str] = []
            gt = _type_of(t.guard, tenv, errs)
            if gt is not None and gt != "bool":
                errs.append(f"guard must be bool, got {gt}")
            if _has_side_effects(t.guard):
                errs.append("guards must be side-effect free")
            for e in errs:
                violations.append(Violation("ActionType", f"{comp.name}.{t.id}.guard", e))


def default_env(comp: Component) -> dict:
    """Initial variable environment: defaults are 0, false and ''."""
    env: dict = {}
    for v in comp.variables:
        if v.init is not None:
            env[v.name] = v.init
        else:
            env[v.name] = {"int": 0, "bool": False, "string": ""}[v.type]
    return env
