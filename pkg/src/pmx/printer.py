"""Canonical serializer for models and action ASTs.

Two-space indentation, declarations ordered interfaces -> components ->
connectors, elements kept in declaration order; parse(serialize(m)) is
structurally equal to m.
"""

from __future__ import annotations

from . import actions as A
from . import model as M

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
         "+": 4, "-": 4, "*": 5, "/": 5, "%": 5}


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")


def format_expr(expr, parent_prec: int = 0) -> str:
    if isinstance(expr, A.Lit):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        if isinstance(expr.value, str):
            return f'"{_escape(expr.value)}"'
        return str(expr.value)
    if isinstance(expr, A.Var):
        return expr.name
    if isinstance(expr, A.PayloadRef):
        return f"payload.{expr.field}"
    if isinstance(expr, A.Receipt):
        return f"receipt({expr.message})"
    if isinstance(expr, A.Random):
        return "random()"
    if isinstance(expr, A.Unary):
        inner = format_expr(expr.operand, 6)
        if expr.op == "-" and inner.startswith("-"):
            inner = f"({inner})"  # avoid fusing into the '--' token
        return f"{expr.op}{inner}"
    if isinstance(expr, A.Binary):
        prec = _PREC[expr.op]
        left_prec = prec + 1 if expr.op in ("==", "!=", "<", "<=", ">", ">=") else prec
        s = f"{format_expr(expr.left, left_prec)} {expr.op} {format_expr(expr.right, prec + 1)}"
        return f"({s})" if prec < parent_prec else s
    raise M.ModelError(f"cannot format expression {expr!r}")


def format_stmt(stmt, indent: str = "") -> str:
    if isinstance(stmt, A.Assign):
        return f"{indent}{stmt.name} = {format_expr(stmt.expr)}"
    if isinstance(stmt, A.Send):
        args = ", ".join(format_expr(a) for a in stmt.args)
        return f"{indent}send {stmt.port}.{stmt.message}({args})"
    if isinstance(stmt, A.Reply):
        args = ", ".join(format_expr(a) for a in stmt.args)
        return f"{indent}reply {stmt.message}({args})"
    if isinstance(stmt, A.Log):
        return f"{indent}log {format_expr(stmt.expr)}"
    if isinstance(stmt, A.If):
        lines = [f"{indent}if {format_expr(stmt.cond)} {{"]
        for s in stmt.then:
            lines.append(format_stmt(s, indent + "  "))
        if stmt.orelse:
            lines.append(f"{indent}}} else {{")
            for s in stmt.orelse:
                lines.append(format_stmt(s, indent + "  "))
        lines.append(f"{indent}}}")
        return "\n".join(lines)
    if isinstance(stmt, A.Probe):
        return f'{indent}probe("{stmt.dec_p}")'
    raise M.ModelError(f"cannot format statement {stmt!r}")


def format_block(block: A.ActionBlock, indent: str) -> list[str]:
    lines = []
    for s in block.statements:
        lines.append(format_stmt(s, indent))
    return lines


def _auto_id(hsm: M.Hsm, state: M.State) -> str:
    parts = [state.name]
    cur = hsm.parent(state.id)
    while cur is not None and cur.id != M.ROOT_ID:
        parts.append(cur.name)
        cur = hsm.parent(cur.id)
    return ".".join(reversed(parts))


_KIND_KW = {
    M.INITIAL: "initial", M.CHOICE: "choice", M.JUNCTION: "junction",
    M.ENTRY_POINT: "entrypoint", M.EXIT_POINT: "exitpoint",
}


def _serialize_state(hsm: M.Hsm, s: M.State, out: list[str], indent: str) -> None:
    id_attr = "" if s.id == _auto_id(hsm, s) else f" id={s.id}"
    if s.is_pseudo:
        out.append(f"{indent}{_KIND_KW[s.kind]} {s.name}{id_attr}")
        return
    kw = "state" if s.kind == M.BASIC else "composite"
    header = f"{indent}{kw} {s.name}{id_attr}"
    has_actions = bool(s.entry) or bool(s.exit)
    if s.kind == M.BASIC and not has_actions:
        out.append(header)
        return
    out.append(header + " {")
    inner = indent + "  "
    if s.entry:
        out.append(f"{inner}entry {{")
        out.extend(format_block(s.entry, inner + "  "))
        out.append(f"{inner}}}")
    if s.exit:
        out.append(f"{inner}exit {{")
        out.extend(format_block(s.exit, inner + "  "))
        out.append(f"{inner}}}")
    if s.kind == M.COMPOSITE:
        _serialize_scope(hsm, s.id, out, inner)
    out.append(f"{indent}}}")


def _serialize_scope(hsm: M.Hsm, scope: str, out: list[str], indent: str) -> None:
    for c in hsm.children(scope):
        _serialize_state(hsm, c, out, indent)
    for t in hsm.transitions:
        if hsm.scope_of_transition(t) != scope:
            continue
        line = f"{indent}transition {t.id}: {t.src} -> {t.des}"
        if t.trig:
            line += " on " + ", ".join(str(r) for r in t.trig)
        if t.guard is not None:
            line += f" [{format_expr(t.guard)}]"
        if t.act:
            out.append(line + " / {")
            out.extend(format_block(t.act, indent + "  "))
            out.append(f"{indent}}}")
        else:
            out.append(line)


def serialize_model(model: M.SystemModel) -> str:
    out: list[str] = [f"system {model.name}", ""]
    for iface in model.interfaces:
        out.append(f"interface {iface.name} {{")
        for m, d in iface.entries:
            kw = "in" if d == M.INPUT else "out"
            payload = ", ".join(f"{n}: {t}" for n, t in m.payload)
            out.append(f"  {kw} {m.name}({payload})")
        out.append("}")
        out.append("")
    for comp in model.components:
        level = f" @level {comp.level}" if comp.level else ""
        out.append(f"component {comp.name}{level} {{")
        for p in comp.ports:
            conj = "~" if p.conjugated else ""
            out.append(f"  port {p.name}: {conj}{p.interface}")
        for v in comp.variables:
            init = ""
            if v.init is not None:
                init = " = " + format_expr(A.Lit(v.init))
            out.append(f"  var {v.name}: {v.type}{init}")
        if comp.behavior is not None:
            out.append("  statemachine {")
            _serialize_scope(comp.behavior, M.ROOT_ID, out, "    ")
            out.append("  }")
        out.append("}")
        out.append("")
    for (a, b) in model.connectors:
        out.append(f"connect {a[0]}.{a[1]} -- {b[0]}.{b[1]}")
    return "\n".join(out).rstrip() + "\n"
