"""Parser for the textual modeling language (.pmx files).

Hand-rolled lexer + recursive descent. Every failure is reported with a
line/column position; `parse_model` additionally runs well-formedness
validation and raises if the model is not structurally sound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import actions as A
from . import model as M


class ParseError(M.PmxError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class ValidationFailed(M.PmxError):
    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


PUNCT = ["->", "--", "==", "!=", "<=", ">=", "&&", "||",
         "{", "}", "(", ")", "[", "]", ":", ",", ";", ".", "=",
         "<", ">", "+", "-", "*", "/", "%", "!", "~", "@", "|"]


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | string | punct | eof
    value: object
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(Token("ident", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", int(text[i:j]), start_line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    esc = text[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                elif text[j] == "\n":
                    raise ParseError("unterminated string", start_line, start_col)
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", start_line, start_col)
            toks.append(Token("string", "".join(buf), start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, start_line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", None, line, col))
    return toks


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, kind: str, value=None) -> bool:
        t = self.cur
        return t.kind == kind and (value is None or t.value == value)

    def at_ident(self, word: str) -> bool:
        return self.at("ident", word)

    def accept(self, kind: str, value=None) -> Optional[Token]:
        if self.at(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value=None, what: str = "") -> Token:
        if self.at(kind, value):
            return self.advance()
        t = self.cur
        found = repr(t.value) if t.kind != "eof" else "end of input"
        want = what or (repr(value) if value is not None else kind)
        raise ParseError(f"expected {want}, found {found}", t.line, t.col)

    def error(self, message: str):
        t = self.cur
        raise ParseError(message, t.line, t.col)


# ---------------------------------------------------------------------------
# Expressions (shared with the rule-script language)


def parse_expr(ts: TokenStream, allow_receipt: bool = False):
    return _or_expr(ts, allow_receipt)


def _or_expr(ts, ar):
    left = _and_expr(ts, ar)
    while ts.accept("punct", "||"):
        left = A.Binary("||", left, _and_expr(ts, ar))
    return left


def _and_expr(ts, ar):
    left = _cmp_expr(ts, ar)
    while ts.accept("punct", "&&"):
        left = A.Binary("&&", left, _cmp_expr(ts, ar))
    return left


def _cmp_expr(ts, ar):
    left = _add_expr(ts, ar)
    for op in ("==", "!=", "<=", ">=", "<", ">"):
        if ts.at("punct", op):
            ts.advance()
            return A.Binary(op, left, _add_expr(ts, ar))
    return left


def _add_expr(ts, ar):
    left = _mul_expr(ts, ar)
    while ts.at("punct", "+") or ts.at("punct", "-"):
        op = ts.advance().value
        left = A.Binary(op, left, _mul_expr(ts, ar))
    return left


def _mul_expr(ts, ar):
    left = _unary_expr(ts, ar)
    while ts.at("punct", "*") or ts.at("punct", "/") or ts.at("punct", "%"):
        op = ts.advance().value
        left = A.Binary(op, left, _unary_expr(ts, ar))
    return left


def _unary_expr(ts, ar):
    if ts.at("punct", "!") or ts.at("punct", "-"):
        op = ts.advance().value
        return A.Unary(op, _unary_expr(ts, ar))
    return _primary(ts, ar)


def _primary(ts, ar):
    if ts.at("int"):
        return A.Lit(ts.advance().value)
    if ts.at("string"):
        return A.Lit(ts.advance().value)
    if ts.at_ident("true"):
        ts.advance()
        return A.Lit(True)
    if ts.at_ident("false"):
        ts.advance()
        return A.Lit(False)
    if ts.at_ident("random") and ts.peek().kind == "punct" and ts.peek().value == "(":
        ts.advance()
        ts.expect("punct", "(")
        ts.expect("punct", ")")
        return A.Random()
    if ts.at_ident("receipt") and ts.peek().kind == "punct" and ts.peek().value == "(":
        if not ar:
            ts.error("receipt() is only allowed in rule conditions")
        ts.advance()
        ts.expect("punct", "(")
        name = ts.expect("ident", what="message name").value
        ts.expect("punct", ")")
        return A.Receipt(name)
    if ts.at_ident("payload") and ts.peek().kind == "punct" and ts.peek().value == ".":
        ts.advance()
        ts.expect("punct", ".")
        return A.PayloadRef(ts.expect("ident", what="payload field").value)
    if ts.at("punct", "("):
        ts.advance()
        e = parse_expr(ts, ar)
        ts.expect("punct", ")")
        return e
    if ts.at("ident"):
        return A.Var(ts.advance().value)
    ts.error("expected an expression")


# ---------------------------------------------------------------------------
# Action statements (model action language)


def parse_action_block(ts: TokenStream) -> A.ActionBlock:
    ts.expect("punct", "{")
    stmts = []
    while not ts.at("punct", "}"):
        stmts.append(parse_action_stmt(ts))
        ts.accept("punct", ";")
    ts.expect("punct", "}")
    return A.ActionBlock(tuple(stmts))


def parse_action_stmt(ts: TokenStream):
    if ts.at_ident("send"):
        ts.advance()
        port = ts.expect("ident", what="port name").value
        ts.expect("punct", ".")
        msg = ts.expect("ident", what="message name").value
        args = _parse_args(ts)
        return A.Send(port, msg, args)
    if ts.at_ident("reply"):
        ts.advance()
        msg = ts.expect("ident", what="message name").value
        args = _parse_args(ts) if ts.at("punct", "(") else ()
        return A.Reply(msg, args)
    if ts.at_ident("log"):
        ts.advance()
        return A.Log(parse_expr(ts))
    if ts.at_ident("if"):
        ts.advance()
        cond = parse_expr(ts)
        then = parse_action_block(ts).statements
        orelse: tuple = ()
        if ts.at_ident("else"):
            ts.advance()
            orelse = parse_action_block(ts).statements
        return A.If(cond, then, orelse)
    if ts.at_ident("probe"):
        ts.advance()
        ts.expect("punct", "(")
        dec = ts.expect("string", what="decision point id").value
        ts.expect("punct", ")")
        return A.Probe(dec)
    if ts.at("ident") and ts.peek().kind == "punct" and ts.peek().value == "=":
        name = ts.advance().value
        ts.advance()
        return A.Assign(name, parse_expr(ts))
    ts.error("expected a statement")


def _parse_args(ts: TokenStream) -> tuple:
    ts.expect("punct", "(")
    args = []
    if not ts.at("punct", ")"):
        args.append(parse_expr(ts))
        while ts.accept("punct", ","):
            args.append(parse_expr(ts))
    ts.expect("punct", ")")
    return tuple(args)


# ---------------------------------------------------------------------------
# Model grammar


_PSEUDO_KW = {
    "initial": M.INITIAL,
    "choice": M.CHOICE,
    "junction": M.JUNCTION,
    "entrypoint": M.ENTRY_POINT,
    "exitpoint": M.EXIT_POINT,
}

_SM_KEYWORDS = {"state", "composite", "transition"} | set(_PSEUDO_KW)


@dataclass
class _RawTrig:
    port: Optional[str]
    message: str
    line: int
    col: int


@dataclass
class _RawTransition:
    name: str
    src: str
    des: str
    trig: list[_RawTrig]
    guard: object
    act: object
    line: int
    col: int


class _ModelParser:
    def __init__(self, text: str):
        self.ts = TokenStream(tokenize(text))

    def parse(self) -> M.SystemModel:
        ts = self.ts
        ts.expect("ident", "system")
        name = ts.expect("ident", what="system name").value
        model = M.SystemModel(name=name)
        self.raw_transitions: list[tuple[M.Component, M.Hsm, str, _RawTransition]] = []
        self.state_locs: dict[tuple[str, str], tuple[int, int]] = {}
        while not ts.at("eof"):
            if ts.at_ident("interface"):
                model.interfaces.append(self._interface())
            elif ts.at_ident("component"):
                model.components.append(self._component(model))
            elif ts.at_ident("connect"):
                model.connectors.append(self._connect())
            else:
                ts.error("expected interface, component or connect")
        self._resolve(model)
        return model

    def _interface(self) -> M.Interface:
        ts = self.ts
        ts.advance()
        iface = M.Interface(name=ts.expect("ident", what="interface name").value)
        ts.expect("punct", "{")
        while not ts.at("punct", "}"):
            if ts.at_ident("in") or ts.at_ident("out"):
                direction = M.INPUT if ts.advance().value == "in" else M.OUTPUT
            else:
                ts.error("expected 'in' or 'out'")
            mname = ts.expect("ident", what="message name").value
            payload = []
            ts.expect("punct", "(")
            if not ts.at("punct", ")"):
                payload.append(self._param())
                while ts.accept("punct", ","):
                    payload.append(self._param())
            ts.expect("punct", ")")
            iface.entries.append((M.MessageDecl(mname, tuple(payload)), direction))
        ts.expect("punct", "}")
        return iface

    def _param(self) -> tuple[str, str]:
        ts = self.ts
        pname = ts.expect("ident", what="payload field").value
        ts.expect("punct", ":")
        ptype = ts.expect("ident", what="type").value
        return (pname, ptype)

    def _component(self, model: M.SystemModel) -> M.Component:
        ts = self.ts
        ts.advance()
        comp = M.Component(name=ts.expect("ident", what="component name").value)
        if ts.accept("punct", "@"):
            ts.expect("ident", "level")
            comp.level = ts.expect("ident", what="completeness level").value
        ts.expect("punct", "{")
        while not ts.at("punct", "}"):
            if ts.at_ident("port"):
                ts.advance()
                pname = ts.expect("ident", what="port name").value
                ts.expect("punct", ":")
                conj = ts.accept("punct", "~") is not None
                iname = ts.expect("ident", what="interface name").value
                comp.ports.append(M.Port(pname, iname, conj))
            elif ts.at_ident("var"):
                ts.advance()
                vname = ts.expect("ident", what="variable name").value
                ts.expect("punct", ":")
                vtype = ts.expect("ident", what="type").value
                init = None
                if ts.accept("punct", "="):
                    init = self._literal()
                comp.variables.append(M.Variable(vname, vtype, init))
            elif ts.at_ident("statemachine"):
                ts.advance()
                hsm = M.Hsm()
                ts.expect("punct", "{")
                self._sm_body(comp, hsm, M.ROOT_ID, "")
                ts.expect("punct", "}")
                comp.behavior = hsm
            else:
                ts.error("expected port, var or statemachine")
        ts.expect("punct", "}")
        return comp

    def _literal(self):
        ts = self.ts
        neg = ts.accept("punct", "-") is not None
        if ts.at("int"):
            v = ts.advance().value
            return -v if neg else v
        if neg:
            ts.error("expected an integer")
        if ts.at("string"):
            return ts.advance().value
        if ts.at_ident("true"):
            ts.advance()
            return True
        if ts.at_ident("false"):
            ts.advance()
            return False
        ts.error("expected a literal")

    def _qid(self) -> str:
        ts = self.ts
        parts = [ts.expect("ident", what="identifier").value]
        while ts.at("punct", ".") and ts.peek().kind == "ident":
            ts.advance()
            parts.append(ts.advance().value)
        return ".".join(parts)

    def _opt_id(self) -> Optional[str]:
        ts = self.ts
        if ts.at_ident("id") and ts.peek().kind == "punct" and ts.peek().value == "=":
            ts.advance()
            ts.advance()
            return self._qid()
        return None

    def _sm_body(self, comp: M.Component, hsm: M.Hsm, parent_id: str, path: str) -> None:
        ts = self.ts
        while not ts.at("punct", "}"):
            tok = ts.cur
            if ts.at_ident("state"):
                ts.advance()
                self._state(comp, hsm, parent_id, path, M.BASIC, tok)
            elif ts.at_ident("composite"):
                ts.advance()
                self._state(comp, hsm, parent_id, path, M.COMPOSITE, tok)
            elif tok.kind == "ident" and tok.value in _PSEUDO_KW:
                ts.advance()
                name = ts.expect("ident", what="state name").value
                sid = self._opt_id() or (f"{path}{name}")
                self._add_state(hsm, M.State(sid, name, _PSEUDO_KW[tok.value], parent=parent_id), tok)
            elif ts.at_ident("transition"):
                ts.advance()
                self._transition(comp, hsm, parent_id, tok)
            else:
                ts.error("expected a state, pseudo-state or transition")

    def _add_state(self, hsm: M.Hsm, state: M.State, tok: Token) -> None:
        try:
            hsm.add_state(state)
        except M.ModelError as e:
            raise ParseError(str(e), tok.line, tok.col) from None

    def _state(self, comp, hsm, parent_id, path, kind, tok) -> None:
        ts = self.ts
        name = ts.expect("ident", what="state name").value
        if name == M.ROOT_ID:
            raise ParseError("'root' is a reserved state name", tok.line, tok.col)
        sid = self._opt_id() or (f"{path}{name}")
        st = M.State(sid, name, kind, parent=parent_id)
        self._add_state(hsm, st, tok)
        if kind == M.BASIC:
            if ts.accept("punct", "{"):
                self._entry_exit(st)
                ts.expect("punct", "}")
            return
        ts.expect("punct", "{")
        self._entry_exit(st)
        self._sm_body(comp, hsm, sid, f"{path}{name}.")
        ts.expect("punct", "}")

    def _entry_exit(self, st: M.State) -> None:
        ts = self.ts
        while True:
            if ts.at_ident("entry") and ts.peek().kind == "punct" and ts.peek().value == "{":
                ts.advance()
                st.entry = parse_action_block(ts)
            elif ts.at_ident("exit") and ts.peek().kind == "punct" and ts.peek().value == "{":
                ts.advance()
                st.exit = parse_action_block(ts)
            else:
                return

    def _transition(self, comp, hsm, parent_id, tok) -> None:
        ts = self.ts
        name = ts.expect("ident", what="transition name").value
        ts.expect("punct", ":")
        src = self._qid()
        ts.expect("punct", "->")
        des = self._qid()
        trig: list[_RawTrig] = []
        if ts.at_ident("on"):
            ts.advance()
            trig.append(self._trig())
            while ts.accept("punct", ","):
                trig.append(self._trig())
        guard = None
        if ts.accept("punct", "["):
            guard = parse_expr(ts)
            ts.expect("punct", "]")
        act = None
        if ts.accept("punct", "/"):
            act = parse_action_block(ts)
        raw = _RawTransition(name, src, des, trig, guard, act, tok.line, tok.col)
        self.raw_transitions.append((comp, hsm, parent_id, raw))

    def _trig(self) -> _RawTrig:
        ts = self.ts
        tok = ts.cur
        first = ts.expect("ident", what="trigger").value
        if ts.at("punct", ".") and ts.peek().kind == "ident":
            ts.advance()
            second = ts.advance().value
            return _RawTrig(first, second, tok.line, tok.col)
        return _RawTrig(None, first, tok.line, tok.col)

    def _connect(self) -> tuple:
        ts = self.ts
        ts.advance()
        c1 = ts.expect("ident", what="component name").value
        ts.expect("punct", ".")
        p1 = ts.expect("ident", what="port name").value
        ts.expect("punct", "--")
        c2 = ts.expect("ident", what="component name").value
        ts.expect("punct", ".")
        p2 = ts.expect("ident", what="port name").value
        return ((c1, p1), (c2, p2))

    # -- resolution ---------------------------------------------------------

    def _resolve(self, model: M.SystemModel) -> None:
        for comp, hsm, parent_id, raw in self.raw_transitions:
            src = self._resolve_state(hsm, parent_id, raw.src, raw)
            des = self._resolve_state(hsm, parent_id, raw.des, raw)
            trig = tuple(self._resolve_trig(model, comp, rt) for rt in raw.trig)
            hsm.add_transition(M.Transition(raw.name, src, des, trig, raw.guard, raw.act))

    def _resolve_state(self, hsm: M.Hsm, scope: str, ref: str, raw: _RawTransition) -> str:
        if ref in hsm.states and ref != M.ROOT_ID:
            return ref
        # direct child of the declaring scope by name
        for c in hsm.children(scope):
            if c.name == ref:
                return c.id
        # dotted descent through composite children (entry/exit point hops)
        if "." in ref:
            head, rest = ref.split(".", 1)
            for c in hsm.children(scope):
                if c.name == head and c.kind == M.COMPOSITE:
                    for g in hsm.children(c.id):
                        if g.name == rest or g.id == rest:
                            return g.id
        raise ParseError(f"unresolved state reference {ref!r}", raw.line, raw.col)

    def _resolve_trig(self, model: M.SystemModel, comp: M.Component, rt: _RawTrig) -> M.MsgRef:
        candidates = []
        for p in comp.ports:
            if rt.port is not None and p.name != rt.port:
                continue
            iface = model.interface(p.interface)
            if iface is None:
                continue
            for m in M.port_messages(model, comp, p, M.INPUT):
                if m.name == rt.message:
                    candidates.append(M.MsgRef(p.name, m.name))
        if not candidates:
            raise ParseError(
                f"unresolved trigger {rt.message!r} (no input-direction match on the component's ports)",
                rt.line, rt.col)
        if len(candidates) > 1:
            raise ParseError(
                f"ambiguous trigger {rt.message!r}: matches {', '.join(map(str, candidates))}",
                rt.line, rt.col)
        return candidates[0]


def parse_model_text(text: str) -> M.SystemModel:
    """Parse without validating (used by tooling that tolerates partial input)."""
    if not text.strip():
        raise ParseError("empty input", 1, 1)
    return _ModelParser(text).parse()


def parse_model(text: str) -> M.SystemModel:
    """Parse and validate; raises ParseError or ValidationFailed."""
    model = parse_model_text(text)
    violations = M.validate(model)
    if violations:
        raise ValidationFailed(violations)
    return model


def parse_model_file(path: str) -> M.SystemModel:
    with open(path, "r", encoding="utf-8") as f:
        return parse_model(f.read())
