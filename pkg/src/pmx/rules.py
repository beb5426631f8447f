"""The execution-rule script language.

Covers rule parsing (headers eagerly, bodies lazily, mirroring the loading
strategy the probe uses so ten-thousand-rule scripts stay cheap), the
four-tier where-matching with file order inside each tier, default-rule
generation with the three filtering heuristics, saving interactive decisions
as rules, and applying a rule back into the design model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from . import actions as A
from . import model as M
from .analysis import AnalysisReport, ComponentReport
from .parser import ParseError, TokenStream, parse_expr, tokenize
from .printer import format_expr
from .refine import RefinementMetadata


class RuleError(M.PmxError):
    pass


class MultiStateSelection(RuleError):
    """A rule selecting several states cannot be saved into the model."""


class NonConcreteWhere(RuleError):
    """Only rules whose `where` names one concrete state can be saved."""


class WouldViolateWellFormedness(RuleError):
    pass


# -- script statements (superset of the session's command vocabulary) --------


@dataclass(frozen=True)
class SendCmd:
    message: str
    args: tuple = ()
    port: Optional[str] = None


@dataclass(frozen=True)
class ReplyCmd:
    message: Optional[str]  # None means `reply random`
    args: tuple = ()


@dataclass(frozen=True)
class InjectCmd:
    component: str
    message: Optional[str] = None  # defaults to dbg


@dataclass(frozen=True)
class SelectTarget:
    name: str
    using: Optional[str] = None


@dataclass(frozen=True)
class Select:
    targets: tuple[SelectTarget, ...] = ()
    random: bool = False


@dataclass(frozen=True)
class ExprStmt:
    expr: object


@dataclass
class RuleHeader:
    name: str
    component: Optional[str]  # None acts as '*'
    state: Optional[str]
    when: Optional[object] = None

    def where_text(self) -> str:
        if self.component and self.state:
            return f"{self.component}.{self.state}"
        if self.state:
            return f"state {self.state}"
        if self.component:
            return f"component {self.component}"
        return "component *"


@dataclass
class ExecutionRule:
    header: RuleHeader
    body_text: str
    _body: Optional[tuple] = None

    def body(self) -> tuple:
        """Parse the body on first use; a select terminates it."""
        if self._body is None:
            try:
                stmts = parse_script_statements(self.body_text)
            except ParseError as e:
                raise RuleError(f"rule {self.header.name}: {e}") from None
            cut = []
            for s in stmts:
                cut.append(s)
                if isinstance(s, Select):
                    break
            self._body = tuple(cut)
        return self._body

    def select(self) -> Optional[Select]:
        for s in self.body():
            if isinstance(s, Select):
                return s
        return None

    def key(self) -> tuple:
        when = format_expr(self.header.when) if self.header.when is not None else None
        return (self.header.name, self.header.component, self.header.state, when, self.body())


@dataclass
class RuleSet:
    rules: list[ExecutionRule] = field(default_factory=list)
    source: str = "<memory>"
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._tiers: Optional[tuple] = None

    def rule(self, name: str) -> Optional[ExecutionRule]:
        for r in self.rules:
            if r.header.name == name:
                return r
        return None

    def tiers(self):
        if self._tiers is None:
            exact: dict[tuple[str, str], list] = {}
            by_state: dict[str, list] = {}
            by_comp: dict[str, list] = {}
            wildcard: list = []
            for r in self.rules:
                h = r.header
                if h.component and h.state:
                    exact.setdefault((h.component, h.state), []).append(r)
                elif h.state:
                    by_state.setdefault(h.state, []).append(r)
                elif h.component:
                    by_comp.setdefault(h.component, []).append(r)
                else:
                    wildcard.append(r)
            self._tiers = (exact, by_state, by_comp, wildcard)
        return self._tiers

    def equivalent(self, other: "RuleSet") -> bool:
        return [r.key() for r in self.rules] == [r.key() for r in other.rules]


# ---------------------------------------------------------------------------
# Parsing


_WS_RE = re.compile(r"(?:\s+|#[^\n]*)+")


def _skip_ws(text: str, pos: int) -> int:
    m = _WS_RE.match(text, pos)
    return m.end() if m else pos


def _match_body(text: str, open_pos: int) -> int:
    """Index just past the brace matching text[open_pos] == '{'.

    Jump-scans between interesting characters; lookups are bounded by the
    next closing brace so huge scripts load in linear time.
    """
    depth = 0
    i = open_pos
    n = len(text)
    while i < n:
        c = text[i]
        if c == "{":
            depth += 1
            i += 1
        elif c == "}":
            depth -= 1
            i += 1
            if depth == 0:
                return i
        elif c == '"':
            j = text.find('"', i + 1)
            while j != -1 and text[j - 1] == "\\":
                j = text.find('"', j + 1)
            if j == -1:
                raise RuleError(f"unterminated string in rule body near offset {i}")
            i = j + 1
        elif c == "#":
            j = text.find("\n", i)
            i = n if j == -1 else j + 1
        else:
            close = text.find("}", i)
            if close == -1:
                break
            nxt = [k for k in (text.find("{", i, close), text.find('"', i, close),
                               text.find("#", i, close)) if k != -1]
            i = min(nxt) if nxt else close
    raise RuleError("unbalanced braces in rule body")


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _parse_header(fragment: str, line_fn) -> RuleHeader:
    ts = TokenStream(tokenize(fragment))
    try:
        ts.expect("ident", "rule")
        name = ts.expect("ident", what="rule name").value
        ts.expect("ident", "where")
        paren = ts.accept("punct", "(") is not None
        component: Optional[str] = None
        state: Optional[str] = None
        if ts.at_ident("state"):
            ts.advance()
            state = None if ts.accept("punct", "*") else ts.expect("ident", what="state name").value
        elif ts.at_ident("component"):
            ts.advance()
            component = None if ts.accept("punct", "*") else ts.expect("ident", what="component name").value
            if ts.accept("punct", "."):
                state = None if ts.accept("punct", "*") else ts.expect("ident", what="state name").value
        elif ts.accept("punct", "*"):
            if ts.accept("punct", "."):
                state = None if ts.accept("punct", "*") else ts.expect("ident", what="state name").value
        else:
            component = ts.expect("ident", what="where clause").value
            if ts.accept("punct", "."):
                state = None if ts.accept("punct", "*") else ts.expect("ident", what="state name").value
        if paren:
            ts.expect("punct", ")")
        when = None
        if ts.at_ident("when"):
            ts.advance()
            paren = ts.accept("punct", "(") is not None
            when = parse_expr(ts, allow_receipt=True)
            if paren:
                ts.expect("punct", ")")
        ts.expect("eof")
        return RuleHeader(name, component, state, when)
    except ParseError as e:
        raise RuleError(f"rule header at line {line_fn()}: {e.message}") from None


def parse_rules(text: str, source: str = "<memory>") -> RuleSet:
    """Parse a rule script. Headers are parsed now, bodies on first use.

    Duplicate rule names are kept (first wins on lookup) with a warning.
    """
    rs = RuleSet(source=source)
    pos = _skip_ws(text, 0)
    n = len(text)
    seen: set[str] = set()
    while pos < n:
        at = pos
        if not text.startswith("rule", pos):
            raise RuleError(f"line {_line_of(text, pos)}: expected 'rule'")
        brace = text.find("{", pos)
        if brace == -1:
            raise RuleError(f"line {_line_of(text, pos)}: rule without a body")
        header = _parse_header(text[pos:brace], lambda: _line_of(text, at))
        end = _match_body(text, brace)
        body_text = text[brace + 1:end - 1]
        if header.name in seen:
            rs.warnings.append(f"duplicate rule name {header.name!r}; first definition wins")
        seen.add(header.name)
        rs.rules.append(ExecutionRule(header, body_text))
        pos = _skip_ws(text, end)
    return rs


_STMT_KEYWORDS = frozenset({"select", "send", "reply", "inject", "log", "if",
                            "continue", "quit", "view", "save", "visited"})


def parse_script_statements(text: str) -> tuple:
    ts = TokenStream(tokenize(text))
    stmts = []
    while not ts.at("eof"):
        stmts.append(parse_script_statement(ts))
        ts.accept("punct", ";")
    return tuple(stmts)


def parse_script_statement(ts: TokenStream):
    if ts.at_ident("select"):
        ts.advance()
        ts.expect("ident", "state")
        if ts.at_ident("random") and not (ts.peek().kind == "punct" and ts.peek().value in (".", "|")):
            ts.advance()
            return Select(random=True)
        targets = [_select_target(ts)]
        while ts.accept("punct", "|"):
            targets.append(_select_target(ts))
        return Select(tuple(targets))
    if ts.at_ident("send"):
        ts.advance()
        port = None
        if ts.at("ident") and not ts.at_ident("message"):
            port = ts.advance().value
        ts.expect("ident", "message")
        msg = ts.expect("ident", what="message name").value
        args = _cmd_args(ts)
        return SendCmd(msg, args, port)
    if ts.at_ident("reply"):
        ts.advance()
        if ts.at_ident("random"):
            ts.advance()
            return ReplyCmd(None)
        msg = ts.expect("ident", what="message name").value
        return ReplyCmd(msg, _cmd_args(ts))
    if ts.at_ident("inject"):
        ts.advance()
        comp = ts.expect("ident", what="component name").value
        msg = None
        if ts.at("ident") and ts.cur.value not in _STMT_KEYWORDS:
            msg = ts.advance().value
        return InjectCmd(comp, msg)
    if ts.at_ident("log"):
        ts.advance()
        return A.Log(parse_expr(ts, allow_receipt=True))
    if ts.at_ident("if"):
        ts.advance()
        cond = parse_expr(ts, allow_receipt=True)
        ts.expect("punct", "{")
        then = []
        while not ts.at("punct", "}"):
            then.append(parse_script_statement(ts))
            ts.accept("punct", ";")
        ts.expect("punct", "}")
        orelse = []
        if ts.at_ident("else"):
            ts.advance()
            ts.expect("punct", "{")
            while not ts.at("punct", "}"):
                orelse.append(parse_script_statement(ts))
                ts.accept("punct", ";")
            ts.expect("punct", "}")
        return A.If(cond, tuple(then), tuple(orelse))
    if ts.at("ident") and ts.peek().kind == "punct" and ts.peek().value == "=":
        name = ts.advance().value
        ts.advance()
        return A.Assign(name, parse_expr(ts, allow_receipt=True))
    return ExprStmt(parse_expr(ts, allow_receipt=True))


def _select_target(ts: TokenStream) -> SelectTarget:
    name = ts.expect("ident", what="state name").value
    using = None
    if ts.at_ident("using"):
        ts.advance()
        parts = [ts.expect("ident", what="transition id").value]
        while ts.at("punct", ".") and ts.peek().kind == "ident":
            ts.advance()
            parts.append(ts.advance().value)
        using = ".".join(parts)
    return SelectTarget(name, using)


def _cmd_args(ts: TokenStream) -> tuple:
    if not ts.at("punct", "("):
        return ()
    ts.advance()
    args = []
    if not ts.at("punct", ")"):
        args.append(parse_expr(ts, allow_receipt=True))
        while ts.accept("punct", ","):
            args.append(parse_expr(ts, allow_receipt=True))
    ts.expect("punct", ")")
    return tuple(args)


# ---------------------------------------------------------------------------
# Serialization


def format_script_stmt(s, indent: str = "  ") -> str:
    if isinstance(s, Select):
        if s.random:
            return f"{indent}select state random"
        parts = []
        for t in s.targets:
            parts.append(f"{t.name} using {t.using}" if t.using else t.name)
        return f"{indent}select state " + "|".join(parts)
    if isinstance(s, SendCmd):
        port = f" {s.port}" if s.port else ""
        args = "(" + ", ".join(format_expr(a) for a in s.args) + ")" if s.args else ""
        return f"{indent}send{port} message {s.message}{args}"
    if isinstance(s, ReplyCmd):
        if s.message is None:
            return f"{indent}reply random"
        args = "(" + ", ".join(format_expr(a) for a in s.args) + ")" if s.args else ""
        return f"{indent}reply {s.message}{args}"
    if isinstance(s, InjectCmd):
        return f"{indent}inject {s.component}" + (f" {s.message}" if s.message else "")
    if isinstance(s, A.Assign):
        return f"{indent}{s.name} = {format_expr(s.expr)}"
    if isinstance(s, A.Log):
        return f"{indent}log {format_expr(s.expr)}"
    if isinstance(s, ExprStmt):
        return f"{indent}{format_expr(s.expr)}"
    if isinstance(s, A.If):
        lines = [f"{indent}if {format_expr(s.cond)} {{"]
        for x in s.then:
            lines.append(format_script_stmt(x, indent + "  "))
        if s.orelse:
            lines.append(f"{indent}}} else {{")
            for x in s.orelse:
                lines.append(format_script_stmt(x, indent + "  "))
        lines.append(f"{indent}}}")
        return "\n".join(lines)
    raise RuleError(f"cannot format statement {s!r}")


def serialize_rules(rs: RuleSet) -> str:
    out = []
    for r in rs.rules:
        h = r.header
        when = f" when ({format_expr(h.when)})" if h.when is not None else ""
        out.append(f"rule {h.name} where ({h.where_text()}){when} {{")
        for s in r.body():
            out.append(format_script_stmt(s))
        out.append("}")
    return "\n".join(out) + "\n"


def make_rule(name: str, component: Optional[str], state: Optional[str],
              when, body_stmts: tuple) -> ExecutionRule:
    r = ExecutionRule(RuleHeader(name, component, state, when), body_text="")
    r._body = tuple(body_stmts)
    r.body_text = "\n".join(format_script_stmt(s, "") for s in r._body)
    return r


# ---------------------------------------------------------------------------
# Selection (the five steps)


def _when_holds(rule: ExecutionRule, env: dict, last_message: Optional[str],
                warnings: Optional[list] = None) -> bool:
    if rule.header.when is None:
        return True
    try:
        ctx = A.ExecContext(last_message=last_message)
        return bool(A.eval_guard(env, rule.header.when, ctx))
    except A.ActionError as e:
        if warnings is not None:
            warnings.append(f"rule {rule.header.name}: condition error: {e}")
        return False


def select_rule(rs: RuleSet, component: str, state_name: str,
                last_message: Optional[str], env: dict,
                warnings: Optional[list] = None) -> Optional[ExecutionRule]:
    """First matching rule by tier (c.s, *.s, c.*, *.*), file order within a
    tier; a rule matches when its condition evaluates to true."""
    exact, by_state, by_comp, wildcard = rs.tiers()
    for candidates in (exact.get((component, state_name), ()),
                       by_state.get(state_name, ()),
                       by_comp.get(component, ()),
                       wildcard):
        for r in candidates:
            # bodies stay unparsed here; a syntax error in the winning body
            # surfaces at execution time and downgrades to interactive mode
            if _when_holds(r, env, last_message, warnings):
                return r
    return None


# ---------------------------------------------------------------------------
# Default-rule generation (the three filtering heuristics)


def _flattened_option_names(options) -> list[str]:
    """Selectable names: boundary hops are shown as where they lead."""
    names: list[str] = []
    for o in options:
        shown = list(o.hop_targets) if o.hop_targets else [o.destination_name]
        for n in shown:
            if n not in names:
                names.append(n)
    return names


def _gen_rule_body(options, where_state_id: str, when_message: Optional[str],
                   crep: ComponentReport, hsm: M.Hsm) -> tuple:
    """Filter the decision point's options down to the likeliest fixes."""
    chosen = list(options)
    p9 = set(crep.p9)
    p10 = set(crep.p10)

    def org_des(o):
        return hsm.transition(o.org).des if o.org else None

    if where_state_id in crep.p6:
        # the user already decided how the choice's own targets are reached
        already = {hsm.transition(t.id).des for t in hsm.out_t(where_state_id)
                   if not t.id.startswith(M.PMX_PREFIX)}
        chosen = [o for o in chosen if o.destination not in already]
    elif when_message is not None and when_message in {r.message for r in crep.p5.get(where_state_id, [])}:
        tmp = [o for o in chosen if o.org in p10 and org_des(o) in p9]
        if not tmp:
            tmp = [o for o in chosen if o.org in p10]
        if not tmp:
            tmp = [o for o in chosen if o.destination in p9]
        chosen = tmp
    elif where_state_id in crep.p3:
        tmp = [o for o in chosen if o.destination in p9]
        chosen = tmp
    if not chosen:
        chosen = list(options)

    if len(chosen) == 1 and not chosen[0].hop_targets:
        o = chosen[0]
        return (Select((SelectTarget(o.destination_name, o.org),)),)
    names = _flattened_option_names(chosen)
    return (Select(tuple(SelectTarget(n) for n in names)),)


def generate_default_rules(refined: M.SystemModel, metadata: RefinementMetadata,
                           report: AnalysisReport) -> RuleSet:
    """One rule per (transition into a decision point, triggering message),
    skipping boundary hops and the reserved debug message; trigger-less
    sources get a single unconditional rule."""
    from .runtime import build_options

    rs = RuleSet(source="<generated>")
    n = 0
    for comp in refined.components:
        hr = metadata.components.get(comp.name)
        if hr is None or comp.behavior is None:
            continue
        hsm = comp.behavior
        crep = report.components.get(comp.name) or ComponentReport(level=M.PARTIAL)
        for dec_id in hr.dec_points.values():
            options = build_options(hsm, dec_id)
            for t in hsm.in_t(dec_id):
                src = hsm.state(t.src)
                if src.kind in (M.ENTRY_POINT, M.EXIT_POINT) and src.id in hr.added:
                    continue
                # refinement-added sources get a component-qualified where so the
                # generated machines of different components cannot cross-match
                where_comp = comp.name if src.id in hr.added else None
                messages = [r.message for r in t.trig if r.message != M.DBG_MESSAGE]
                if not messages:
                    n += 1
                    body = _gen_rule_body(options, src.id, None, crep, hsm)
                    rs.rules.append(make_rule(f"r{n}", where_comp, src.name, None, body))
                    continue
                for msg in messages:
                    n += 1
                    body = _gen_rule_body(options, src.id, msg, crep, hsm)
                    rs.rules.append(make_rule(f"r{n}", where_comp, src.name, A.Receipt(msg), body))
    return rs


# ---------------------------------------------------------------------------
# Saving decisions as rules


def save_decisions_as_rules(records, resolver=None) -> tuple[RuleSet, list[str]]:
    """One rule per distinct (component, state, message) context.

    Conflicting decisions for the same context are resolved by `resolver`
    (called with the list of conflicting records, returns the one to keep);
    the default keeps the latest. The where is the bare state name unless the
    name occurs in several components' records. Returns the rules plus
    conflict notes.
    """
    groups: dict[tuple[str, str, Optional[str]], list] = {}
    order: list[tuple[str, str, Optional[str]]] = []
    state_owners: dict[str, set[str]] = {}
    for rec in records:
        key = (rec.context.component, rec.context.state_name, rec.context.last_message)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec)
        state_owners.setdefault(rec.context.state_name, set()).add(rec.context.component)

    conflicts: list[str] = []
    rs = RuleSet(source="<saved>")
    n = 0
    for key in order:
        comp, state, msg = key
        recs = groups[key]
        distinct = {r.select_text for r in recs}
        chosen = recs[-1]
        if len(distinct) > 1:
            if resolver is not None:
                chosen = resolver(recs)
            conflicts.append(
                f"context ({comp}.{state}, message={msg}) has {len(distinct)} "
                f"different decisions; kept record {chosen.id}")
        n += 1
        stmts = []
        for cmd in chosen.commands:
            stmts.extend(parse_script_statements(cmd))
        stmts.extend(parse_script_statements(chosen.select_text))
        when = A.Receipt(msg) if msg else None
        where_comp = comp if len(state_owners[state]) > 1 else None
        rs.rules.append(make_rule(f"r{n}", where_comp, state, when, tuple(stmts)))
    return rs, conflicts


# ---------------------------------------------------------------------------
# Applying a rule into the design model


def _receipt_split(when) -> tuple[list[str], Optional[object]]:
    """Receipt terms of a top-level conjunction, and what is left of it."""
    if when is None:
        return [], None
    if isinstance(when, A.Receipt):
        return [when.message], None
    if isinstance(when, A.Binary) and when.op == "&&":
        lr, lg = _receipt_split(when.left)
        rr, rg = _receipt_split(when.right)
        rest = lg if rg is None else (rg if lg is None else A.Binary("&&", lg, rg))
        return lr + rr, rest
    return [], when


def _script_to_actions(model: M.SystemModel, comp: M.Component, stmts) -> tuple:
    out = []
    for s in stmts:
        if isinstance(s, Select):
            continue
        if isinstance(s, (A.Assign, A.Log, A.If)):
            out.append(s)
        elif isinstance(s, SendCmd):
            port = s.port
            if port is None:
                cands = sorted({r.port for r in M.outp(model, comp) if r.message == s.message})
                if len(cands) != 1:
                    raise WouldViolateWellFormedness(
                        f"cannot resolve a unique port for send {s.message!r}")
                port = cands[0]
            out.append(A.Send(port, s.message, s.args))
        elif isinstance(s, ReplyCmd):
            if s.message is None:
                raise WouldViolateWellFormedness("reply random cannot be saved into the model")
            out.append(A.Reply(s.message, s.args))
        else:
            raise WouldViolateWellFormedness(f"statement cannot be saved into the model: {s!r}")
    return tuple(out)


def _fresh_id(hsm: M.Hsm, base: str) -> str:
    n = 1
    while f"{base}{n}" in hsm.states or hsm.has_transition(f"{base}{n}"):
        n += 1
    return f"{base}{n}"


def add_trans_smart(hsm: M.Hsm, src: str, des: str, tid: str) -> M.Transition:
    """Create src->des, inserting entry/exit-point hops when the two states
    live in different scopes; returns the first transition of the chain."""
    chain_src = [src] + [s.id for s in hsm.parents(src)]
    chain_des = [des] + [s.id for s in hsm.parents(des)]
    common = next(s for s in chain_src if s in chain_des)
    ups = chain_src[:chain_src.index(common)]       # src and composites to exit
    downs = chain_des[:chain_des.index(common)][1:]  # composites to enter, outermost last
    cur = src
    first: Optional[M.Transition] = None
    counter = 0

    def add(a, b):
        nonlocal first, counter
        counter += 1
        t = hsm.add_transition(M.Transition(tid if first is None else f"{tid}_h{counter}", a, b))
        if first is None:
            first = t
        return t

    for comp_id in ups[1:]:  # exit each composite strictly below the common scope
        ex = hsm.add_state(M.State(_fresh_id(hsm, f"ex_{comp_id}_"), f"ex_{counter}",
                                   M.EXIT_POINT, parent=comp_id))
        add(cur, ex.id)
        cur = ex.id
    for comp_id in reversed(downs):
        en = hsm.add_state(M.State(_fresh_id(hsm, f"en_{comp_id}_"), f"en_{counter}",
                                   M.ENTRY_POINT, parent=comp_id))
        add(cur, en.id)
        cur = en.id
    add(cur, des)
    return first


def apply_rule_to_model(model: M.SystemModel, component: str, rule: ExecutionRule,
                        report: AnalysisReport, metadata: Optional[RefinementMetadata] = None
                        ) -> M.Transition:
    """Fix the partialness a rule addresses directly in the design model.

    Requires a single selected state and a concrete `where` state. Reuses the
    selected not-takeable transition when the rule names one; otherwise adds
    a transition (with boundary hops if scopes differ).
    """
    comp = model.component(component)
    hsm = comp.behavior
    if hsm is None:
        raise NonConcreteWhere(f"component {component!r} has no state machine")
    sel = rule.select()
    if sel is None or sel.random:
        raise MultiStateSelection(f"rule {rule.header.name!r} does not select a concrete state")
    names = []
    for t in sel.targets:
        if t.name not in names:
            names.append(t.name)
    if len(names) != 1:
        raise MultiStateSelection(
            f"rule {rule.header.name!r} selects {len(names)} states; applying it would "
            f"make the model non-deterministic")
    if rule.header.state is None:
        raise NonConcreteWhere(f"rule {rule.header.name!r} has no concrete where-state")

    src = hsm.state_by_name(rule.header.state)
    if src is None:
        raise NonConcreteWhere(f"where-state {rule.header.state!r} not found in {component}")
    des = hsm.state_by_name(names[0])
    if des is None:
        raise WouldViolateWellFormedness(f"selected state {names[0]!r} not found in {component}")

    crep = report.components.get(component) or ComponentReport(level=M.PARTIAL)
    receipts, guard = _receipt_split(rule.header.when)
    using = next((t.using for t in sel.targets if t.using), None)
    if metadata is not None and using is not None:
        using = metadata.org(using, component) or using

    if using is not None and using in crep.p10 and hsm.has_transition(using):
        t = hsm.transition(using)
    else:
        t = add_trans_smart(hsm, src.id, des.id, _fresh_id(hsm, "t_rule"))

    body_actions = _script_to_actions(model, comp, rule.body())
    if body_actions:
        t.act = A.ActionBlock(body_actions + (t.act.statements if t.act else ()))

    trig = []
    for msg in receipts:
        cands = [r for r in M.inp(model, comp) if r.message == msg]
        if not cands:
            raise WouldViolateWellFormedness(f"{component} cannot receive {msg!r}")
        trig.append(cands[0])
    if trig:
        t.trig = tuple(trig)
    if guard is not None:
        t.guard = guard
    if src.id in crep.p6:
        # negation of the disjunction of the *other* outgoing guards
        outs = [x for x in hsm.out_t(src.id) if x.id != t.id]
        disj = None
        for x in outs:
            g = x.guard if x.guard is not None else A.Lit(True)
            disj = g if disj is None else A.Binary("||", disj, g)
        others = A.Lit(True) if disj is None else A.Unary("!", disj)
        t.guard = others if t.guard is None else A.Binary("&&", t.guard, others)

    violations = M.validate(model)
    if violations:
        raise WouldViolateWellFormedness("; ".join(str(v) for v in violations))
    return t
