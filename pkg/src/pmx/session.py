"""Interactive steering: the command processor that runs while execution sits
at a decision point, the batch (rule-driven) input provider with interactive
fallback, and the capture of decisions as execution records.

A session serves exactly one system run; the run loop blocks inside
provide_input until a selection is made.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import actions as A
from . import model as M
from . import rules as R
from .analysis import AnalysisReport, analyze
from .runtime import ExecutionContext, Option, SessionClosed, SystemRun


@dataclass
class ExecutionRecord:
    id: int
    context: ExecutionContext
    commands: list[str]
    select_text: str
    decision_index: int
    source: str = "user"  # user | rule | auto


@dataclass
class Response:
    lines: list[str] = field(default_factory=list)
    selection: Optional[int] = None
    quit: bool = False
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {"lines": list(self.lines), "selection": self.selection,
                "quit": self.quit, "error": self.error}


def format_option(i: int, o: Option) -> str:
    extra = ""
    if o.org:
        extra = f" [using {o.org}]"
    if o.hop_targets:
        extra += " (leads to: " + ", ".join(o.hop_targets) + ")"
    return f"  {i + 1}) {o.destination_name}{extra}"


def format_context(ctx: ExecutionContext) -> list[str]:
    msg = f" on {ctx.last_message}" if ctx.last_message else ""
    lines = [f"{ctx.component} stopped at a decision point (from {ctx.state_name}{msg}); options:"]
    for i, o in enumerate(ctx.options):
        lines.append(format_option(i, o))
    return lines


class Session:
    """Mediates between a paused run and a human (or a rule script)."""

    def __init__(self, rules: Optional[R.RuleSet] = None,
                 input_fn: Optional[Callable[[str], str]] = None,
                 output_fn: Optional[Callable[[str], None]] = None,
                 design_model: Optional[M.SystemModel] = None,
                 design_setting: Optional[object] = None,
                 metadata=None):
        self.rules = rules
        self.input_fn = input_fn
        self.output_fn = output_fn or (lambda text: None)
        self.design_model = design_model
        self.design_setting = design_setting
        self.metadata = metadata
        self.run: Optional[SystemRun] = None
        self.records: list[ExecutionRecord] = []
        self.pending: Optional[ExecutionContext] = None
        self.scratch: dict = {}
        self.command_log: list[str] = []
        self.warnings: list[str] = []
        self.saved_rules = R.RuleSet(source="<saved>")
        self._autoselect: dict[str, R.SelectTarget] = {}
        self._commands_this_pause: list[str] = []
        self.closed = False
        self.close_reason: Optional[str] = None

    def attach(self, run: SystemRun) -> None:
        self.run = run
        run.provider = self.provide_input
        if self.input_fn is not None:
            run.idle_hook = self.on_idle

    def on_idle(self) -> bool:
        """Console access while the system is quiescent; True resumes the run."""
        if self.input_fn is None or self.closed:
            return False
        self.output_fn("(system is quiescent; inject a message, or quit)")
        while True:
            try:
                line = self.input_fn("pmx> ").strip()
            except (EOFError, StopIteration):
                return False
            if line == "continue":
                return bool(self.run.injections or self.run.emissions)
            resp = self.handle_command(line)
            for out in resp.lines:
                self.output_fn(out)
            if resp.error:
                self.output_fn(f"error: {resp.error}")
            if resp.quit:
                self.closed = True
                raise SessionClosed("quit")
            if self.run.injections or self.run.emissions:
                return True

    # -- env plumbing ---------------------------------------------------------

    def _env(self) -> dict:
        return self.pending.config.env if self.pending else {}

    def _lookup_chain(self) -> A.ExecContext:
        inst = self.run.instances.get(self.pending.component) if (self.run and self.pending) else None
        return A.ExecContext(
            scratch=self.scratch, rng=self.run.rng if self.run else None,
            last_message=self.pending.last_message if self.pending else None,
            payload=inst.last_delivery.payload if inst and inst.last_delivery else {},
        )

    def _assign(self, name: str, value) -> None:
        env = self._env()
        if name in env and name in self.scratch:
            raise A.ActionError(f"{name!r} names both a component variable and a session variable")
        if name in env:
            env[name] = value
        else:
            self.scratch[name] = value

    # -- option resolution ------------------------------------------------------

    def _resolve_target(self, ctx: ExecutionContext, target: R.SelectTarget,
                        prefer_first_on_tie: bool = False) -> tuple[Optional[int], Optional[int], str]:
        """Returns (direct index, hop index, error)."""
        direct = [o for o in ctx.options if o.destination_name == target.name]
        if target.using:
            direct = [o for o in direct if target.using in (o.org, o.transition)]
        if len(direct) == 1:
            return direct[0].index, None, ""
        if len(direct) > 1:
            if prefer_first_on_tie:
                return direct[0].index, None, ""
            return None, None, (f"ambiguous selection {target.name!r}: "
                                f"candidates {[o.transition for o in direct]}; add `using <id>`")
        hops = [o for o in ctx.options if target.name in o.hop_targets]
        if len(hops) == 1:
            return None, hops[0].index, ""
        return None, None, f"no option leads to {target.name!r}"

    def _record(self, ctx: ExecutionContext, index: int, select_text: str, source: str) -> None:
        rec = ExecutionRecord(
            id=len(self.records) + 1, context=ctx,
            commands=list(self._commands_this_pause),
            select_text=select_text, decision_index=index, source=source)
        self.records.append(rec)
        self._commands_this_pause = []

    # -- the provider -----------------------------------------------------------

    def provide_input(self, ctx: ExecutionContext) -> int:
        if self.closed:
            raise SessionClosed("session closed")
        self.pending = ctx
        try:
            auto = self._autoselect.pop(ctx.component, None)
            if auto is not None:
                direct, hop, err = self._resolve_target(ctx, auto, prefer_first_on_tie=True)
                if direct is not None:
                    self._record(ctx, direct, f"select state {auto.name}", "auto")
                    return direct
                if hop is not None:
                    self._autoselect[ctx.component] = auto
                    self._record(ctx, hop, f"select state {auto.name}", "auto")
                    return hop
                self.warnings.append(f"steering to {auto.name!r} lost at {ctx.dec_p}: {err}")

            if self.rules is not None:
                rule = R.select_rule(self.rules, ctx.component, ctx.state_name,
                                     ctx.last_message, ctx.config.env, self.warnings)
                if rule is not None:
                    sel = self._run_rule_body(ctx, rule)
                    if sel is not None:
                        return sel
            return self._interactive(ctx)
        finally:
            self.pending = None

    def _run_rule_body(self, ctx: ExecutionContext, rule: R.ExecutionRule) -> Optional[int]:
        try:
            body = rule.body()
        except R.RuleError as e:
            self.warnings.append(f"rule {rule.header.name}: {e}; switching to interactive mode")
            return None
        narrowed: Optional[list[R.SelectTarget]] = None
        for stmt in body:
            if isinstance(stmt, R.Select):
                if stmt.random:
                    k = self.run.rng.randrange(len(ctx.options))
                    self._record(ctx, k, "select state random", "rule")
                    return k
                resolved: list[tuple[Optional[int], Optional[int], R.SelectTarget]] = []
                for t in stmt.targets:
                    direct, hop, err = self._resolve_target(ctx, t)
                    if direct is not None or hop is not None:
                        resolved.append((direct, hop, t))
                if len(resolved) == 1:
                    direct, hop, t = resolved[0]
                    text = f"select state {t.name}" + (f" using {t.using}" if t.using else "")
                    if direct is not None:
                        self._record(ctx, direct, text, "rule")
                        return direct
                    self._autoselect[ctx.component] = t
                    self._record(ctx, hop, text, "rule")
                    return hop
                if resolved:
                    narrowed = [t for (_d, _h, t) in resolved]
                break
            try:
                self._exec_script_stmt(ctx, stmt, record=True)
            except (A.ActionError, M.PmxError) as e:
                self.warnings.append(f"rule {rule.header.name}: {e}; switching to interactive mode")
                return None
        # zero or several options left: the execution switches to interactive mode
        return self._interactive(ctx, narrowed)

    def _exec_script_stmt(self, ctx: ExecutionContext, stmt, record: bool = False):
        env = self._env()
        chain = self._lookup_chain()
        if isinstance(stmt, A.Assign):
            value = A.eval_expr(env, stmt.expr, chain)
            self._assign(stmt.name, value)
            if record:
                self._commands_this_pause.append(R.format_script_stmt(stmt, ""))
            return value
        if isinstance(stmt, R.ExprStmt):
            return A.eval_expr(env, stmt.expr, chain)
        if isinstance(stmt, A.Log):
            self.output_fn(str(A.eval_expr(env, stmt.expr, chain)))
            return None
        if isinstance(stmt, A.If):
            branch = stmt.then if A.eval_expr(env, stmt.cond, chain) else stmt.orelse
            for s in branch:
                self._exec_script_stmt(ctx, s, record=record)
            return None
        if isinstance(stmt, R.SendCmd):
            args = [A.eval_expr(env, a, chain) for a in stmt.args]
            self.run.send_from(ctx.component, stmt.message, args, stmt.port)
            if record:
                self._commands_this_pause.append(R.format_script_stmt(stmt, ""))
            return None
        if isinstance(stmt, R.ReplyCmd):
            inst = self.run.instances[ctx.component]
            if stmt.message is None:
                if inst.last_delivery is None:
                    raise A.ActionError("reply with no received message")
                port = inst.last_delivery.port
                comp = self.run.model.component(ctx.component)
                cands = [r for r in M.outp(self.run.model, comp) if r.port == port]
                if not cands:
                    raise A.ActionError(f"nothing can be sent back on port {port!r}")
                ref = cands[self.run.rng.randrange(len(cands))]
                self.run.route(ctx.component, ref.port, ref.message, [])
            else:
                if inst.last_delivery is None:
                    raise A.ActionError("reply with no received message")
                args = [A.eval_expr(env, a, chain) for a in stmt.args]
                self.run.route(ctx.component, inst.last_delivery.port, stmt.message, args)
            if record:
                self._commands_this_pause.append(R.format_script_stmt(stmt, ""))
            return None
        if isinstance(stmt, R.InjectCmd):
            self.run.inject(stmt.component, stmt.message or M.DBG_MESSAGE)
            if record:
                self._commands_this_pause.append(R.format_script_stmt(stmt, ""))
            return None
        raise A.ActionError(f"statement not allowed here: {stmt!r}")

    # -- interactive console -----------------------------------------------------

    def _interactive(self, ctx: ExecutionContext,
                     narrowed: Optional[list[R.SelectTarget]] = None) -> int:
        if self.input_fn is None:
            self.close_reason = (f"no rule matched at {ctx.component}.{ctx.state_name} "
                                 f"and no console is attached")
            raise SessionClosed(self.close_reason)
        for line in format_context(ctx):
            self.output_fn(line)
        if narrowed:
            self.output_fn("rule narrowed the choice to: " + "|".join(t.name for t in narrowed))
        while True:
            try:
                line = self.input_fn("pmx> ")
            except EOFError:
                raise SessionClosed("console closed") from None
            resp = self.handle_command(line)
            for out in resp.lines:
                self.output_fn(out)
            if resp.error:
                self.output_fn(f"error: {resp.error}")
            if resp.quit:
                self.closed = True
                raise SessionClosed("quit")
            if resp.selection is not None:
                return resp.selection

    # -- command processing --------------------------------------------------------

    def handle_command(self, text: str) -> Response:
        """Process one console/bridge command line."""
        line = text.strip()
        if not line or line.startswith("#"):
            return Response()
        self.command_log.append(line)
        ctx = self.pending
        words = line.split()
        try:
            if line == "quit":
                return Response(lines=["bye"], quit=True)
            if line == "continue":
                return Response(lines=["(waiting at the decision point)"])
            if line == "view options":
                if ctx is None:
                    return Response(error="no pending decision point")
                return Response(lines=format_context(ctx))
            if line == "view exec":
                lines = []
                for r in self.records:
                    m = f" on {r.context.last_message}" if r.context.last_message else ""
                    lines.append(f"  {r.id}) [{r.source}] {r.context.component}.{r.context.state_name}{m}"
                                 f" -> {r.select_text}")
                return Response(lines=lines or ["  (no decisions yet)"])
            if line == "visited":
                if ctx is None:
                    return Response(error="no pending decision point")
                inst = self.run.instances[ctx.component]
                names = [inst.hsm.state(s).name for s in inst.visited]
                return Response(lines=["  " + " ".join(names) if names else "  (none)"])
            if words[0] == "save" and len(words) >= 3 and words[1] in ("input", "rule"):
                return self._save(words[1], words[2:])
            stmt = R.parse_script_statements(line)
            if len(stmt) != 1:
                return Response(error="one command at a time")
            return self._apply_command(ctx, stmt[0], line)
        except SessionClosed:
            raise
        except (M.PmxError, A.ActionError, R.RuleError) as e:
            return Response(error=str(e))

    def _apply_command(self, ctx: Optional[ExecutionContext], stmt, line: str) -> Response:
        if isinstance(stmt, R.Select):
            if ctx is None:
                return Response(error="no pending decision point")
            if stmt.random:
                k = self.run.rng.randrange(len(ctx.options))
                self._record(ctx, k, "select state random", "user")
                return Response(lines=[f"selected option {k + 1}"], selection=k)
            if len(stmt.targets) != 1:
                return Response(error="select exactly one state")
            t = stmt.targets[0]
            direct, hop, err = self._resolve_target(ctx, t)
            if direct is not None:
                text = f"select state {t.name}" + (f" using {t.using}" if t.using else "")
                self._record(ctx, direct, text, "user")
                return Response(lines=[f"steering to {t.name}"], selection=direct)
            if hop is not None:
                self._autoselect[ctx.component] = t
                self._record(ctx, hop, f"select state {t.name}", "user")
                return Response(lines=[f"steering to {t.name} (through the boundary)"], selection=hop)
            return Response(error=err)
        if isinstance(stmt, (R.SendCmd, R.ReplyCmd)) and ctx is None:
            return Response(error="no pending decision point")
        value = self._exec_script_stmt(ctx, stmt, record=True)
        if isinstance(stmt, A.Assign):
            return Response(lines=[f"{stmt.name} = {value}"])
        if isinstance(stmt, R.ExprStmt):
            return Response(lines=[str(value)])
        return Response(lines=["ok"])

    def _save(self, kind: str, id_words: list[str]) -> Response:
        try:
            ids = [int(w) for w in id_words]
        except ValueError:
            return Response(error="save expects record ids")
        chosen = [r for r in self.records if r.id in ids]
        if len(chosen) != len(ids):
            missing = set(ids) - {r.id for r in chosen}
            return Response(error=f"unknown record id(s): {sorted(missing)}")
        rule_set, conflicts = R.save_decisions_as_rules(chosen, resolver=self._resolve_conflict)
        if kind == "input":
            self.saved_rules.rules.extend(rule_set.rules)
            lines = [f"saved {len(rule_set.rules)} rule(s):"]
            lines.extend(R.serialize_rules(rule_set).rstrip().splitlines())
            lines.extend(f"note: {c}" for c in conflicts)
            return Response(lines=lines)
        if self.design_model is None:
            return Response(error="no design model attached to this session")
        report = analyze(self.design_model, self.design_setting or "")
        lines = []
        for rec, rule in zip(chosen, rule_set.rules):
            t = R.apply_rule_to_model(self.design_model, rec.context.component, rule,
                                      report, self.metadata)
            lines.append(f"applied to the design model: transition {t.id} "
                         f"({t.src} -> {t.des})")
        lines.extend(f"note: {c}" for c in conflicts)
        return Response(lines=lines)

    def _resolve_conflict(self, recs):
        if self.input_fn is None:
            return recs[-1]
        self.output_fn("conflicting decisions for the same context:")
        for r in recs:
            self.output_fn(f"  {r.id}) {r.select_text}")
        while True:
            try:
                line = self.input_fn("keep which id? ").strip()
            except EOFError:
                return recs[-1]
            for r in recs:
                if str(r.id) == line:
                    return r
