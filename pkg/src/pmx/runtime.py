"""Execution semantics: per-component stepping over the nine operational
rules, a run-to-completion controller with FIFO message routing over
connectors, a virtual clock for timers, and decision-point interception.

One system run executes on a single logical thread; the input provider is
invoked synchronously whenever a transition entering a decision point fires
its probe action.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import actions as A
from . import model as M

# unexpected-message policies
POLICY_STUCK = "stuck"
POLICY_DROP = "drop"

# stuck reasons, keyed by the rule that produces them
BROKEN_CHAIN = "BrokenChain"
DEADLOCK = "Deadlock"
UNEXPECTED_MESSAGE = "UnexpectedMessage"
NO_CHILD = "NoChild"
NON_EXHAUSTIVE_GUARDS = "NonExhaustiveGuards"
MISSING_INITIAL = "MissingInitialState"

STUCK_RULE = {2: BROKEN_CHAIN, 3: DEADLOCK, 5: UNEXPECTED_MESSAGE, 7: NO_CHILD, 9: NON_EXHAUSTIVE_GUARDS}


class RuntimeFault(M.PmxError):
    """An action failed at runtime; halts the owning instance only."""


class SessionClosed(M.PmxError):
    """The input provider quit; the run halts gracefully."""


@dataclass(frozen=True)
class Configuration:
    sigma: str
    env: dict
    history: dict

    def brief(self) -> dict:
        return {"sigma": self.sigma, "env": dict(self.env), "history": dict(self.history)}


@dataclass(frozen=True)
class Delivery:
    message: str
    payload: dict
    port: str


@dataclass
class Option:
    index: int
    transition: str
    destination: str
    destination_name: str
    org: Optional[str]
    hop_targets: tuple[str, ...] = ()  # one-level look-through for boundary hops

    def to_json(self) -> dict:
        return {
            "index": self.index, "transition": self.transition,
            "destination": self.destination, "destination_name": self.destination_name,
            "org": self.org, "hop_targets": list(self.hop_targets),
        }


@dataclass
class ExecutionContext:
    component: str
    config: Configuration          # configuration right before the decision point
    state_name: str                # name of the state the probing transition left
    state_id: str
    dec_p: str
    last_message: Optional[str]
    options: list[Option]

    def option_names(self) -> list[str]:
        """Selectable destination names, hop look-throughs included."""
        names = []
        for o in self.options:
            names.append(o.destination_name)
            names.extend(o.hop_targets)
        return names

    def to_json(self) -> dict:
        return {
            "component": self.component, "state": self.state_name,
            "state_id": self.state_id, "dec_p": self.dec_p,
            "last_message": self.last_message,
            "options": [o.to_json() for o in self.options],
        }


# provider: ExecutionContext -> selection index
Provider = Callable[[ExecutionContext], int]


@dataclass
class ExecutionStep:
    index: int
    component: str
    rule: int
    from_sigma: str
    to_sigma: str
    actions: list[str]
    emissions: list[tuple[str, str, list]]
    vtime: int
    message: Optional[str] = None
    port: Optional[str] = None
    payload: Optional[dict] = None
    selection: Optional[int] = None
    dropped: bool = False
    log: list[str] = field(default_factory=list)
    from_config: Optional[Configuration] = None
    to_config: Optional[Configuration] = None

    def to_json(self) -> dict:
        rec = {
            "step": self.index, "component": self.component, "rule": self.rule,
            "from": self.from_sigma, "to": self.to_sigma,
            "actions": list(self.actions),
            "emissions": [[p, m, list(a)] for (p, m, a) in self.emissions],
            "vtime": self.vtime,
        }
        if self.message is not None:
            rec["message"] = self.message
        if self.port:
            rec["port"] = self.port
        if self.payload:
            rec["payload"] = dict(self.payload)
        if self.selection is not None:
            rec["selection"] = self.selection
        if self.dropped:
            rec["dropped"] = True
        if self.log:
            rec["log"] = list(self.log)
        return rec


@dataclass
class Trace:
    records: list[ExecutionStep] = field(default_factory=list)
    halt_reason: str = ""
    errors: list[str] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "\n".join(json.dumps(r.to_json(), sort_keys=True) for r in self.records) + "\n"

    def action_labels(self, component: Optional[str] = None) -> list[str]:
        out = []
        for r in self.records:
            if component is None or r.component == component:
                out.extend(r.actions)
        return out

    def stuck_records(self) -> list[ExecutionStep]:
        return [r for r in self.records if r.rule in STUCK_RULE or r.rule == 0]


def build_options(hsm: M.Hsm, dec_p: str) -> list[Option]:
    """Outgoing transitions of a decision point in selection order, with a
    one-level look-through for boundary entry/exit hops."""
    options = []
    for i, t in enumerate(hsm.out_t(dec_p)):
        des = hsm.state(t.des)
        org = None if t.id.startswith(M.PMX_PREFIX) else t.id
        hops: tuple[str, ...] = ()
        if des.id.startswith(M.PMX_PREFIX) and des.kind in (M.ENTRY_POINT, M.EXIT_POINT):
            outs = hsm.out_t(des.id)
            if len(outs) == 1:
                landing = hsm.state(outs[0].des)
                if landing.kind == M.CHOICE:
                    # advertise the basic states selectable one hop away;
                    # composites and further hops are not listed
                    seen: list[str] = []
                    for x in hsm.out_t(landing.id):
                        xd = hsm.state(x.des)
                        if xd.kind != M.BASIC:
                            continue
                        if xd.name not in seen:
                            seen.append(xd.name)
                    hops = tuple(seen)
        options.append(Option(i, t.id, des.id, des.name, org, hops))
    return options


def init_instance(comp: M.Component) -> Configuration:
    """Initial configuration: the root's initial pseudo-state, default
    variable values, empty history."""
    hsm = comp.behavior
    if hsm is None:
        raise RuntimeFault(f"{comp.name} has no behavior")
    initial = [s for s in hsm.children(M.ROOT_ID) if s.kind == M.INITIAL]
    if not initial:
        raise RuntimeFault(MISSING_INITIAL)
    return Configuration(initial[0].id, A.default_env(comp), {})


class Instance:
    """The LTS of one component: applies exactly one Fig.-3 rule per step."""

    def __init__(self, model: M.SystemModel, comp: M.Component, policy: str = POLICY_STUCK,
                 rng: Optional[random.Random] = None):
        self.model = model
        self.comp = comp
        self.hsm = comp.behavior
        self.policy = policy
        self.rng = rng
        self.queue: deque[Delivery] = deque()
        self.status = "running"  # running | awaiting_input | stuck | halted
        self.stuck_reason: Optional[str] = None
        self.last_delivery: Optional[Delivery] = None
        self.visited: list[str] = []  # distinct basic states, visit order
        try:
            self.config: Optional[Configuration] = init_instance(comp)
        except RuntimeFault:
            self.config = None
            self.status = "stuck"
            self.stuck_reason = MISSING_INITIAL

    # installed by the controller (or a test harness)
    provider: Optional[Provider] = None

    def _ctx(self, payload: dict, labels: list[str], emissions: list, logs: list[str],
             selection_box: list) -> A.ExecContext:
        def emit(port, msg, args):
            emissions.append((port, msg, list(args)))

        def reply(msg, args):
            if self.last_delivery is None:
                raise A.ActionError("reply with no received message")
            emissions.append((self.last_delivery.port, msg, list(args)))

        def probe(dec_id, live_env):
            ctx = self.make_context(dec_id, live_env)
            self.status = "awaiting_input"
            try:
                k = self.provider(ctx)
            finally:
                if self.status == "awaiting_input":
                    self.status = "running"
            if not (0 <= int(k) < len(ctx.options)):
                raise A.ActionError(f"provider returned invalid option {k!r}")
            selection_box.append(int(k))
            return int(k)

        return A.ExecContext(
            emit=emit, log=logs.append, payload=payload,
            reply=reply, probe=probe, rng=self.rng,
            last_message=self.last_delivery.message if self.last_delivery else None,
        )

    def make_context(self, dec_id: str, live_env: Optional[dict] = None) -> ExecutionContext:
        # the probe runs mid-step, so the configuration still names the state
        # the probing transition left; the environment is the live one so the
        # session can inspect and modify variables while paused
        st = self.hsm.state(self.config.sigma)
        cfg = self.config if live_env is None else replace(self.config, env=live_env)
        return ExecutionContext(
            component=self.comp.name,
            config=cfg,
            state_name=st.name,
            state_id=st.id,
            dec_p=dec_id,
            last_message=self.last_delivery.message if self.last_delivery else None,
            options=build_options(self.hsm, dec_id),
        )

    def _exec(self, blocks: list[tuple[str, Optional[A.ActionBlock]]], payload: dict):
        """Run labeled action blocks; returns (env', labels, emissions, logs, selection)."""
        labels: list[str] = []
        emissions: list = []
        logs: list[str] = []
        selection: list = []
        env = self.config.env
        ctx = self._ctx(payload, labels, emissions, logs, selection)
        for label, block in blocks:
            if not block:
                continue
            labels.append(label)
            env = A.exec_actions(env, block, ctx)
        return env, labels, emissions, logs, (selection[0] if selection else None)

    def step(self) -> tuple[str, Optional[ExecutionStep]]:
        """Apply one execution rule.

        Returns (kind, step) where kind is 'step', 'stuck', 'idle' (a basic
        state waiting for a message) or 'halted'.
        """
        if self.status in ("stuck", "halted"):
            return ("idle", None)
        hsm = self.hsm
        cfg = self.config
        s = hsm.state(cfg.sigma)

        def mk(rule, to_cfg, labels, emissions, logs, selection, delivery=None) -> ExecutionStep:
            return ExecutionStep(
                index=-1, component=self.comp.name, rule=rule,
                from_sigma=cfg.sigma, to_sigma=to_cfg.sigma,
                actions=labels, emissions=emissions, vtime=0,
                message=delivery.message if delivery else None,
                port=delivery.port if delivery else None,
                payload=dict(delivery.payload) if delivery else None,
                selection=selection, log=logs, from_config=cfg, to_config=to_cfg)

        def stuck(rule) -> tuple[str, ExecutionStep]:
            self.status = "stuck"
            self.stuck_reason = STUCK_RULE[rule]
            rec = ExecutionStep(index=-1, component=self.comp.name, rule=rule,
                                from_sigma=cfg.sigma, to_sigma=cfg.sigma, actions=[],
                                emissions=[], vtime=0, from_config=cfg, to_config=cfg)
            return ("stuck", rec)

        try:
            if s.is_pseudo and s.kind not in (M.HISTORY, M.CHOICE):
                outs = hsm.out_t(s.id)
                if not outs:
                    return stuck(2)
                t = outs[0]
                env, labels, emissions, logs, sel = self._exec(
                    [(f"act({t.id})", t.act), (f"entry({t.des})", hsm.state(t.des).entry)],
                    self.last_delivery.payload if self.last_delivery else {})
                to = Configuration(t.des, env, M.u_h(hsm, t.des, cfg.history))
                self._after_move(to)
                return ("step", mk(1, to, labels, emissions, logs, sel))

            if s.kind == M.BASIC:
                if M.deadlock(hsm, s.id):
                    return stuck(3)
                if not self.queue:
                    return ("idle", None)
                head = self.queue[0]
                t = self._next_t(s.id, head)
                if t is None:
                    if self.policy == POLICY_DROP:
                        self.queue.popleft()
                        rec = ExecutionStep(index=-1, component=self.comp.name, rule=5,
                                            from_sigma=cfg.sigma, to_sigma=cfg.sigma, actions=[],
                                            emissions=[], vtime=0, message=head.message,
                                            port=head.port, payload=dict(head.payload), dropped=True,
                                            from_config=cfg, to_config=cfg)
                        return ("step", rec)
                    st = stuck(5)
                    st[1].message = head.message
                    st[1].port = head.port
                    st[1].payload = dict(head.payload)
                    return st
                self.queue.popleft()
                self.last_delivery = head
                chain = M.up_s(hsm, s.id, t)
                blocks = [(f"exit({sid})", hsm.state(sid).exit) for sid in chain]
                blocks.append((f"act({t.id})", t.act))
                blocks.append((f"entry({t.des})", hsm.state(t.des).entry))
                env, labels, emissions, logs, sel = self._exec(blocks, head.payload)
                to = Configuration(t.des, env, M.u_h(hsm, t.des, cfg.history))
                self._after_move(to)
                return ("step", mk(4, to, labels, emissions, logs, sel, delivery=head))

            if s.kind == M.COMPOSITE:
                nxt = M.next_s(hsm, s.id, cfg.history)
                if nxt is None:
                    return stuck(7)
                env, labels, emissions, logs, sel = self._exec(
                    [(f"entry({nxt})", hsm.state(nxt).entry)],
                    self.last_delivery.payload if self.last_delivery else {})
                to = Configuration(nxt, env, M.u_h(hsm, nxt, cfg.history))
                self._after_move(to)
                return ("step", mk(6, to, labels, emissions, logs, sel))

            if s.kind == M.CHOICE:
                chosen = None
                guard_ctx = A.ExecContext(
                    rng=self.rng,
                    payload=self.last_delivery.payload if self.last_delivery else {},
                    last_message=self.last_delivery.message if self.last_delivery else None)
                for t in hsm.out_t(s.id):
                    if A.eval_guard(cfg.env, t.guard, guard_ctx):
                        chosen = t
                        break
                if chosen is None:
                    return stuck(9)
                env, labels, emissions, logs, sel = self._exec(
                    [(f"act({chosen.id})", chosen.act), (f"entry({chosen.des})", hsm.state(chosen.des).entry)],
                    self.last_delivery.payload if self.last_delivery else {})
                to = Configuration(chosen.des, env, M.u_h(hsm, chosen.des, cfg.history))
                self._after_move(to)
                return ("step", mk(8, to, labels, emissions, logs, sel))
        except SessionClosed:
            raise
        except A.ActionError as e:
            self.status = "halted"
            self.stuck_reason = f"action error: {e}"
            return ("halted", None)
        raise M.ModelError(f"no execution rule applies to state kind {s.kind!r}")

    def _next_t(self, sid: str, d: Delivery) -> Optional[M.Transition]:
        chain = [self.hsm.state(sid)] + self.hsm.parents(sid)
        for s in chain:
            for t in self.hsm.out_t(s.id):
                for r in t.trig:
                    if r.message == d.message and (not d.port or r.port == d.port):
                        return t
        return None

    def _after_move(self, to: Configuration) -> None:
        self.config = to
        st = self.hsm.state(to.sigma)
        if st.kind == M.BASIC and to.sigma not in self.visited:
            self.visited.append(to.sigma)

    def stable(self) -> bool:
        return self.hsm.state(self.config.sigma).kind == M.BASIC if self.config else True


@dataclass(order=True)
class _Timer:
    deadline: int
    seq: int
    owner: str = field(compare=False)
    port: str = field(compare=False)


class VirtualClock:
    """Logical time; timeouts fire in deadline order, ties by creation order."""

    def __init__(self):
        self.now = 0
        self.pending: list[_Timer] = []
        self._seq = 0

    def schedule(self, owner: str, port: str, delay: int) -> None:
        self._seq += 1
        self.pending.append(_Timer(self.now + max(0, int(delay)), self._seq, owner, port))
        self.pending.sort()

    def pop_due(self) -> Optional[_Timer]:
        if self.pending and self.pending[0].deadline <= self.now:
            return self.pending.pop(0)
        return None

    def next_deadline(self) -> Optional[int]:
        return self.pending[0].deadline if self.pending else None


@dataclass
class Limits:
    max_steps: int = 10_000
    max_vtime: int = 10_000


class SystemRun:
    """Controller: schedules deliveries, drives instances to completion,
    routes emissions across connectors, owns the virtual clock."""

    def __init__(self, model: M.SystemModel, provider: Optional[Provider] = None,
                 seed: int = 0, limits: Optional[Limits] = None,
                 policy: str = POLICY_STUCK,
                 step_listener: Optional[Callable[[ExecutionStep], None]] = None,
                 idle_hook: Optional[Callable[[], bool]] = None):
        self.model = model
        self.provider = provider or (lambda ctx: 0)
        self.idle_hook = idle_hook
        self.rng = random.Random(seed)
        self.limits = limits or Limits()
        self.policy = policy
        self.clock = VirtualClock()
        self.trace = Trace()
        self.step_listener = step_listener
        self.injections: deque[tuple[str, Delivery]] = deque()
        self.emissions: deque[tuple[str, Delivery]] = deque()
        self._steps = 0
        self.instances: dict[str, Instance] = {}
        for comp in model.components:
            if comp.behavior is None:
                continue
            inst = Instance(model, comp, policy=policy, rng=self.rng)
            inst.provider = self._provide
            self.instances[comp.name] = inst
            if inst.status == "stuck":
                self._record(ExecutionStep(
                    index=-1, component=comp.name, rule=0, from_sigma="", to_sigma="",
                    actions=[], emissions=[], vtime=0, message=MISSING_INITIAL))

    # -- provider indirection (lets a session observe the paused instance) --
    def _provide(self, ctx: ExecutionContext) -> int:
        return self.provider(ctx)

    def _record(self, rec: ExecutionStep) -> None:
        rec.index = len(self.trace.records)
        rec.vtime = self.clock.now
        self.trace.records.append(rec)
        if self.step_listener:
            self.step_listener(rec)

    # -- messaging ----------------------------------------------------------
    def route(self, comp: str, port: str, message: str, args: list) -> None:
        c = self.model.component(comp)
        p = c.port(port)
        if p is None:
            raise RuntimeFault(f"{comp}: send on unknown port {port!r}")
        if p.interface == M.TIMING_INTERFACE and message == M.START_TIMER:
            delay = args[0] if args else 1
            self.clock.schedule(comp, port, delay)
            return
        peer = self.model.peer_of(comp, port)
        if peer is None:
            raise RuntimeFault(f"{comp}: send {message!r} on unconnected port {port!r}")
        pcomp, pport = peer
        payload = self._payload_for(pcomp, pport, message, args)
        self.emissions.append((pcomp, Delivery(message, payload, pport)))

    def _payload_for(self, comp: str, port: str, message: str, args: list) -> dict:
        c = self.model.component(comp)
        p = c.port(port)
        for m in M.port_messages(self.model, c, p, M.INPUT):
            if m.name == message:
                return {fname: v for (fname, _t), v in zip(m.payload, args)}
        raise RuntimeFault(f"{comp}.{port} cannot receive {message!r}")

    def inject(self, comp: str, message: str = M.DBG_MESSAGE, args: Optional[list] = None) -> None:
        """Queue an external message; dbg goes through the debug wiring."""
        c = self.model.component(comp)
        if message == M.DBG_MESSAGE:
            port = next((p for p in c.ports if p.interface == M.DBG_INTERFACE and not p.conjugated), None)
            if port is None:
                raise RuntimeFault(f"{comp} has no debug port (is the model refined, and {comp} not complete?)")
            self.injections.append((comp, Delivery(M.DBG_MESSAGE, {}, port.name)))
            return
        candidates = [r for r in M.inp(self.model, c) if r.message == message]
        if not candidates:
            raise RuntimeFault(f"{comp} cannot receive {message!r}")
        ref = candidates[0]
        payload = self._payload_for(comp, ref.port, message, args or [])
        self.injections.append((comp, Delivery(message, payload, ref.port)))

    def send_from(self, comp: str, message: str, args: Optional[list] = None,
                  port: Optional[str] = None) -> None:
        """Send a message on behalf of a component (session `send` command)."""
        c = self.model.component(comp)
        candidates = [r for r in M.outp(self.model, c) if r.message == message
                      and (port is None or r.port == port)]
        if not candidates:
            raise RuntimeFault(f"{comp} cannot send {message!r}")
        if len(candidates) > 1:
            raise RuntimeFault(f"{comp}: ambiguous send {message!r}; name the port")
        self.route(comp, candidates[0].port, message, args or [])

    # -- the run loop ---------------------------------------------------------
    def _drive(self, inst: Instance) -> None:
        while self._steps < self.limits.max_steps:
            kind, rec = inst.step()
            if kind == "idle" or kind == "halted":
                if kind == "halted":
                    self.trace.errors.append(f"{inst.comp.name}: {inst.stuck_reason}")
                return
            self._steps += 1
            self._record(rec)
            for (port, msg, args) in rec.emissions:
                try:
                    self.route(inst.comp.name, port, msg, args)
                except RuntimeFault as e:
                    inst.status = "halted"
                    inst.stuck_reason = str(e)
                    self.trace.errors.append(str(e))
                    return
            if kind == "stuck":
                return
            if inst.stable() and not inst.queue:
                return

    def startup(self) -> None:
        for name, inst in self.instances.items():
            if inst.status == "running":
                self._drive(inst)

    def run(self) -> Trace:
        try:
            self.startup()
            while self._steps < self.limits.max_steps:
                item = self._next_delivery()
                if item is None:
                    nxt = self.clock.next_deadline()
                    if nxt is not None:
                        if nxt > self.limits.max_vtime:
                            self.trace.halt_reason = "max_vtime"
                            break
                        self.clock.now = nxt
                        continue
                    # truly quiescent: give the console a chance to inject
                    if self.idle_hook is not None and self.idle_hook():
                        continue
                    self.trace.halt_reason = "quiescent"
                    break
                comp, delivery = item
                inst = self.instances.get(comp)
                if inst is None or inst.status in ("stuck", "halted"):
                    continue  # undeliverable; dropped silently
                inst.queue.append(delivery)
                self._drive(inst)
            else:
                self.trace.halt_reason = "max_steps"
            if not self.trace.halt_reason:
                self.trace.halt_reason = "max_steps" if self._steps >= self.limits.max_steps else "quiescent"
        except SessionClosed:
            self.trace.halt_reason = "quit"
        return self.trace

    def _next_delivery(self) -> Optional[tuple[str, Delivery]]:
        if self.injections:
            return self.injections.popleft()
        t = self.clock.pop_due()
        if t is not None:
            return (t.owner, Delivery(M.TIMEOUT, {}, t.port))
        if self.emissions:
            return self.emissions.popleft()
        return None
