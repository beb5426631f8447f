"""In-memory representation of systems, components and hierarchical state machines.

Holds the structural types (interfaces, ports, components, states, transitions),
the well-formedness validator, and the structural helper functions (inp, in_t,
out_t, handled, deadlock, next_t, next_s, up_s, u_h) that every other layer of
the engine is built on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

# State kinds
BASIC = "basic"
COMPOSITE = "composite"
INITIAL = "initial"
CHOICE = "choice"
HISTORY = "history"
JUNCTION = "junction"
ENTRY_POINT = "entry_point"
EXIT_POINT = "exit_point"

PSEUDO_KINDS = frozenset({INITIAL, CHOICE, HISTORY, JUNCTION, ENTRY_POINT, EXIT_POINT})
STATE_KINDS = frozenset({BASIC, COMPOSITE}) | PSEUDO_KINDS

ROOT_ID = "root"

INPUT = "input"
OUTPUT = "output"

# Completeness levels
COMPLETE = "complete"
PARTIAL = "partial"
ABSENT = "absent"
LEVELS = (COMPLETE, PARTIAL, ABSENT)

# Reserved vocabulary introduced by refinement
PMX_PREFIX = "__pmx_"
DBG_MESSAGE = "dbg"
DBG_INTERFACE = "dbg_int"
DBG_AGENT = "dbg_agent"
SEL_VAR = "__pmx_sel"
TIMING_INTERFACE = "timing"
START_TIMER = "startTimer"
TIMEOUT = "timeout"


class PmxError(Exception):
    """Base error for the engine."""


class ModelError(PmxError):
    """Raised for invalid model structure or failed lookups."""


@dataclass(frozen=True)
class MsgRef:
    """A port-qualified message reference (the form triggers are stored in)."""

    port: str
    message: str

    def __str__(self) -> str:
        return f"{self.port}.{self.message}"


@dataclass
class MessageDecl:
    name: str
    payload: tuple[tuple[str, str], ...] = ()  # (field name, type)


@dataclass
class Interface:
    name: str
    entries: list[tuple[MessageDecl, str]] = field(default_factory=list)

    def messages(self, direction: Optional[str] = None) -> list[MessageDecl]:
        return [m for m, d in self.entries if direction is None or d == direction]

    def find(self, name: str) -> Optional[tuple[MessageDecl, str]]:
        for m, d in self.entries:
            if m.name == name:
                return m, d
        return None


@dataclass
class Port:
    name: str
    interface: str
    conjugated: bool = False


@dataclass
class Variable:
    name: str
    type: str  # int | bool | string
    init: object = None


@dataclass
class State:
    id: str
    name: str
    kind: str
    parent: Optional[str] = None  # id of the containing composite (None for root)
    children: list[str] = field(default_factory=list)  # direct children, declaration order
    entry: Optional[object] = None  # ActionBlock
    exit: Optional[object] = None  # ActionBlock

    @property
    def is_pseudo(self) -> bool:
        return self.kind in PSEUDO_KINDS


@dataclass
class Transition:
    id: str
    src: str
    des: str
    trig: tuple[MsgRef, ...] = ()
    guard: Optional[object] = None  # Expr
    act: Optional[object] = None  # ActionBlock


@dataclass
class Hsm:
    """States plus transitions; the root is materialized as a composite state."""

    states: dict[str, State] = field(default_factory=dict)
    transitions: list[Transition] = field(default_factory=list)

    def __post_init__(self):
        if ROOT_ID not in self.states:
            self.states[ROOT_ID] = State(id=ROOT_ID, name=ROOT_ID, kind=COMPOSITE)

    # -- construction -----------------------------------------------------
    def add_state(self, state: State) -> State:
        if state.id in self.states:
            raise ModelError(f"duplicate state id {state.id!r}")
        self.states[state.id] = state
        parent = state.parent or ROOT_ID
        state.parent = None if state.id == ROOT_ID else parent
        if state.id != ROOT_ID:
            self.states[parent].children.append(state.id)
        return state

    def add_transition(self, t: Transition) -> Transition:
        if any(x.id == t.id for x in self.transitions):
            raise ModelError(f"duplicate transition id {t.id!r}")
        self.transitions.append(t)
        return t

    # -- lookups ----------------------------------------------------------
    @property
    def root(self) -> State:
        return self.states[ROOT_ID]

    def state(self, sid: str) -> State:
        try:
            return self.states[sid]
        except KeyError:
            raise ModelError(f"unknown state {sid!r}") from None

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise ModelError(f"unknown transition {tid!r}")

    def has_transition(self, tid: str) -> bool:
        return any(t.id == tid for t in self.transitions)

    def state_by_name(self, name: str) -> Optional[State]:
        hits = [s for s in self.states.values() if s.name == name and s.id != ROOT_ID]
        if len(hits) == 1:
            return hits[0]
        return None

    def children(self, sid: str) -> list[State]:
        """Direct children of a composite (or the root), declaration order."""
        return [self.states[c] for c in self.state(sid).children]

    def descendants(self, sid: str) -> list[State]:
        """All states contained in `sid` at any depth."""
        out: list[State] = []
        stack = list(self.state(sid).children)
        while stack:
            cid = stack.pop(0)
            s = self.states[cid]
            out.append(s)
            stack = list(s.children) + stack
        return out

    def parent(self, sid: str) -> Optional[State]:
        p = self.state(sid).parent
        return self.states[p] if p is not None else None

    def parents(self, sid: str) -> list[State]:
        """All containers of `sid`, bottom-up, ending with the root."""
        out = []
        cur = self.parent(sid)
        while cur is not None:
            out.append(cur)
            cur = self.parent(cur.id) if cur.id != ROOT_ID else None
        return out

    def in_t(self, sid: str) -> list[Transition]:
        self.state(sid)
        return [t for t in self.transitions if t.des == sid]

    def out_t(self, sid: str) -> list[Transition]:
        self.state(sid)
        return [t for t in self.transitions if t.src == sid]

    def scope_of_transition(self, t: Transition) -> str:
        """The composite a transition belongs to (the scope of its source)."""
        src = self.state(t.src)
        if src.kind == EXIT_POINT and self.state(t.des).parent != src.parent:
            # boundary hop leaving a composite lives in the outer scope
            return self.state(src.parent or ROOT_ID).parent or ROOT_ID
        return src.parent or ROOT_ID

    def composites(self) -> list[State]:
        """Root first, then composite states by increasing nesting depth."""
        out = [self.root]
        frontier = [ROOT_ID]
        while frontier:
            nxt = []
            for sid in frontier:
                for c in self.children(sid):
                    if c.kind == COMPOSITE:
                        out.append(c)
                    nxt.append(c.id)
            frontier = nxt
        return out


@dataclass
class Component:
    name: str
    ports: list[Port] = field(default_factory=list)
    variables: list[Variable] = field(default_factory=list)
    behavior: Optional[Hsm] = None
    level: Optional[str] = None  # completeness annotation, defaults to complete

    def port(self, name: str) -> Optional[Port]:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass
class SystemModel:
    name: str
    interfaces: list[Interface] = field(default_factory=list)
    components: list[Component] = field(default_factory=list)
    # connector: ((component, port), (component, port))
    connectors: list[tuple[tuple[str, str], tuple[str, str]]] = field(default_factory=list)

    def interface(self, name: str) -> Optional[Interface]:
        for i in self.interfaces:
            if i.name == name:
                return i
        return None

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise ModelError(f"unknown component {name!r}")

    def has_component(self, name: str) -> bool:
        return any(c.name == name for c in self.components)

    def peer_of(self, comp: str, port: str) -> Optional[tuple[str, str]]:
        for (a, b) in self.connectors:
            if a == (comp, port):
                return b
            if b == (comp, port):
                return a
        return None


# ---------------------------------------------------------------------------
# Message direction helpers


def port_messages(model: SystemModel, comp: Component, port: Port, direction: str) -> list[MessageDecl]:
    """Messages flowing in `direction` through `port` (conjugation-aware)."""
    iface = model.interface(port.interface)
    if iface is None:
        raise ModelError(f"port {comp.name}.{port.name} references unknown interface {port.interface!r}")
    want = direction
    if port.conjugated:
        want = INPUT if direction == OUTPUT else OUTPUT
    return iface.messages(want)


def inp(model: SystemModel, component: Component | str) -> list[MsgRef]:
    """Possible input messages of a component, in port/declaration order."""
    comp = model.component(component) if isinstance(component, str) else component
    out: list[MsgRef] = []
    for p in comp.ports:
        for m in port_messages(model, comp, p, INPUT):
            out.append(MsgRef(p.name, m.name))
    return out


def outp(model: SystemModel, component: Component | str) -> list[MsgRef]:
    """Possible output messages of a component, in port/declaration order."""
    comp = model.component(component) if isinstance(component, str) else component
    out: list[MsgRef] = []
    for p in comp.ports:
        for m in port_messages(model, comp, p, OUTPUT):
            out.append(MsgRef(p.name, m.name))
    return out


def msg_names(refs: Iterable[MsgRef]) -> set[str]:
    return {r.message for r in refs}


# ---------------------------------------------------------------------------
# Structural helper functions


def structural_query(hsm: Hsm, kind: str, element: str):
    """Structural queries over an HSM: child, parent, parents, root, in_t, out_t.

    `child` returns all states inside the given state at any depth; `parent`
    is the first-level container; `parents` is transitive and ends at the root.
    """
    if kind == "root":
        return ROOT_ID
    if kind == "child":
        return [s.id for s in hsm.descendants(element)]
    if kind == "parent":
        p = hsm.parent(element)
        return p.id if p else None
    if kind == "parents":
        return [s.id for s in hsm.parents(element)]
    if kind == "in_t":
        return [t.id for t in hsm.in_t(element)]
    if kind == "out_t":
        return [t.id for t in hsm.out_t(element)]
    raise ModelError(f"unknown structural query {kind!r}")


def handled(hsm: Hsm, sid: str) -> set[MsgRef]:
    """Triggers of outgoing transitions of a state and of all its ancestors."""
    s = hsm.state(sid)
    if s.is_pseudo:
        raise ModelError(f"handled() is defined on basic/composite states, got {s.kind} {sid!r}")
    refs: set[MsgRef] = set()
    for t in hsm.out_t(sid):
        refs.update(t.trig)
    for anc in hsm.parents(sid):
        for t in hsm.out_t(anc.id):
            refs.update(t.trig)
    return refs


def deadlock(hsm: Hsm, sid: str) -> bool:
    """True iff the state and its parents handle no message at all."""
    s = hsm.state(sid)
    if s.kind != BASIC:
        raise ModelError(f"deadlock() is defined on basic states, got {s.kind} {sid!r}")
    return not handled(hsm, sid)


def _trig_matches(t: Transition, message) -> bool:
    if isinstance(message, MsgRef):
        return message in t.trig or any(r.message == message.message and r.port == message.port for r in t.trig)
    return any(r.message == message for r in t.trig)


def next_t(hsm: Hsm, sid: str, message) -> Optional[Transition]:
    """First outgoing transition of `sid` or an ancestor (bottom-up) triggered
    by `message`; `message` may be a bare name or a MsgRef."""
    chain = [hsm.state(sid)] + hsm.parents(sid)
    for s in chain:
        for t in hsm.out_t(s.id):
            if _trig_matches(t, message):
                return t
    return None


def next_s(hsm: Hsm, sid: str, history: Mapping[str, str]) -> Optional[str]:
    """Last visited state inside a composite; falls back to its initial
    pseudo-state; None when the composite has neither."""
    s = hsm.state(sid)
    if s.kind != COMPOSITE:
        raise ModelError(f"next_s() is defined on composite states, got {s.kind} {sid!r}")
    if sid in history:
        return history[sid]
    for c in hsm.children(sid):
        if c.kind == INITIAL:
            return c.id
    return None


def up_s(hsm: Hsm, sid: str, t: Transition) -> list[str]:
    """Bottom-up chain from `sid` to (inclusive) the source of `t`."""
    chain = [hsm.state(sid)] + hsm.parents(sid)
    out = []
    for s in chain:
        out.append(s.id)
        if s.id == t.src:
            return out
    raise ModelError(f"transition {t.id!r} does not originate from {sid!r} or an ancestor")


def u_h(hsm: Hsm, sid: str, history: Mapping[str, str]) -> dict[str, str]:
    """Record `sid` as the last visited child of its parent (basic states only).

    Returns a new mapping; the input is never mutated.
    """
    s = hsm.state(sid)
    h = dict(history)
    if s.kind == BASIC and s.parent is not None:
        h[s.parent] = sid
    return h


# ---------------------------------------------------------------------------
# Well-formedness validation


@dataclass(frozen=True)
class Violation:
    code: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.element}: {self.message}"


def _crossing_allowed(hsm: Hsm, t: Transition) -> bool:
    src, des = hsm.state(t.src), hsm.state(t.des)
    if src.parent == des.parent:
        return True
    # boundary hops: into an entry point of a sibling composite, or out of an
    # exit point to the enclosing scope
    if des.kind == ENTRY_POINT and des.parent is not None:
        if hsm.state(des.parent).parent == src.parent:
            return True
    if src.kind == EXIT_POINT and src.parent is not None:
        if hsm.state(src.parent).parent == des.parent:
            return True
    return False


def _validate_hsm(model: SystemModel, comp: Component, violations: list[Violation]) -> None:
    hsm = comp.behavior
    assert hsm is not None
    where = f"{comp.name}"
    inputs = set(inp(model, comp))

    names_seen: dict[tuple[str, str], str] = {}
    for s in hsm.states.values():
        if s.id == ROOT_ID:
            continue
        key = (s.parent or ROOT_ID, s.name)
        if key in names_seen:
            violations.append(Violation("DuplicateName", f"{where}.{s.id}",
                                        f"state name {s.name!r} duplicated inside {key[0]!r}"))
        names_seen[key] = s.id
        if s.is_pseudo and s.children:
            violations.append(Violation("PseudoChildren", f"{where}.{s.id}",
                                        "pseudo-states cannot contain states"))
        if s.is_pseudo and (s.entry or s.exit):
            violations.append(Violation("PseudoAction", f"{where}.{s.id}",
                                        "only basic/composite states carry entry/exit actions"))
        if s.kind == HISTORY:
            violations.append(Violation("ExplicitHistory", f"{where}.{s.id}",
                                        "history is implicit; explicit history states are not allowed"))

    for sid, s in hsm.states.items():
        if s.kind == COMPOSITE or sid == ROOT_ID:
            initials = [c for c in hsm.children(sid) if c.kind == INITIAL]
            if len(initials) > 1:
                violations.append(Violation("MultipleInitial", f"{where}.{sid}",
                                            f"{len(initials)} initial states inside {sid!r}"))

    for t in hsm.transitions:
        tref = f"{where}.{t.id}"
        src = hsm.state(t.src)
        if t.guard is not None and src.kind != CHOICE:
            violations.append(Violation("GuardOnNonChoice", tref,
                                        f"guarded transition from non-choice state {t.src!r}"))
        if t.trig and src.is_pseudo:
            violations.append(Violation("TriggerOnPseudo", tref,
                                        f"triggered transition from pseudo-state {t.src!r}"))
        if not _crossing_allowed(hsm, t):
            violations.append(Violation("CrossBoundary", tref,
                                        f"transition crosses a state boundary ({t.src!r} -> {t.des!r})"))
        for r in t.trig:
            if r not in inputs:
                violations.append(Violation("UnknownTrigger", tref,
                                            f"trigger {r} is not an input of component {comp.name!r}"))

    # disjoint triggers among transitions leaving the same basic/composite state
    by_src: dict[str, list[Transition]] = {}
    for t in hsm.transitions:
        by_src.setdefault(t.src, []).append(t)
    for sid, ts in by_src.items():
        s = hsm.state(sid)
        if s.is_pseudo:
            if s.kind != CHOICE and len(ts) > 1:
                violations.append(Violation("MultiOutPseudo", f"{where}.{sid}",
                                            f"pseudo-state with {len(ts)} outgoing transitions"))
            continue
        for i, a in enumerate(ts):
            for b in ts[i + 1:]:
                overlap = set(a.trig) & set(b.trig)
                if overlap:
                    violations.append(Violation("NonDisjointTriggers", f"{where}.{a.id}/{b.id}",
                                                f"overlapping triggers {sorted(map(str, overlap))}"))


def validate(model: SystemModel) -> list[Violation]:
    """Check every Def.-8 constraint plus connector compatibility.

    Violations are data, not failures; an empty list means the model is
    well-formed (it may still be partial).
    """
    violations: list[Violation] = []

    seen = set()
    for i in model.interfaces:
        if i.name in seen:
            violations.append(Violation("DuplicateName", i.name, "duplicate interface"))
        seen.add(i.name)
        mseen = set()
        for m, _d in i.entries:
            if m.name in mseen:
                violations.append(Violation("DuplicateName", f"{i.name}.{m.name}", "duplicate message"))
            mseen.add(m.name)
            pseen = set()
            for pname, ptype in m.payload:
                if pname in pseen:
                    violations.append(Violation("DuplicateName", f"{i.name}.{m.name}.{pname}",
                                                "duplicate payload field"))
                pseen.add(pname)
                if ptype not in ("int", "bool", "string"):
                    violations.append(Violation("UnknownType", f"{i.name}.{m.name}.{pname}",
                                                f"unsupported payload type {ptype!r}"))

    cseen = set()
    uses_timing = False
    for c in model.components:
        if c.name in cseen:
            violations.append(Violation("DuplicateName", c.name, "duplicate component"))
        cseen.add(c.name)
        pseen = set()
        for p in c.ports:
            if p.name in pseen:
                violations.append(Violation("DuplicateName", f"{c.name}.{p.name}", "duplicate port"))
            pseen.add(p.name)
            if model.interface(p.interface) is None:
                violations.append(Violation("UnknownInterface", f"{c.name}.{p.name}",
                                            f"unknown interface {p.interface!r}"))
            elif p.interface == TIMING_INTERFACE:
                uses_timing = True
        vseen = set()
        for v in c.variables:
            if v.name in vseen:
                violations.append(Violation("DuplicateName", f"{c.name}.{v.name}", "duplicate variable"))
            vseen.add(v.name)

    if uses_timing:
        ti = model.interface(TIMING_INTERFACE)
        ok = ti is not None and ti.find(START_TIMER) is not None and ti.find(TIMEOUT) is not None \
            and ti.find(START_TIMER)[1] == INPUT and ti.find(TIMEOUT)[1] == OUTPUT
        if not ok:
            violations.append(Violation("TimingInterface", TIMING_INTERFACE,
                                        "timing interface must declare (startTimer, input) and (timeout, output)"))

    for (a, b) in model.connectors:
        pa = pb = None
        for (cn, pn), tag in ((a, "a"), (b, "b")):
            if not model.has_component(cn) or model.component(cn).port(pn) is None:
                violations.append(Violation("UnknownPort", f"{cn}.{pn}", "connector references unknown port"))
            elif tag == "a":
                pa = model.component(cn).port(pn)
            else:
                pb = model.component(cn).port(pn)
        if pa is None or pb is None:
            continue
        if pa.interface != pb.interface:
            violations.append(Violation("ConnectorTypeMismatch", f"{a[0]}.{a[1]}--{b[0]}.{b[1]}",
                                        f"interface mismatch {pa.interface!r} vs {pb.interface!r}"))
        if int(pa.conjugated) + int(pb.conjugated) != 1:
            violations.append(Violation("ConnectorConjugation", f"{a[0]}.{a[1]}--{b[0]}.{b[1]}",
                                        "exactly one end of a connector must be conjugated"))

    for c in model.components:
        if c.level is not None and c.level not in LEVELS:
            violations.append(Violation("UnknownLevel", c.name, f"unknown completeness level {c.level!r}"))
        if c.behavior is not None:
            _validate_hsm(model, c, violations)
            from . import actions as _actions  # local import: actions depends on model
            _actions.check_component(model, c, violations)

    return violations
