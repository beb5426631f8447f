"""Automatic refinement of partial models.

System-level pass: add the debugging interface and agent, wire partial and
absent components to it, then rewrite each refined component's HSM.

HSM pass: per composite (root first, then by increasing nesting) insert a
decision point and apply the nine fixes: missing children/initials, broken
chains, non-exhaustive choice guards, deadlock states and unhandled messages,
isolated states, not-takeable transitions, and boundary entry/exit wiring so
execution can be steered across nesting levels. Every transition entering a
decision point gains a probe action that asks the input provider for a
selection; every transition leaving one is guarded on the selection variable.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import actions as A
from . import model as M
from .analysis import ComponentReport, Setting, analyze_hsm


class RefineError(M.PmxError):
    pass


@dataclass
class HsmRefinement:
    """Bidirectional bookkeeping for one component's refinement."""

    org_map: dict[str, str] = field(default_factory=dict)  # surviving element -> original
    added: set[str] = field(default_factory=set)
    modified: set[str] = field(default_factory=set)
    dec_points: dict[str, str] = field(default_factory=dict)  # composite -> dec_p
    introduced_vars: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "org": dict(sorted(self.org_map.items())),
            "introduced_vars": list(self.introduced_vars),
            "dec_points": dict(sorted(self.dec_points.items())),
            "added": sorted(self.added),
            "modified": sorted(self.modified),
        }


@dataclass
class RefinementMetadata:
    components: dict[str, HsmRefinement] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {name: r.to_json() for name, r in sorted(self.components.items())}

    def org(self, element: str, component: str | None = None) -> str | None:
        """Original id for a refined element; None for added elements."""
        scopes = [self.components[component]] if component else list(self.components.values())
        for r in scopes:
            if element in r.added:
                return None
            if element in r.org_map:
                return r.org_map[element]
        if element.startswith(M.PMX_PREFIX):
            return None
        return element


def org(metadata: RefinementMetadata, element: str, component: str | None = None) -> str | None:
    return metadata.org(element, component)


def negated_disjunction_guard(hsm: M.Hsm, choice_id: str):
    """Negation of the disjunction of a choice-point's outgoing guards.

    Guard-less outgoing transitions count as `true`; a choice with no
    outgoing transitions yields the literal `true` (the empty disjunction
    is false).
    """
    if hsm.state(choice_id).kind != M.CHOICE:
        raise RefineError(f"{choice_id!r} is not a choice-point")
    outs = hsm.out_t(choice_id)
    if not outs:
        return A.Lit(True)
    disj = None
    for t in outs:
        g = t.guard if t.guard is not None else A.Lit(True)
        disj = g if disj is None else A.Binary("||", disj, g)
    return A.Unary("!", disj)


def _append_probe(t: M.Transition, dec_id: str) -> None:
    probe = A.Probe(dec_id)
    stmts = (t.act.statements if t.act else ()) + (probe,)
    t.act = A.ActionBlock(stmts)


class _HsmRefiner:
    def __init__(self, model: M.SystemModel, comp: M.Component, report: ComponentReport):
        self.model = model
        self.comp = comp
        self.hsm = comp.behavior
        self.report = report
        self.meta = HsmRefinement()
        self.t_counter = 0

    def _tid(self) -> str:
        self.t_counter += 1
        return f"{M.PMX_PREFIX}t{self.t_counter}"

    def _add_state(self, parent: str, kind: str, name: str, sid: str) -> M.State:
        s = self.hsm.add_state(M.State(sid, name, kind, parent=parent))
        self.meta.added.add(sid)
        return s

    def _add_trans(self, src: str, des: str, trig=(), guard=None) -> M.Transition:
        t = self.hsm.add_transition(M.Transition(self._tid(), src, des, tuple(trig), guard))
        self.meta.added.add(t.id)
        return t

    def refine(self) -> HsmRefinement:
        hsm = self.hsm
        for sid in list(hsm.states):
            if sid.startswith(M.PMX_PREFIX):
                raise RefineError(f"{self.comp.name}: element id {sid!r} uses the reserved prefix")
            self.meta.org_map[sid] = sid
        for t in hsm.transitions:
            if t.id.startswith(M.PMX_PREFIX):
                raise RefineError(f"{self.comp.name}: element id {t.id!r} uses the reserved prefix")
            self.meta.org_map[t.id] = t.id
        self.meta.org_map.pop(M.ROOT_ID, None)

        # defect sets frozen at entry; fixes for elements this pass introduces
        # are handled explicitly below
        p2 = set(self.report.p2)
        p9 = set(self.report.p9)
        p10 = set(self.report.p10)

        inputs = list(M.inp(self.model, self.comp))

        if any(v.name == M.SEL_VAR for v in self.comp.variables):
            raise RefineError(f"{self.comp.name}: variable name {M.SEL_VAR!r} is reserved")
        self.comp.variables.append(M.Variable(M.SEL_VAR, "int", -1))
        self.meta.introduced_vars.append(M.SEL_VAR)

        for s_c in hsm.composites():
            self._refine_composite(s_c, p2, p9, p10, inputs)
        return self.meta

    def _refine_composite(self, s_c: M.State, p2, p9, p10, inputs) -> None:
        hsm = self.hsm
        kids0 = list(hsm.children(s_c.id))
        scope = s_c.id

        # (1) the decision point
        dec = self._add_state(scope, M.CHOICE, "dec_p", f"{M.PMX_PREFIX}dec_{scope}")
        self.meta.dec_points[scope] = dec.id
        sel_k = 0
        entering: list[M.Transition] = []

        def leave(src_point: str, des: str) -> M.Transition:
            nonlocal sel_k
            t = self._add_trans(src_point, des, guard=A.Binary("==", A.Var(M.SEL_VAR), A.Lit(sel_k)))
            sel_k += 1
            return t

        # (2) childless composite: give it a basic child. The same fix applies
        # when no child can be steered to at all (for instance only choice
        # points survive); without one the decision point would have no exit
        # and the progress guarantee would break.
        steerable = any(c.kind in (M.BASIC, M.COMPOSITE) or
                        (c.kind in (M.JUNCTION, M.ENTRY_POINT, M.EXIT_POINT) and c.id in p9)
                        for c in kids0)
        if scope in p2 or not steerable:
            self._add_state(scope, M.BASIC, f"{M.PMX_PREFIX}b_{scope}", f"{M.PMX_PREFIX}b_{scope}")

        # (3) missing initial state
        if not any(c.kind == M.INITIAL for c in kids0):
            self._add_state(scope, M.INITIAL, f"{M.PMX_PREFIX}in_{scope}", f"{M.PMX_PREFIX}in_{scope}")

        # (4) broken chains: pseudo-states with no way out go to the decision
        # point (covers the initial state just added; boundary points added by
        # the enclosing pass are wired in step 9 of this pass instead)
        for s in hsm.children(scope):
            if not s.is_pseudo or s.kind in (M.CHOICE, M.HISTORY):
                continue
            if s.id.startswith(M.PMX_PREFIX + "en_") or s.id.startswith(M.PMX_PREFIX + "ex_"):
                continue
            if not hsm.out_t(s.id):
                entering.append(self._add_trans(s.id, dec.id))

        # (5) non-exhaustive choice guards: guarded fallback into the decision point
        for s in hsm.children(scope):
            if s.kind != M.CHOICE or s.id == dec.id:
                continue
            t1 = self._add_trans(s.id, dec.id, guard=negated_disjunction_guard(hsm, s.id))
            entering.append(t1)

        # (6) deadlock states, unhandled messages, steering step 1: every basic
        # child forwards its unhandled inputs to the decision point
        for s in hsm.children(scope):
            if s.kind != M.BASIC:
                continue
            handled = M.handled(hsm, s.id)
            missing = [r for r in inputs if r not in handled]
            if missing:
                entering.append(self._add_trans(s.id, dec.id, trig=missing))

        # (7) isolated states and steering step 2: fan out from the decision
        # point to every basic and composite child (composites resume through
        # their implicit history) and to isolated junction/entry/exit children
        for s in hsm.children(scope):
            if s.id == dec.id:
                continue
            if s.kind in (M.BASIC, M.COMPOSITE):
                leave(dec.id, s.id)
            elif s.kind in (M.JUNCTION, M.ENTRY_POINT, M.EXIT_POINT) and s.id in p9:
                leave(dec.id, s.id)

        # (8) not-takeable transitions are retargeted to leave the decision
        # point; relocated to the end so document order keeps matching the
        # selection numbering
        child_ids = {c.id for c in hsm.children(scope)}
        for t in list(hsm.transitions):
            if t.id in p10 and t.src in child_ids:
                t.src = dec.id
                t.guard = A.Binary("==", A.Var(M.SEL_VAR), A.Lit(sel_k))
                sel_k += 1
                self.meta.modified.add(t.id)
                hsm.transitions.remove(t)
                hsm.transitions.append(t)

        # (9) steering across boundaries: entry/exit points for each composite
        # child, and hops between this decision point and the enclosing one
        for s_cc in [c for c in hsm.children(scope) if c.kind == M.COMPOSITE and c.id not in self.meta.added]:
            en = self._add_state(s_cc.id, M.ENTRY_POINT,
                                 f"{M.PMX_PREFIX}en_{s_cc.id}", f"{M.PMX_PREFIX}en_{s_cc.id}")
            ex = self._add_state(s_cc.id, M.EXIT_POINT,
                                 f"{M.PMX_PREFIX}ex_{s_cc.id}", f"{M.PMX_PREFIX}ex_{s_cc.id}")
            leave(dec.id, en.id)  # to_child
            entering.append(self._add_trans(ex.id, dec.id))  # from_child
        if scope != M.ROOT_ID:
            own_ex = f"{M.PMX_PREFIX}ex_{scope}"
            own_en = f"{M.PMX_PREFIX}en_{scope}"
            if own_ex in hsm.states:
                leave(dec.id, own_ex)  # to_parent
                entering.append(self._add_trans(own_en, dec.id))  # from_parent

        for t in entering:
            _append_probe(t, dec.id)


def refine_hsm(model: M.SystemModel, comp: M.Component,
               report: ComponentReport | None = None) -> HsmRefinement:
    """Refine one component's HSM in place; returns the refinement metadata."""
    if comp.behavior is None:
        comp.behavior = M.Hsm()
    if report is None:
        report = analyze_hsm(model, comp)
    return _HsmRefiner(model, comp, report).refine()


def refine_model(model: M.SystemModel, setting: Setting | str) -> tuple[M.SystemModel, RefinementMetadata]:
    """Algorithm-1 refinement: returns a refined copy plus metadata.

    The input model is left untouched. Complete components survive verbatim;
    partial components keep their structure and gain decision-point wiring;
    absent components (and the debugging agent) get a generic machine able to
    receive anything.
    """
    if isinstance(setting, str):
        setting = Setting.parse(setting)
    levels = setting.for_model(model)
    refined = copy.deepcopy(model)
    meta = RefinementMetadata()

    if refined.interface(M.DBG_INTERFACE) is None:
        refined.interfaces.append(M.Interface(
            M.DBG_INTERFACE, [(M.MessageDecl(M.DBG_MESSAGE), M.INPUT)]))
    if refined.interface(M.TIMING_INTERFACE) is None:
        refined.interfaces.append(M.Interface(M.TIMING_INTERFACE, [
            (M.MessageDecl(M.START_TIMER, (("delay", "int"),)), M.INPUT),
            (M.MessageDecl(M.TIMEOUT), M.OUTPUT),
        ]))
    if refined.has_component(M.DBG_AGENT):
        raise RefineError(f"model already contains a component named {M.DBG_AGENT!r}")
    agent = M.Component(name=M.DBG_AGENT)
    agent.ports.append(M.Port(f"{M.PMX_PREFIX}timer", M.TIMING_INTERFACE, conjugated=True))
    refined.components.append(agent)

    for comp in refined.components:
        if comp.name == M.DBG_AGENT:
            continue
        level = levels[comp.name]
        if level == M.COMPLETE:
            continue
        dbg_port = f"{M.PMX_PREFIX}dbg"
        agent_port = f"{M.PMX_PREFIX}dbg_{comp.name}"
        comp.ports.append(M.Port(dbg_port, M.DBG_INTERFACE, conjugated=False))
        agent.ports.append(M.Port(agent_port, M.DBG_INTERFACE, conjugated=True))
        refined.connectors.append(((comp.name, dbg_port), (M.DBG_AGENT, agent_port)))
        if level == M.ABSENT:
            comp.behavior = M.Hsm()  # discard whatever behavior was there
            meta.components[comp.name] = refine_hsm(refined, comp)
        else:
            original = model.component(comp.name)
            report = analyze_hsm(model, original) if original.behavior is not None else None
            if comp.behavior is None:
                comp.behavior = M.Hsm()
            meta.components[comp.name] = refine_hsm(refined, comp, report)

    meta.components[M.DBG_AGENT] = refine_hsm(refined, agent)
    return refined, meta
