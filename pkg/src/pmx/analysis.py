"""Static analysis of a system model against the execution semantics.

Computes the per-component problematic-element sets P1..P6 and P9..P11
(progress and reachability defects), the per-component partial-neighbour
flag P8, and the system-level missing-input set P7 contributed by absent
components over the connectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import model as M


@dataclass
class Setting:
    """Per-component completeness levels; unannotated components are complete."""

    levels: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def parse(text: str) -> "Setting":
        levels = {}
        if text:
            for part in text.split(","):
                part = part.strip()
                if not part:
                    continue
                if "=" not in part:
                    raise M.ModelError(f"bad setting entry {part!r}, expected name=level")
                name, level = part.split("=", 1)
                level = {"absent/ignored": M.ABSENT, "ignored": M.ABSENT}.get(level.strip(), level.strip())
                if level not in M.LEVELS:
                    raise M.ModelError(f"unknown completeness level {level!r}")
                levels[name.strip()] = level
        return Setting(levels)

    def for_model(self, model: M.SystemModel) -> dict[str, str]:
        out = {}
        for c in model.components:
            out[c.name] = self.levels.get(c.name, c.level or M.COMPLETE)
        for name in self.levels:
            if not model.has_component(name):
                raise M.ModelError(f"setting references unknown component {name!r}")
        return out


@dataclass
class ComponentReport:
    level: str
    p1: list[str] = field(default_factory=list)  # composites missing an initial state
    p2: list[str] = field(default_factory=list)  # childless composites
    p3: list[str] = field(default_factory=list)  # broken-chain pseudo-states
    p4: list[str] = field(default_factory=list)  # deadlock basic states
    p5: dict[str, list[M.MsgRef]] = field(default_factory=dict)  # basic state -> unhandled inputs
    p6: list[str] = field(default_factory=list)  # choice-points (all of them)
    p8: bool = False
    p9: list[str] = field(default_factory=list)  # isolated states
    p10: list[str] = field(default_factory=list)  # not-takeable transitions
    p11: list[str] = field(default_factory=list)  # basic states (steering targets)
    inputs: list[str] = field(default_factory=list)   # structural info for absent components
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "P1": list(self.p1), "P2": list(self.p2), "P3": list(self.p3),
            "P4": list(self.p4),
            "P5": {s: [str(r) for r in refs] for s, refs in self.p5.items()},
            "P6": list(self.p6), "P8": self.p8, "P9": list(self.p9),
            "P10": list(self.p10), "P11": list(self.p11),
            "inputs": list(self.inputs), "outputs": list(self.outputs),
        }


@dataclass
class AnalysisReport:
    components: dict[str, ComponentReport] = field(default_factory=dict)
    p7: list[str] = field(default_factory=list)  # missing input messages (names)

    def to_json(self) -> dict:
        out: dict = {name: rep.to_json() for name, rep in self.components.items()}
        out["P7"] = list(self.p7)
        return out


def analyze_hsm(model: M.SystemModel, comp: M.Component, exclude_pmx: bool = True) -> ComponentReport:
    """The section 4.1 queries over one component's HSM, assumed partial."""
    rep = ComponentReport(level=M.PARTIAL, p8=True)
    hsm = comp.behavior if comp.behavior is not None else M.Hsm()
    inputs = M.inp(model, comp)

    for s in [hsm.root] + hsm.descendants(M.ROOT_ID):
        if s.kind == M.COMPOSITE:
            kids = hsm.children(s.id)
            if not any(c.kind == M.INITIAL for c in kids):
                rep.p1.append(s.id)
            if not kids:
                rep.p2.append(s.id)
        if s.is_pseudo and s.kind not in (M.HISTORY, M.CHOICE):
            if not hsm.out_t(s.id):
                rep.p3.append(s.id)
        if s.kind == M.BASIC:
            rep.p11.append(s.id)
            h = M.handled(hsm, s.id)
            if not h:
                rep.p4.append(s.id)
            missing = [r for r in inputs if r not in h]
            if missing:
                rep.p5[s.id] = missing
        if s.kind == M.CHOICE:
            rep.p6.append(s.id)
        if s.id != M.ROOT_ID and s.kind not in (M.INITIAL, M.HISTORY):
            if exclude_pmx and s.id.startswith(M.PMX_PREFIX + "dec"):
                pass  # refinement-inserted decision points are not isolated defects
            elif not hsm.in_t(s.id):
                rep.p9.append(s.id)

    for t in hsm.transitions:
        if hsm.state(t.src).kind in (M.BASIC, M.COMPOSITE) and not t.trig:
            rep.p10.append(t.id)
    return rep


def analyze(model: M.SystemModel, setting: Setting | str) -> AnalysisReport:
    """Analyze every component at its completeness level.

    Partial components get the full defect sets; complete components report
    nothing; absent components are described structurally (their possible
    inputs and outputs) since their behavior is discarded.
    """
    if isinstance(setting, str):
        setting = Setting.parse(setting)
    levels = setting.for_model(model)
    report = AnalysisReport()
    for comp in model.components:
        level = levels[comp.name]
        if level == M.PARTIAL:
            rep = analyze_hsm(model, comp)
        else:
            rep = ComponentReport(level=level)
            if level == M.ABSENT:
                rep.inputs = sorted(M.msg_names(M.inp(model, comp)))
                rep.outputs = sorted(M.msg_names(M.outp(model, comp)))
        rep.level = level
        report.components[comp.name] = rep

    report.p7 = sorted(missing_inputs(model, setting))
    return report


def missing_inputs(model: M.SystemModel, setting: Setting | str) -> set[str]:
    """P7: inputs of partial/complete components that only absent components
    can produce, computed connector by connector."""
    if isinstance(setting, str):
        setting = Setting.parse(setting)
    levels = setting.for_model(model)
    out: set[str] = set()
    for (a, b) in model.connectors:
        for (recv, send) in ((a, b), (b, a)):
            rc, rp = recv
            sc, sp = send
            if levels[rc] == M.ABSENT or levels[sc] != M.ABSENT:
                continue
            comp = model.component(rc)
            port = comp.port(rp)
            if port is None:
                continue
            receivable = {m.name for m in M.port_messages(model, comp, port, M.INPUT)}
            sender = model.component(sc)
            sport = sender.port(sp)
            producible = {m.name for m in M.port_messages(model, sender, sport, M.OUTPUT)}
            out |= receivable & producible
    return out
