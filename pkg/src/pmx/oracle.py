"""Independent brute-force verification of the engine's formal claims on
small instances.

Contains a deliberately naive re-implementation of the nine execution rules
(sharing only the definitional action evaluator with the runtime), bounded
trace enumeration, a step-lockstep simulation check between an original and
its refined model, reachability and progress exploration, and a trace
replay used to cross-check the runtime stepper against this one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import actions as A
from . import model as M
from .runtime import POLICY_DROP, POLICY_STUCK, Trace


class BoundExceeded(M.PmxError):
    pass


@dataclass
class Bounds:
    max_states: int = 12
    max_depth: int = 6
    max_configs: int = 100_000
    max_chain: int = 60


@dataclass(frozen=True)
class OConfig:
    sigma: str
    env: tuple
    hist: tuple

    @staticmethod
    def make(sigma: str, env: dict, hist: dict) -> "OConfig":
        return OConfig(sigma, tuple(sorted(env.items())), tuple(sorted(hist.items())))

    def env_dict(self) -> dict:
        return dict(self.env)

    def hist_dict(self) -> dict:
        return dict(self.hist)


@dataclass(frozen=True)
class ODelivery:
    message: str
    port: str
    payload: tuple = ()

    def payload_dict(self) -> dict:
        return dict(self.payload)


@dataclass
class OStep:
    rule: int
    labels: list[str]
    config: Optional[OConfig]  # None when stuck
    emissions: list
    stuck: Optional[str] = None
    consumed: bool = False
    probed: Optional[str] = None  # dec_p id when a selection was taken
    selection: Optional[int] = None
    transition: Optional[str] = None


_STUCK = {2: "BrokenChain", 3: "Deadlock", 5: "UnexpectedMessage",
          7: "NoChild", 9: "NonExhaustiveGuards"}


def _ancestors(hsm: M.Hsm, sid: str) -> list[str]:
    out = []
    cur = hsm.states[sid].parent
    while cur is not None:
        out.append(cur)
        cur = hsm.states[cur].parent
    return out


def _outs(hsm: M.Hsm, sid: str) -> list[M.Transition]:
    return [t for t in hsm.transitions if t.src == sid]


def naive_step(comp: M.Component, cfg: OConfig, delivery: Optional[ODelivery],
               selection: Optional[int], policy: str = POLICY_STUCK,
               last: Optional[ODelivery] = None) -> OStep:
    """Apply exactly one execution rule, written from the rules as stated.

    `delivery` is the queue head (consumed only by rule 4/5); `selection`
    answers at most one probe during the step.
    """
    hsm = comp.behavior
    s = hsm.states[cfg.sigma]
    env = cfg.env_dict()
    hist = cfg.hist_dict()
    emissions: list = []
    probed: list[str] = []

    def ctx(payload: dict) -> A.ExecContext:
        def probe(dec_id, live_env):
            probed.append(dec_id)
            if selection is None:
                raise A.ActionError("oracle: probe with no selection")
            return selection

        return A.ExecContext(
            emit=lambda p, m, a: emissions.append((p, m, list(a))),
            payload=payload, probe=probe,
            reply=lambda m, a: emissions.append((last.port if last else "", m, list(a))),
            last_message=last.message if last else None)

    def run_blocks(blocks, payload) -> tuple[dict, list[str]]:
        nonlocal env
        labels = []
        c = ctx(payload)
        for label, block in blocks:
            if block:
                labels.append(label)
                env = A.exec_actions(env, block, c)
        return env, labels

    def done(rule, labels, sigma, transition=None, consumed=False):
        new_hist = dict(hist)
        st = hsm.states[sigma]
        if st.kind == M.BASIC and st.parent is not None:
            new_hist[st.parent] = sigma
        return OStep(rule, labels, OConfig.make(sigma, env, new_hist), emissions,
                     consumed=consumed, probed=probed[0] if probed else None,
                     selection=selection if probed else None, transition=transition)

    def stuck(rule):
        return OStep(rule, [], None, [], stuck=_STUCK[rule])

    kind = s.kind
    if kind in (M.INITIAL, M.JUNCTION, M.ENTRY_POINT, M.EXIT_POINT):
        outs = _outs(hsm, s.id)
        if not outs:
            return stuck(2)
        t = outs[0]
        payload = last.payload_dict() if last else {}
        _, labels = run_blocks([(f"act({t.id})", t.act),
                                (f"entry({t.des})", hsm.states[t.des].entry)], payload)
        return done(1, labels, t.des, transition=t.id)

    if kind == M.BASIC:
        held = set()
        for sid in [s.id] + _ancestors(hsm, s.id):
            for t in _outs(hsm, sid):
                held.update(t.trig)
        if not held:
            return stuck(3)
        if delivery is None:
            return OStep(0, [], OConfig.make(cfg.sigma, env, hist), [], consumed=False)
        match = None
        for sid in [s.id] + _ancestors(hsm, s.id):
            for t in _outs(hsm, sid):
                if any(r.message == delivery.message and r.port == delivery.port for r in t.trig):
                    match = t
                    break
            if match:
                break
        if match is None:
            if policy == POLICY_DROP:
                return OStep(5, [], OConfig.make(cfg.sigma, env, hist), [], consumed=True)
            return stuck(5)
        chain = [s.id]
        while chain[-1] != match.src:
            chain.append(hsm.states[chain[-1]].parent)
        blocks = [(f"exit({sid})", hsm.states[sid].exit) for sid in chain]
        blocks.append((f"act({match.id})", match.act))
        blocks.append((f"entry({match.des})", hsm.states[match.des].entry))
        _, labels = run_blocks(blocks, delivery.payload_dict())
        step = done(4, labels, match.des, transition=match.id, consumed=True)
        return step

    if kind == M.COMPOSITE:
        target = hist.get(s.id)
        if target is None:
            for c in hsm.children(s.id):
                if c.kind == M.INITIAL:
                    target = c.id
                    break
        if target is None:
            return stuck(7)
        _, labels = run_blocks([(f"entry({target})", hsm.states[target].entry)],
                               last.payload_dict() if last else {})
        return done(6, labels, target)

    if kind == M.CHOICE:
        payload = last.payload_dict() if last else {}
        gctx = A.ExecContext(payload=payload, last_message=last.message if last else None)
        chosen = None
        for t in _outs(hsm, s.id):
            if t.guard is None or A.eval_guard(env, t.guard, gctx):
                chosen = t
                break
        if chosen is None:
            return stuck(9)
        _, labels = run_blocks([(f"act({chosen.id})", chosen.act),
                                (f"entry({chosen.des})", hsm.states[chosen.des].entry)], payload)
        return done(8, labels, chosen.des, transition=chosen.id)

    raise M.ModelError(f"oracle: no rule for state kind {kind!r}")


def initial_config(comp: M.Component) -> Optional[OConfig]:
    hsm = comp.behavior
    for c in hsm.children(M.ROOT_ID):
        if c.kind == M.INITIAL:
            return OConfig.make(c.id, A.default_env(comp), {})
    return None


@dataclass
class BurstOutcome:
    config: Optional[OConfig]
    labels: list[str]
    emissions: list
    stuck: Optional[str] = None
    rules: list[int] = field(default_factory=list)
    transitions: list[str] = field(default_factory=list)
    sigmas: list[str] = field(default_factory=list)
    selections: list[int] = field(default_factory=list)
    pruned: bool = False
    probed_before_done: bool = False


def explore_burst(comp: M.Component, cfg: OConfig, delivery: Optional[ODelivery],
                  policy: str = POLICY_STUCK, bounds: Optional[Bounds] = None,
                  dedupe: bool = True) -> list[BurstOutcome]:
    """All run-to-completion outcomes of delivering one message, branching
    over every probe selection.

    With `dedupe` (the default) a configuration revisited within the burst is
    explored once; steering cycles through the decision points terminate
    instead of multiplying. Trace enumeration passes dedupe=False to keep
    distinct label paths, bounded by the chain cap.
    """
    bounds = bounds or Bounds()
    hsm = comp.behavior
    start = BurstOutcome(cfg, [], [], sigmas=[cfg.sigma])
    frontier = [(start, delivery, delivery)]
    out: list[BurstOutcome] = []
    seen_mid: set[tuple] = set()
    while frontier:
        o, pending, last = frontier.pop()
        if len(o.rules) >= bounds.max_chain:
            o.pruned = True
            out.append(o)
            continue
        assert o.config is not None
        sigma_kind = hsm.states[o.config.sigma].kind
        if sigma_kind == M.BASIC and pending is None:
            deadlocked = naive_step(comp, o.config, None, None, policy, last)
            if deadlocked.stuck:
                o.stuck = deadlocked.stuck
                o.rules.append(3)
            out.append(o)
            continue

        # one speculative run discovers whether this step probes; if it does,
        # branch over every option of that decision point
        first = naive_step(comp, o.config, pending, 0, policy, last)
        branches = [first]
        if first.probed:
            n = len(_outs(hsm, first.probed))
            branches = [naive_step(comp, o.config, pending, k, policy, last) for k in range(n)]
        for st in branches:
            nxt = BurstOutcome(st.config, o.labels + st.labels, o.emissions + st.emissions,
                               rules=o.rules + [st.rule],
                               transitions=o.transitions + ([st.transition] if st.transition else []),
                               sigmas=o.sigmas + ([st.config.sigma] if st.config else []),
                               selections=o.selections + ([st.selection] if st.selection is not None else []))
            if st.stuck:
                nxt.stuck = st.stuck
                nxt.config = o.config
                out.append(nxt)
                continue
            if dedupe and st.config is not None:
                key = (st.config, pending if not st.consumed and st.rule == 0 else None)
                if key in seen_mid:
                    # already explored from here, but keep the path's visit
                    # history so reachability bookkeeping survives the cut
                    nxt.pruned = True
                    out.append(nxt)
                    continue
                seen_mid.add(key)
            frontier.append((nxt, None, last))
    return out


def enumerate_traces(comp: M.Component, alphabet: list[M.MsgRef], depth: int,
                     bounds: Optional[Bounds] = None) -> set[tuple[str, ...]]:
    """Exhaustive BFS over message sequences up to `depth`, collecting the
    executed action-label sequences (prefix-closed); refined models are
    explored over every selection as well."""
    bounds = bounds or Bounds()
    _check_size(comp, bounds)
    if depth > bounds.max_depth:
        raise BoundExceeded(f"depth {depth} > bound {bounds.max_depth}")
    traces: set[tuple[str, ...]] = {()}
    init = initial_config(comp)
    if init is None:
        return traces
    starts = []
    for o in explore_burst(comp, init, None, bounds=bounds, dedupe=False):
        traces.add(tuple(o.labels))
        if o.config is not None and not o.stuck:
            starts.append((o.config, tuple(o.labels)))

    frontier = starts
    for _ in range(depth):
        nxt = []
        for cfg, prefix in frontier:
            for ref in alphabet:
                d = ODelivery(ref.message, ref.port)
                for o in explore_burst(comp, cfg, d, bounds=bounds, dedupe=False):
                    seq = prefix + tuple(o.labels)
                    traces.add(seq)
                    if o.config is not None and not o.stuck and not o.pruned:
                        nxt.append((o.config, seq))
        frontier = nxt
        if len(traces) > bounds.max_configs:
            raise BoundExceeded("trace set exceeded the configuration cap")
    return traces


def _check_size(comp: M.Component, bounds: Bounds) -> None:
    n = len(comp.behavior.states) - 1 if comp.behavior else 0
    if n > bounds.max_states:
        raise BoundExceeded(f"{comp.name}: {n} states > bound {bounds.max_states}")


# ---------------------------------------------------------------------------
# Simulation (behaviour preservation of the refinement)


@dataclass
class SimDivergence:
    component: str
    sequence: tuple
    reason: str

    def __str__(self) -> str:
        seq = ",".join(m.message for m in self.sequence)
        return f"{self.component}: after [{seq}]: {self.reason}"


def _strip_env(env: tuple, introduced: set[str]) -> tuple:
    return tuple((k, v) for (k, v) in env if k not in introduced)


def _restrict_hist(hist: tuple, composites: set[str]) -> tuple:
    return tuple((k, v) for (k, v) in hist if k in composites)


def check_simulation(original: M.SystemModel, refined: M.SystemModel, component: str,
                     introduced: Iterable[str], depth: int = 4,
                     bounds: Optional[Bounds] = None) -> Optional[SimDivergence]:
    """Lockstep check: on every input sequence up to `depth`, the refined
    machine takes the same labelled steps as the original until (if ever) the
    original gets stuck, with configurations related by equal state, equal
    environment modulo the refinement's variables, and equal history on the
    original composite states."""
    bounds = bounds or Bounds()
    oc = original.component(component)
    rc = refined.component(component)
    if oc.behavior is None:
        return None
    introduced = set(introduced)
    composites = {s.id for s in oc.behavior.states.values() if s.kind == M.COMPOSITE}
    alphabet = list(M.inp(original, oc))

    def related(a: Optional[OConfig], b: Optional[OConfig]) -> bool:
        if a is None or b is None:
            return False
        return (a.sigma == b.sigma
                and a.env == _strip_env(b.env, introduced)
                and a.hist == _restrict_hist(b.hist, composites))

    def fail(seq, reason):
        return SimDivergence(component, tuple(seq), reason)

    o_init = initial_config(oc)
    if o_init is None:
        return None  # the original cannot start; vacuously simulated
    r_init = initial_config(rc)
    if r_init is None:
        return fail((), "refined machine lost its initial state")

    def compare(seq, oo_list, ro_list):
        """One lockstep delivery; returns (config pair | None, divergence | None)."""
        if len(oo_list) != 1:
            return None, fail(seq, "original burst is not deterministic")
        if not ro_list:
            return None, fail(seq, "refined exploration produced no outcome")
        oo = oo_list[0]
        if oo.pruned:
            return None, fail(seq, "original chain exceeded the step bound")
        if oo.stuck:
            # steps before the stuck configuration still have to be matched;
            # from it onward the simulation is vacuous
            r_labels = ro_list[0].labels
            if r_labels[:len(oo.labels)] != oo.labels:
                return None, fail(seq, f"labels up to the stuck point differ: "
                                       f"{oo.labels} vs {r_labels}")
            return None, None
        if len(ro_list) > 1 or ro_list[0].selections:
            return None, fail(seq, "refined machine asked for input while the original progressed")
        ro = ro_list[0]
        if ro.stuck:
            return None, fail(seq, f"refined stuck ({ro.stuck}) while the original stepped")
        if oo.labels != ro.labels:
            return None, fail(seq, f"action labels differ: {oo.labels} vs {ro.labels}")
        if not related(oo.config, ro.config):
            return None, fail(seq, "configurations not related after the step")
        return (oo.config, ro.config), None

    pair, err = compare((), explore_burst(oc, o_init, None, bounds=bounds),
                        explore_burst(rc, r_init, None, bounds=bounds))
    if err:
        return err
    if pair is None:
        return None
    frontier = [((), pair[0], pair[1])]
    for _ in range(depth):
        nxt = []
        for seq, ocfg, rcfg in frontier:
            for ref in alphabet:
                d = ODelivery(ref.message, ref.port)
                seq2 = seq + (ref,)
                pair, err = compare(seq2, explore_burst(oc, ocfg, d, bounds=bounds),
                                    explore_burst(rc, rcfg, d, bounds=bounds))
                if err:
                    return err
                if pair is not None:
                    nxt.append((seq2, pair[0], pair[1]))
        frontier = nxt
    return None


# ---------------------------------------------------------------------------
# Reachability and progress


@dataclass
class ExploreResult:
    quiescent: set[OConfig] = field(default_factory=set)
    reached_states: set[str] = field(default_factory=set)
    fired_transitions: set[str] = field(default_factory=set)
    stuck: list[tuple[OConfig, str, str]] = field(default_factory=list)  # (config, message, reason)
    capped: bool = False


def explore_component(model: M.SystemModel, comp: M.Component,
                      bounds: Optional[Bounds] = None, policy: str = POLICY_STUCK,
                      start: Optional[OConfig] = None,
                      stop_on_stuck: bool = False) -> ExploreResult:
    bounds = bounds or Bounds()
    res = ExploreResult()
    if comp.behavior is None:
        return res
    alphabet = list(M.inp(model, comp))
    init = start or initial_config(comp)
    if init is None:
        res.stuck.append((OConfig("", (), ()), "", "MissingInitialState"))
        return res

    seen: set[OConfig] = set()
    frontier: list[OConfig] = []

    def absorb(outcomes, message: str) -> None:
        for o in outcomes:
            res.reached_states.update(o.sigmas)
            res.fired_transitions.update(o.transitions)
            if o.stuck:
                res.stuck.append((o.config, message, o.stuck))
                continue
            if o.pruned or o.config is None:
                continue
            if o.config not in seen:
                seen.add(o.config)
                frontier.append(o.config)
                res.quiescent.add(o.config)

    if start is None:
        absorb(explore_burst(comp, init, None, policy, bounds), "")
    else:
        seen.add(init)
        frontier.append(init)
        res.quiescent.add(init)
        res.reached_states.add(init.sigma)

    while frontier:
        if len(seen) > bounds.max_configs:
            res.capped = True
            break
        if stop_on_stuck and res.stuck:
            break
        cfg = frontier.pop(0)
        for ref in alphabet:
            absorb(explore_burst(comp, cfg, ODelivery(ref.message, ref.port), policy, bounds),
                   ref.message)
    return res


@dataclass
class ReachReport:
    unreached_basic: list[str]
    unreached_pseudo: list[str]
    unfired_transitions: list[str]
    from_state_failures: dict[str, list[str]]

    def ok(self) -> bool:
        return not (self.unreached_basic or self.unreached_pseudo
                    or self.unfired_transitions or self.from_state_failures)


def check_reachability(model: M.SystemModel, component: str,
                       bounds: Optional[Bounds] = None) -> ReachReport:
    """Every non-initial, non-choice, non-composite state and every
    non-initial-origin, non-choice-origin transition must be reachable; also
    re-checked from each reachable basic-state configuration."""
    bounds = bounds or Bounds()
    comp = model.component(component)
    _check_size(comp, bounds)
    hsm = comp.behavior
    state_targets_basic = {s.id for s in hsm.states.values() if s.kind == M.BASIC}
    state_targets_pseudo = {s.id for s in hsm.states.values()
                            if s.kind in (M.ENTRY_POINT, M.EXIT_POINT, M.JUNCTION)}
    trans_targets = {t.id for t in hsm.transitions
                     if hsm.states[t.src].kind not in (M.INITIAL, M.CHOICE)}

    base = explore_component(model, comp, bounds)
    unreached_basic = sorted(state_targets_basic - base.reached_states)
    unreached_pseudo = sorted(state_targets_pseudo - base.reached_states)
    unfired = sorted(trans_targets - base.fired_transitions)

    from_failures: dict[str, list[str]] = {}
    done_sigmas: set[str] = set()
    for cfg in sorted(base.quiescent, key=lambda c: (c.sigma, c.env, c.hist)):
        if cfg.sigma in done_sigmas or cfg.sigma not in state_targets_basic:
            continue
        done_sigmas.add(cfg.sigma)
        sub = explore_component(model, comp, bounds, start=cfg)
        missing = sorted((state_targets_basic | state_targets_pseudo) - sub.reached_states)
        if missing:
            from_failures[cfg.sigma] = missing
    return ReachReport(unreached_basic, unreached_pseudo, unfired, from_failures)


def check_progress(model: M.SystemModel, component: str,
                   bounds: Optional[Bounds] = None, policy: str = POLICY_STUCK
                   ) -> Optional[tuple]:
    """None when no stuck configuration is reachable under an always-answering
    provider; otherwise the first (configuration, message, reason)."""
    comp = model.component(component)
    if comp.behavior is None:
        return None
    res = explore_component(model, comp, bounds, policy=policy, stop_on_stuck=True)
    return res.stuck[0] if res.stuck else None


def attribute_stuck(model: M.SystemModel, component: str, report,
                    bounds: Optional[Bounds] = None) -> list[str]:
    """Check that every reachable stuck configuration of the unrefined
    component maps to a defect the analysis found. Returns unattributed
    descriptions (empty means the analysis is sound here)."""
    comp = model.component(component)
    if comp.behavior is None:
        return []
    crep = report.components[component]
    res = explore_component(model, comp, bounds)
    out = []
    for cfg, message, reason in res.stuck:
        sig = cfg.sigma if cfg.sigma else M.ROOT_ID
        ok = (
            (reason == "MissingInitialState" and M.ROOT_ID in crep.p1)
            or (reason == "BrokenChain" and sig in crep.p3)
            or (reason == "Deadlock" and sig in crep.p4)
            or (reason == "UnexpectedMessage" and sig in crep.p5)
            or (reason == "NoChild" and (sig in crep.p1 or sig in crep.p2))
            or (reason == "NonExhaustiveGuards" and sig in crep.p6)
        )
        if not ok:
            out.append(f"{reason} at {sig} (message {message!r}) not attributable")
    return out


# ---------------------------------------------------------------------------
# Dual-stepper cross-check


def check_trace(model: M.SystemModel, trace: Trace) -> list[str]:
    """Replay every runtime step through the naive stepper; returns
    divergence descriptions (empty means the two steppers agree)."""
    problems = []
    last_by_comp: dict[str, ODelivery] = {}
    for rec in trace.records:
        if rec.from_config is None or rec.rule == 0:
            continue
        comp = model.component(rec.component)
        cfg = OConfig.make(rec.from_config.sigma, rec.from_config.env, rec.from_config.history)
        delivery = None
        if rec.message is not None and rec.rule in (4, 5):
            delivery = ODelivery(rec.message, rec.port or "", tuple(sorted((rec.payload or {}).items())))
            last_by_comp[rec.component] = delivery
        try:
            st = naive_step(comp, cfg, delivery, rec.selection,
                            policy=POLICY_DROP if rec.dropped else POLICY_STUCK,
                            last=last_by_comp.get(rec.component))
        except M.PmxError as e:
            problems.append(f"step {rec.index}: oracle failed: {e}")
            continue
        if st.rule != rec.rule and not (rec.dropped and st.rule == 5):
            problems.append(f"step {rec.index}: rule {st.rule} != runtime {rec.rule}")
            continue
        if st.stuck:
            if rec.to_sigma != rec.from_sigma:
                problems.append(f"step {rec.index}: oracle stuck but runtime moved")
            continue
        if st.labels != rec.actions:
            problems.append(f"step {rec.index}: labels {st.labels} != {rec.actions}")
        if rec.to_config is not None:
            want = OConfig.make(rec.to_config.sigma, rec.to_config.env, rec.to_config.history)
            if st.config != want:
                problems.append(f"step {rec.index}: successor {st.config} != {want}")
    return problems
