"""Deterministic synthetic model generator for benchmarks and trend
experiments. Produces well-formed ring-connected systems whose HSMs mix
nesting, choice points, timers and trigger-less transitions."""

from __future__ import annotations

import random

from . import actions as A
from . import model as M

_BUS_MESSAGES = ["m1", "m2", "m3", "m4", "m5"]


def synth_model(n_states: int = 350, n_transitions: int = 620,
                n_components: int = 8, seed: int = 0,
                name: str = "Synth") -> M.SystemModel:
    rng = random.Random(seed)
    model = M.SystemModel(name=name)
    bus = M.Interface("BusI", [(M.MessageDecl(m), M.INPUT) for m in _BUS_MESSAGES])
    model.interfaces.append(bus)
    model.interfaces.append(M.Interface(M.TIMING_INTERFACE, [
        (M.MessageDecl(M.START_TIMER, (("delay", "int"),)), M.INPUT),
        (M.MessageDecl(M.TIMEOUT), M.OUTPUT),
    ]))

    per_comp = max(2, n_states // n_components)
    trans_per_comp = max(1, n_transitions // n_components)
    for i in range(n_components):
        comp = M.Component(name=f"C{i}")
        comp.ports.append(M.Port("inP", "BusI", conjugated=False))
        comp.ports.append(M.Port("outP", "BusI", conjugated=True))
        comp.ports.append(M.Port("tmr", M.TIMING_INTERFACE, conjugated=True))
        comp.variables.append(M.Variable("v", "int", 0))
        comp.behavior = _synth_hsm(model, comp, per_comp, trans_per_comp, rng)
        model.components.append(comp)
    for i in range(n_components):
        model.connectors.append(((f"C{i}", "outP"), (f"C{(i + 1) % n_components}", "inP")))
    return model


def _synth_hsm(model: M.SystemModel, comp: M.Component, n_states: int,
               n_transitions: int, rng: random.Random) -> M.Hsm:
    hsm = M.Hsm()
    scopes = [M.ROOT_ID]
    basics_by_scope: dict[str, list[str]] = {M.ROOT_ID: []}
    choices: list[str] = []
    counter = 0

    hsm.add_state(M.State("ini", "ini", M.INITIAL, parent=M.ROOT_ID))
    made = 1
    while made < n_states:
        counter += 1
        scope = scopes[rng.randrange(len(scopes))]
        roll = rng.random()
        if roll < 0.12 and len(scopes) < max(2, n_states // 12):
            sid = f"cmp{counter}"
            hsm.add_state(M.State(sid, sid, M.COMPOSITE, parent=scope))
            scopes.append(sid)
            basics_by_scope[sid] = []
            made += 1
            if made < n_states and rng.random() < 0.7:
                iid = f"ini{counter}"
                hsm.add_state(M.State(iid, iid, M.INITIAL, parent=sid))
                made += 1
        elif roll < 0.2:
            sid = f"ch{counter}"
            hsm.add_state(M.State(sid, sid, M.CHOICE, parent=scope))
            choices.append(sid)
            made += 1
        else:
            sid = f"s{counter}"
            hsm.add_state(M.State(sid, sid, M.BASIC, parent=scope))
            basics_by_scope[scope].append(sid)
            made += 1

    tcount = 0

    def add_t(src, des, trig=(), guard=None, act=None):
        nonlocal tcount
        tcount += 1
        hsm.add_transition(M.Transition(f"t{tcount}", src, des, tuple(trig), guard, act))

    # wire each initial to a sibling, and give choices guarded ways out
    for s in list(hsm.states.values()):
        if s.kind == M.INITIAL:
            sibs = basics_by_scope.get(s.parent) or []
            if sibs:
                add_t(s.id, sibs[0])
        if s.kind == M.CHOICE:
            sibs = basics_by_scope.get(s.parent) or []
            for k, target in enumerate(sibs[:2]):
                add_t(s.id, target, guard=A.Binary("==", A.Var("v"), A.Lit(k)))

    inputs = list(M.inp(model, comp))
    attempts = 0
    while tcount < n_transitions and attempts < n_transitions * 30:
        attempts += 1
        scope = scopes[rng.randrange(len(scopes))]
        sibs = basics_by_scope.get(scope) or []
        if len(sibs) < 1:
            scope = M.ROOT_ID
            sibs = basics_by_scope[M.ROOT_ID]
            if not sibs:
                break
        src = sibs[rng.randrange(len(sibs))]
        des = sibs[rng.randrange(len(sibs))]
        existing = {r for t in hsm.out_t(src) for r in t.trig}
        free = [r for r in inputs if r not in existing]
        if not free:
            continue
        if rng.random() < 0.1:
            add_t(src, des)  # not-takeable on purpose
        else:
            trig = [free[rng.randrange(len(free))]]
            act = None
            if rng.random() < 0.3:
                act = A.ActionBlock((A.Assign("v", A.Binary("+", A.Var("v"), A.Lit(1))),))
            add_t(src, des, trig=trig, act=act)
    return hsm
