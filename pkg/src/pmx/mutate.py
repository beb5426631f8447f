"""Seeded random removal of model elements, used to manufacture partial
models at a chosen severity for the experiments.

Removal cascades through containment: removing a state takes its descendants
and every incident transition with it. The result always serializes and
parses again; its defect sets are whatever the removals caused.
"""

from __future__ import annotations

import copy
import math
import random

from . import model as M


def _remove_states(hsm: M.Hsm, doomed: set[str]) -> None:
    full = set()
    for sid in doomed:
        full.add(sid)
        full.update(s.id for s in hsm.descendants(sid))
    hsm.transitions = [t for t in hsm.transitions if t.src not in full and t.des not in full]
    for sid in full:
        hsm.states.pop(sid, None)
    for s in hsm.states.values():
        s.children = [c for c in s.children if c not in full]


def mutate_model(model: M.SystemModel, percent: int, seed: int) -> M.SystemModel:
    """Remove ~percent% of all states and transitions, uniformly at random."""
    if not (0 <= percent <= 90):
        raise M.ModelError(f"mutation percent must be within 0..90, got {percent}")
    out = copy.deepcopy(model)
    if percent == 0:
        return out
    rng = random.Random(seed)

    pool: list[tuple[str, str, str]] = []
    for comp in out.components:
        if comp.behavior is None:
            continue
        for s in comp.behavior.descendants(M.ROOT_ID):
            pool.append((comp.name, "state", s.id))
        for t in comp.behavior.transitions:
            pool.append((comp.name, "transition", t.id))
    target = math.ceil(percent / 100 * len(pool))

    removed = 0
    alive = list(pool)
    while removed < target and alive:
        comp_name, kind, eid = alive[rng.randrange(len(alive))]
        hsm = out.component(comp_name).behavior
        before = len(hsm.descendants(M.ROOT_ID)) + len(hsm.transitions)
        if kind == "state":
            if eid not in hsm.states:
                alive = [e for e in alive if e != (comp_name, kind, eid)]
                continue
            _remove_states(hsm, {eid})
        else:
            if not hsm.has_transition(eid):
                alive = [e for e in alive if e != (comp_name, kind, eid)]
                continue
            hsm.transitions = [t for t in hsm.transitions if t.id != eid]
        after = len(hsm.descendants(M.ROOT_ID)) + len(hsm.transitions)
        removed += before - after
        alive = [(c, k, e) for (c, k, e) in alive
                 if c != comp_name or (e in hsm.states if k == "state" else hsm.has_transition(e))]
    return out
