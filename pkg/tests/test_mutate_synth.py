"""Mutation robustness and the large-model analysis cross-check."""

import pytest

from pmx import model as M
from pmx.analysis import Setting, analyze
from pmx.mutate import mutate_model
from pmx.parser import parse_model
from pmx.printer import serialize_model
from pmx.refine import refine_model
from pmx.synth import synth_model


class TestFuzzGate:
    def test_mutants_stay_analyzable_and_refinable_for_100_seeds(self, traffic_model):
        for seed in range(1, 101):
            percent = 10 + (seed % 9) * 10
            mutant = mutate_model(traffic_model, percent, seed)
            # parseability: the canonical text round-trips
            text = serialize_model(mutant)
            reparsed = parse_model(text)
            assert serialize_model(reparsed) == text, f"seed {seed}"
            setting = Setting({c.name: "partial" for c in mutant.components})
            analyze(mutant, setting)
            refined, _ = refine_model(mutant, setting)
            assert M.validate(refined) == [], f"seed {seed}"

    def test_removal_ratio_is_respected(self, traffic_model):
        def size(m):
            return sum(len(c.behavior.descendants("root")) + len(c.behavior.transitions)
                       for c in m.components if c.behavior)

        total = size(traffic_model)
        for percent in (10, 50, 90):
            mutant = mutate_model(traffic_model, percent, 3)
            removed = total - size(mutant)
            assert removed >= (percent / 100) * total - 1


class TestLargeModelAnalysis:
    def test_sets_match_an_independent_naive_rescan(self):
        model = synth_model(350, 620, seed=1)
        setting = Setting({c.name: "partial" for c in model.components})
        report = analyze(model, setting)
        for comp in model.components:
            h = comp.behavior
            rep = report.components[comp.name]
            inputs = set(M.inp(model, comp))
            states = {s.id: s for s in h.descendants(M.ROOT_ID)}
            states[M.ROOT_ID] = h.root

            def outs(sid):
                return [t for t in h.transitions if t.src == sid]

            def handled_naive(sid):
                got = set()
                cur = sid
                while cur is not None:
                    for t in outs(cur):
                        got.update(t.trig)
                    cur = states[cur].parent if cur != M.ROOT_ID else None
                return got

            p1 = sorted(s.id for s in states.values()
                        if s.kind == M.COMPOSITE or s.id == M.ROOT_ID
                        if not any(states[c].kind == M.INITIAL for c in s.children))
            p4 = sorted(s.id for s in states.values()
                        if s.kind == M.BASIC and not handled_naive(s.id))
            p5 = sorted(s.id for s in states.values()
                        if s.kind == M.BASIC and (inputs - handled_naive(s.id)))
            p10 = sorted(t.id for t in h.transitions
                         if states[t.src].kind in (M.BASIC, M.COMPOSITE) and not t.trig)
            p11 = sorted(s.id for s in states.values() if s.kind == M.BASIC)
            assert sorted(rep.p1) == p1
            assert sorted(rep.p4) == p4
            assert sorted(rep.p5) == p5
            assert sorted(rep.p10) == p10
            assert sorted(rep.p11) == p11
