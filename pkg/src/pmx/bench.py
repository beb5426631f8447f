"""Timing harness: analysis/refinement on a large synthetic model, rule
loading at four script sizes, and rule-selection latency over random
contexts. Medians over repeated runs; wall-clock via perf_counter."""

from __future__ import annotations

import json
import random
import statistics
import time
from dataclasses import dataclass, field

from .analysis import Setting, analyze
from .refine import refine_model
from .rules import RuleSet, parse_rules, select_rule
from .synth import synth_model


@dataclass
class BenchReport:
    model_states: int = 0
    model_transitions: int = 0
    analysis_ms: dict = field(default_factory=dict)
    refine_ms: dict = field(default_factory=dict)
    rule_loading_ms: dict = field(default_factory=dict)  # per rule count
    selection_ms: float = 0.0
    selection_samples: int = 0
    body_parse_ms: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "model": {"states": self.model_states, "transitions": self.model_transitions},
            "analysis_ms": self.analysis_ms,
            "refine_ms": self.refine_ms,
            "rule_loading_ms": self.rule_loading_ms,
            "selection_ms_median": self.selection_ms,
            "selection_samples": self.selection_samples,
            "body_parse_ms": self.body_parse_ms,
        }

    def text(self) -> str:
        lines = [
            f"synthetic model: {self.model_states} states, {self.model_transitions} transitions",
            f"analysis ms:   median {self.analysis_ms.get('median'):.1f} "
            f"(min {self.analysis_ms.get('min'):.1f}, max {self.analysis_ms.get('max'):.1f})",
            f"refinement ms: median {self.refine_ms.get('median'):.1f} "
            f"(min {self.refine_ms.get('min'):.1f}, max {self.refine_ms.get('max'):.1f})",
        ]
        for n, ms in sorted(self.rule_loading_ms.items()):
            lines.append(f"loading {n} rules: {ms:.0f} ms")
        lines.append(f"rule selection: median {self.selection_ms:.4f} ms over {self.selection_samples} contexts")
        for n, ms in sorted(self.body_parse_ms.items()):
            lines.append(f"parsing a {n}-line rule body: {ms:.1f} ms")
        return "\n".join(lines)


def _stats(samples: list[float]) -> dict:
    return {"median": statistics.median(samples), "min": min(samples), "max": max(samples)}


def generate_rule_script(n_rules: int, loc: int, seed: int = 0) -> str:
    """Rules shaped like real steering scripts: header, ~loc assignment
    lines, one select."""
    rng = random.Random(seed)
    out = []
    for i in range(n_rules):
        comp = f"C{rng.randrange(8)}"
        state = f"s{rng.randrange(50)}"
        msg = f"m{rng.randrange(5) + 1}"
        out.append(f"rule g{i} where ({comp}.{state}) when (receipt({msg})) {{")
        for k in range(max(1, loc - 2)):
            out.append(f"  x{k % 7} = {k} + {rng.randrange(100)}")
        out.append(f"  select state s{rng.randrange(50)}")
        out.append("}")
    return "\n".join(out)


def bench_rules(report: BenchReport, counts=(10, 100, 1000, 10_000),
                loc: int = 100, selections: int = 1000, seed: int = 0) -> RuleSet:
    rng = random.Random(seed)
    rs = None
    for n in counts:
        script = generate_rule_script(n, loc, seed)
        t0 = time.perf_counter()
        rs = parse_rules(script)
        report.rule_loading_ms[n] = (time.perf_counter() - t0) * 1000

    samples = []
    env = {"v": 0}
    for _ in range(selections):
        comp = f"C{rng.randrange(8)}"
        state = f"s{rng.randrange(50)}"
        msg = f"m{rng.randrange(5) + 1}"
        t0 = time.perf_counter()
        select_rule(rs, comp, state, msg, env)
        samples.append((time.perf_counter() - t0) * 1000)
    report.selection_ms = statistics.median(samples)
    report.selection_samples = selections

    for loc_n in (1, 10, 100, 1000):
        body = "\n".join(f"x{k % 7} = {k}" for k in range(loc_n)) + "\nselect state s1"
        script = f"rule b where (C0.s0) {{\n{body}\n}}"
        t0 = time.perf_counter()
        parse_rules(script).rules[0].body()
        report.body_parse_ms[loc_n] = (time.perf_counter() - t0) * 1000
    return rs


def run_bench(states: int = 350, transitions: int = 620, repeats: int = 20,
              seed: int = 0) -> BenchReport:
    report = BenchReport()
    model = synth_model(states, transitions, seed=seed)
    report.model_states = sum(len(c.behavior.descendants("root")) for c in model.components if c.behavior)
    report.model_transitions = sum(len(c.behavior.transitions) for c in model.components if c.behavior)
    setting = Setting({c.name: "partial" for c in model.components})

    an, rf = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        analyze(model, setting)
        an.append((time.perf_counter() - t0) * 1000)
        t0 = time.perf_counter()
        refine_model(model, setting)
        rf.append((time.perf_counter() - t0) * 1000)
    report.analysis_ms = _stats(an)
    report.refine_ms = _stats(rf)
    bench_rules(report)
    return report
