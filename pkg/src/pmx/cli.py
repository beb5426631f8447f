"""Command-line front end.

Exit codes: 0 ok, 1 runtime/verification failure, 2 usage or I/O error,
3 parse/validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import model as M
from .analysis import Setting, analyze
from .bench import run_bench
from .bridge import BridgeServer, RunConfig
from .mutate import mutate_model
from .oracle import Bounds, check_progress, check_reachability, check_simulation
from .parser import ParseError, ValidationFailed, parse_model
from .printer import serialize_model
from .refine import refine_model
from .rules import RuleError, apply_rule_to_model, generate_default_rules, parse_rules, serialize_rules
from .runtime import Limits, SessionClosed, SystemRun
from .session import Session

OK, FAIL, USAGE, PARSE = 0, 1, 2, 3


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SystemExit2(f"cannot read {path}: {e}") from None


class SystemExit2(Exception):
    pass


def _load_model(path: str) -> M.SystemModel:
    try:
        return parse_model(_read(path))
    except (ParseError, ValidationFailed) as e:
        print(f"error: {path}: {e}", file=sys.stderr)
        raise SystemExit(PARSE) from None


def _setting(text: str) -> Setting:
    try:
        return Setting.parse(text or "")
    except M.PmxError as e:
        print(f"error: {e}", file=sys.stderr)
        raise SystemExit(USAGE) from None


def _limits(args) -> Limits:
    return Limits(max_steps=args.max_steps, max_vtime=args.max_vtime)


def _emit(args, data: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(text)


def cmd_analyze(args) -> int:
    model = _load_model(args.model)
    report = analyze(model, _setting(args.setting))
    lines = []
    for name, rep in report.components.items():
        lines.append(f"{name} ({rep.level}):")
        if rep.level == "partial":
            j = rep.to_json()
            for key in ("P1", "P2", "P3", "P4", "P6", "P9", "P10", "P11"):
                if j[key]:
                    lines.append(f"  {key}: {', '.join(j[key])}")
            for s, msgs in rep.p5.items():
                lines.append(f"  P5: {s} misses {', '.join(str(m) for m in msgs)}")
            lines.append(f"  P8: {str(rep.p8).lower()}")
        elif rep.level == "absent":
            lines.append(f"  inputs: {', '.join(rep.inputs)}")
            lines.append(f"  outputs: {', '.join(rep.outputs)}")
    lines.append(f"P7 (missing inputs): {', '.join(report.p7) if report.p7 else '-'}")
    _emit(args, report.to_json(), "\n".join(lines))
    return OK


def cmd_refine(args) -> int:
    model = _load_model(args.model)
    refined, meta = refine_model(model, _setting(args.setting))
    out = serialize_model(refined)
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        print(out, end="")
    if args.metadata:
        Path(args.metadata).write_text(json.dumps(meta.to_json(), indent=2, sort_keys=True),
                                       encoding="utf-8")
    return OK


def cmd_gen_rules(args) -> int:
    model = _load_model(args.model)
    setting = _setting(args.setting)
    report = analyze(model, setting)
    refined, meta = refine_model(model, setting)
    text = serialize_rules(generate_default_rules(refined, meta, report))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return OK


def cmd_apply_rule(args) -> int:
    model = _load_model(args.model)
    try:
        rules = parse_rules(_read(args.rules), source=args.rules)
    except RuleError as e:
        print(f"error: {args.rules}: {e}", file=sys.stderr)
        return PARSE
    rule = rules.rule(args.rule)
    if rule is None:
        print(f"error: no rule named {args.rule!r} in {args.rules}", file=sys.stderr)
        return USAGE
    setting = _setting(args.setting or f"{args.component}=partial")
    report = analyze(model, setting)
    try:
        t = apply_rule_to_model(model, args.component, rule, report)
    except RuleError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return FAIL
    out = serialize_model(model)
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        print(out, end="")
    print(f"applied {args.rule}: transition {t.id} ({t.src} -> {t.des})", file=sys.stderr)
    return OK


def cmd_run(args) -> int:
    model = _load_model(args.model)
    setting = _setting(args.setting)
    refined, meta = refine_model(model, setting)
    rules = None
    if args.rules:
        try:
            rules = parse_rules(_read(args.rules), source=args.rules)
        except RuleError as e:
            print(f"error: {args.rules}: {e}", file=sys.stderr)
            return PARSE
    mode = args.mode or ("batch" if rules else "interactive")
    interactive = mode == "interactive" or (mode == "batch" and sys.stdin.isatty())
    sess = Session(
        rules=rules,
        input_fn=(lambda prompt: input(prompt)) if interactive else None,
        output_fn=print,
        design_model=model, design_setting=setting, metadata=meta)
    run = SystemRun(refined, seed=args.seed, limits=_limits(args), policy=args.policy)
    sess.attach(run)
    code = OK
    try:
        trace = run.run()
    except SessionClosed:
        trace = run.trace
        trace.halt_reason = trace.halt_reason or "quit"
    if sess.close_reason:
        print(f"error: {sess.close_reason}", file=sys.stderr)
        code = FAIL
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl(), encoding="utf-8")
    if args.save_rules and sess.saved_rules.rules:
        Path(args.save_rules).write_text(serialize_rules(sess.saved_rules), encoding="utf-8")
    if args.save_model:
        Path(args.save_model).write_text(serialize_model(model), encoding="utf-8")
    for w in sess.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"halted: {trace.halt_reason} after {len(trace.records)} steps "
          f"(vtime {run.clock.now})", file=sys.stderr)
    if trace.errors:
        for e in trace.errors:
            print(f"runtime error: {e}", file=sys.stderr)
        return FAIL
    return code


def cmd_verify(args) -> int:
    model = _load_model(args.model)
    setting = _setting(args.setting)
    bounds = Bounds(max_states=args.max_states, max_depth=max(args.depth, 6))
    refined, meta = refine_model(model, setting)
    levels = setting.for_model(model)
    names = [args.component] if args.component else [c.name for c in model.components]
    results: dict = {}
    ok = True
    for name in names:
        comp = model.component(name)
        if args.check == "simulation":
            if comp.behavior is None:
                continue
            introduced = meta.components[name].introduced_vars if name in meta.components else []
            div = check_simulation(model, refined, name, introduced, depth=args.depth, bounds=bounds)
            results[name] = "pass" if div is None else str(div)
            ok = ok and div is None
        elif args.check == "progress":
            stuck = check_progress(refined, name, bounds)
            results[name] = "pass" if stuck is None else f"stuck: {stuck[2]} at {stuck[0].sigma}"
            ok = ok and stuck is None
        elif args.check == "reach":
            if levels[name] == M.COMPLETE and comp.behavior is None:
                continue
            rep = check_reachability(refined, name, bounds)
            results[name] = "pass" if rep.ok() else {
                "unreached_basic": rep.unreached_basic,
                "unreached_pseudo": rep.unreached_pseudo,
                "unfired_transitions": rep.unfired_transitions,
                "from_state_failures": rep.from_state_failures,
            }
            ok = ok and rep.ok()
    text = "\n".join(f"{k}: {v if isinstance(v, str) else json.dumps(v)}" for k, v in results.items())
    _emit(args, {"check": args.check, "ok": ok, "results": results}, text)
    return OK if ok else FAIL


def cmd_mutate(args) -> int:
    model = _load_model(args.model)
    try:
        mutated = mutate_model(model, args.percent, args.seed)
    except M.ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    out = serialize_model(mutated)
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        print(out, end="")
    return OK


def cmd_bench(args) -> int:
    report = run_bench(states=args.states, transitions=args.transitions,
                       repeats=args.repeats, seed=args.seed)
    _emit(args, report.to_json(), report.text())
    return OK


def cmd_serve(args) -> int:
    model = _load_model(args.model)
    setting = _setting(args.setting)
    refined, meta = refine_model(model, setting)
    rules = None
    if args.rules:
        rules = parse_rules(_read(args.rules), source=args.rules)
    cfg = RunConfig(model=refined, metadata=meta, rules=rules, seed=args.seed,
                    limits=_limits(args), policy=args.policy)
    if args.http or args.ui:
        import uvicorn
        from .service import create_app
        ui_dir = args.ui_dir
        if args.ui and not ui_dir:
            dist = Path(__file__).resolve().parents[3] / "frontend" / "dist"
            ui_dir = str(dist) if dist.is_dir() else None
        app = create_app(ui_dir=ui_dir)
        print(f"serving HTTP on {args.host}:{args.http_port}"
              + (f" (ui at /ui)" if ui_dir else ""), file=sys.stderr)
        uvicorn.run(app, host=args.host, port=args.http_port, log_level="warning")
        return OK
    server = BridgeServer(cfg, host=args.host, port=args.port,
                          design_model=model, design_setting=setting)
    print(f"bridge listening on {server.host}:{server.port}", file=sys.stderr)
    try:
        _sess, trace = server.serve_one()
        print(f"run finished: {trace.halt_reason}", file=sys.stderr)
    finally:
        server.close()
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmx", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("model", help="model file (.pmx)")
        sp.add_argument("--setting", default="", help="per-component levels, e.g. CTR=partial,UC=absent")
        sp.add_argument("--format", choices=["json", "text"], default="text")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-steps", type=int, default=10_000)
        sp.add_argument("--max-vtime", type=int, default=10_000)
        sp.add_argument("--policy", choices=["stuck", "drop"], default="stuck",
                        help="unexpected-message policy")

    sp = sub.add_parser("analyze", help="report problematic elements (P1-P11)")
    common(sp)
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("refine", help="insert decision points; write the refined model")
    common(sp)
    sp.add_argument("-o", "--output")
    sp.add_argument("--metadata", help="write refinement metadata JSON here")
    sp.set_defaults(fn=cmd_refine)

    sp = sub.add_parser("gen-rules", help="generate default execution rules")
    common(sp)
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_gen_rules)

    sp = sub.add_parser("apply-rule", help="apply an execution rule to the design model")
    common(sp)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--rule", required=True, help="rule name")
    sp.add_argument("--component", required=True)
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_apply_rule)

    sp = sub.add_parser("run", help="analyze, refine and execute")
    common(sp)
    sp.add_argument("--rules", help="execution-rule script for batch mode")
    sp.add_argument("--mode", choices=["interactive", "batch"])
    sp.add_argument("--trace", help="write the line-delimited JSON trace here")
    sp.add_argument("--save-rules", help="write rules saved during the session here")
    sp.add_argument("--save-model", help="write the (possibly completed) design model here")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("verify", help="bounded checks of the formal properties")
    common(sp)
    sp.add_argument("--check", choices=["simulation", "reach", "progress"], required=True)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--component")
    sp.add_argument("--max-states", type=int, default=16)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("mutate", help="randomly remove elements (seeded)")
    common(sp)
    sp.add_argument("--percent", type=int, required=True)
    sp.add_argument("-o", "--output")
    sp.set_defaults(fn=cmd_mutate)

    sp = sub.add_parser("bench", help="timing of analysis, refinement and rule handling")
    sp.add_argument("--states", type=int, default=350)
    sp.add_argument("--transitions", type=int, default=620)
    sp.add_argument("--repeats", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["json", "text"], default="text")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("serve", help="expose a live run over the bridge protocol")
    common(sp)
    sp.add_argument("--rules")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=7441, help="TCP bridge port")
    sp.add_argument("--http", action="store_true", help="serve the HTTP API instead of raw TCP")
    sp.add_argument("--http-port", type=int, default=8000)
    sp.add_argument("--ui", action="store_true", help="also serve the browser front-end")
    sp.add_argument("--ui-dir", help="static asset directory for --ui")
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE
    except SystemExit2 as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except BrokenPipeError:
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
