"""Record the canonical TrafficLight steering scenario for the UI tests.

Produces, under test/fixtures/:
  terminal_commands.json  — command strings a terminal session issued
  bridge_log.jsonl        — every server->client bridge message for the same
                            scenario driven over the bridge
  expectations.json       — current-state sequence per step event, and the
                            option list at the yellow decision point

Run from the repository root:  python3 frontend/scripts/record_fixture.py
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "src"))

from pmx.bridge import QueueTransport, RunConfig, serve_transport  # noqa: E402
from pmx.parser import parse_model_file  # noqa: E402
from pmx.refine import refine_model  # noqa: E402
from pmx.rules import parse_rules  # noqa: E402
from pmx.runtime import Limits, SystemRun  # noqa: E402
from pmx.session import Session  # noqa: E402

SETTING = "CTR=partial,UC=absent,SLD=complete"
STARTUP_RULES = """
rule boot_uc where (UC.__pmx_in_root) { select state __pmx_b_root }
rule boot_agent where (dbg_agent.__pmx_in_root) { select state __pmx_b_root }
rule park_uc where (UC.__pmx_b_root) { select state __pmx_b_root }
"""

COMMANDS = [
    "inject CTR on",
    "inject CTR off",
    "view options",
    "select state red",
    "x=5+1",
    "save input 1",
    "quit",
]


def terminal_log():
    model = parse_model_file(str(ROOT / "models" / "traffic_light.pmx"))
    refined, meta = refine_model(model, SETTING)
    lines = iter(COMMANDS)
    sess = Session(rules=parse_rules(STARTUP_RULES),
                   input_fn=lambda prompt: next(lines), output_fn=lambda s: None)
    run = SystemRun(refined, seed=1, limits=Limits(800, 60))
    sess.attach(run)
    try:
        run.run()
    except Exception:
        pass
    return sess.command_log, refined, meta


def bridge_log(refined, meta):
    transport = QueueTransport()
    for i, cmd in enumerate(COMMANDS):
        transport.inbound.put({"type": "command", "payload": {"text": cmd}, "seq": i + 1})
    cfg = RunConfig(model=refined, metadata=meta, rules=parse_rules(STARTUP_RULES),
                    seed=1, limits=Limits(800, 60))
    sess, trace = serve_transport(transport, cfg)
    messages = []
    while not transport.outbound.empty():
        msg = transport.outbound.get()
        if msg is not None:
            messages.append(msg)
    return sess, trace, messages


def main():
    out_dir = ROOT / "frontend" / "test" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)

    term_commands, refined, meta = terminal_log()
    sess, trace, messages = bridge_log(refined, meta)
    assert term_commands == sess.command_log, (term_commands, sess.command_log)

    (out_dir / "terminal_commands.json").write_text(
        json.dumps(term_commands, indent=2) + "\n")
    (out_dir / "bridge_log.jsonl").write_text(
        "\n".join(json.dumps(m, sort_keys=True) for m in messages) + "\n")

    sigma = [{"component": m["payload"]["component"], "to": m["payload"]["to"]}
             for m in messages if m["type"] == "step"]
    yellow_ctx = next(m for m in messages
                      if m["type"] == "context" and m["payload"]["state"] == "yellow")
    (out_dir / "expectations.json").write_text(json.dumps({
        "sigma_after_steps": sigma,
        "yellow_options": yellow_ctx["payload"]["options"],
        "halt": trace.halt_reason,
    }, indent=2) + "\n")
    print(f"recorded {len(messages)} bridge messages, "
          f"{len(term_commands)} commands, {len(sigma)} steps")


if __name__ == "__main__":
    main()
