"""The wire protocol: handshake, steering, parity with the terminal session."""

import json
import socket
import threading

import pytest

from pmx.bridge import BridgeServer, QueueTransport, RunConfig, serve_transport
from pmx.runtime import Limits, SystemRun
from pmx.session import Session

TL_SETTING = "CTR=partial,UC=absent,SLD=complete"


class BridgeClient:
    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port), timeout=10)
        self.rfile = self.sock.makefile("r", encoding="utf-8")
        self.wfile = self.sock.makefile("w", encoding="utf-8")
        self.seq = 0
        self.inbox = []

    def send_command(self, text):
        self.seq += 1
        self.wfile.write(json.dumps({"type": "command", "payload": {"text": text},
                                     "seq": self.seq}) + "\n")
        self.wfile.flush()

    def send_raw(self, line):
        self.wfile.write(line + "\n")
        self.wfile.flush()

    def recv(self):
        line = self.rfile.readline()
        if not line:
            return None
        msg = json.loads(line)
        self.inbox.append(msg)
        return msg

    def recv_until(self, mtype, limit=400):
        for _ in range(limit):
            msg = self.recv()
            if msg is None:
                return None
            if msg["type"] == mtype:
                return msg
        raise AssertionError(f"no {mtype} message within {limit} messages")

    def close(self):
        self.sock.close()


@pytest.fixture()
def live_bridge(traffic_refined):
    refined, meta = traffic_refined
    cfg = RunConfig(model=refined, metadata=meta, seed=1, limits=Limits(800, 60))
    server = BridgeServer(cfg, port=0)
    result = {}

    def go():
        result["value"] = server.serve_one()

    thread = threading.Thread(target=go, daemon=True)
    thread.start()
    client = BridgeClient(server.host, server.port)
    yield client, result, thread
    client.close()
    server.close()


SCENARIO = [
    "select state __pmx_b_root",
    "select state __pmx_b_root",
    "inject CTR on",
    "inject CTR off",
    "view options",
    "select state red",
    "x = 5 + 1",
    "save input 3",
    "quit",
]


class TestTcpBridge:
    def test_handshake_sends_the_model_first(self, live_bridge):
        client, result, thread = live_bridge
        msg = client.recv()
        assert msg["type"] == "model" and msg["seq"] == 1
        comps = {c["name"]: c for c in msg["payload"]["components"]}
        assert "CTR" in comps
        ids = {s["id"] for s in comps["CTR"]["states"]}
        assert "__pmx_dec_root" in ids and "__pmx_dec_c11" in ids
        added = {s["id"] for s in comps["CTR"]["states"] if s["added"]}
        assert "__pmx_dec_c11" in added and "s23" not in added
        modified = {t["id"] for t in comps["CTR"]["transitions"] if t["modified"]}
        assert modified == {"t13"}
        client.send_command("quit")
        thread.join(timeout=10)

    def test_full_steering_scenario(self, live_bridge):
        client, result, thread = live_bridge
        client.recv_until("context")  # UC's startup pause
        client.send_command(SCENARIO[0])
        client.recv_until("ack")
        client.recv_until("context")  # dbg_agent
        client.send_command(SCENARIO[1])
        client.recv_until("ack")
        client.recv_until("event")    # quiescent
        for cmd in SCENARIO[2:4]:
            client.send_command(cmd)
            client.recv_until("ack")
        ctx = client.recv_until("context")  # CTR at yellow
        assert ctx["payload"]["state"] == "yellow"
        options = client.recv_until("options")
        names = [o["destination_name"] for o in options["payload"]["options"]]
        assert names[:3] == ["red", "green", "yellow"]
        client.send_command("view options")
        ack = client.recv_until("ack")
        assert any("red" in line for line in ack["payload"]["lines"])
        client.send_command("select state red")
        ack = client.recv_until("ack")
        assert ack["payload"]["selection"] is not None
        # subsequent step events show red being entered
        entered_red = False
        for _ in range(200):
            msg = client.recv()
            if msg is None:
                break
            if msg["type"] == "step" and msg["payload"].get("to") == "s21":
                entered_red = True
            if msg["type"] == "event" and msg["payload"].get("kind") == "quiescent":
                break
        assert entered_red
        client.send_command("x = 5 + 1")
        ack = client.recv_until("ack")
        assert "x = 6" in ack["payload"]["lines"]
        client.send_command("save input 3")
        ack = client.recv_until("ack")
        assert any("rule" in line for line in ack["payload"]["lines"])
        client.send_command("quit")
        thread.join(timeout=10)
        assert result["value"][1].halt_reason == "quit"

    def test_malformed_command_yields_error_and_run_survives(self, live_bridge):
        client, result, thread = live_bridge
        client.recv_until("context")
        client.send_raw("this is not json")
        err = client.recv_until("error")
        assert err["payload"]["reason"] == "malformed command"
        client.send_command("select state __pmx_b_root")
        assert client.recv_until("ack") is not None
        client.send_command("quit")
        thread.join(timeout=10)

    def test_seq_strictly_increases(self, live_bridge):
        client, result, thread = live_bridge
        client.recv_until("context")
        client.send_command("view options")
        client.recv_until("ack")
        seqs = [m["seq"] for m in client.inbox]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        client.send_command("quit")
        thread.join(timeout=10)


class TestTerminalParity:
    def drive_terminal(self, refined):
        lines = iter(SCENARIO)
        out = []
        sess = Session(input_fn=lambda p: next(lines), output_fn=out.append)
        run = SystemRun(refined, seed=1, limits=Limits(800, 60))
        sess.attach(run)
        try:
            run.run()
        except Exception:
            pass
        return sess, run

    def drive_bridge(self, refined, meta):
        transport = QueueTransport()
        for i, cmd in enumerate(SCENARIO):
            transport.inbound.put({"type": "command", "payload": {"text": cmd}, "seq": i + 1})
        cfg = RunConfig(model=refined, metadata=meta, seed=1, limits=Limits(800, 60))
        sess, trace = serve_transport(transport, cfg)
        return sess, trace

    def test_same_commands_same_decisions_same_trace(self, traffic_refined):
        refined, meta = traffic_refined
        term_sess, term_run = self.drive_terminal(refined)
        bridge_sess, bridge_trace = self.drive_bridge(refined, meta)
        assert term_sess.command_log == bridge_sess.command_log
        assert [r.select_text for r in term_sess.records] == \
               [r.select_text for r in bridge_sess.records]
        assert term_run.trace.to_jsonl() == bridge_trace.to_jsonl()
