"""Wire-protocol bridge: exposes one live run to an external front-end.

Newline-delimited JSON messages with strictly increasing per-direction
sequence numbers. The server emits `model` on connect, `step` for every
execution step, `context`+`options` whenever the run needs input, `ack` for
every processed command, `event` for quiescence/halts and `error` for
malformed input. The client sends `command` messages carrying exactly the
same text strings the terminal session accepts.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
from dataclasses import dataclass
from typing import Optional

from . import model as M
from .refine import RefinementMetadata
from .runtime import ExecutionContext, Limits, SessionClosed, SystemRun
from .rules import RuleSet
from .session import Response, Session


def model_message_payload(model: M.SystemModel, meta: Optional[RefinementMetadata]) -> dict:
    """Layout-ready description of every refined HSM plus the org mapping."""
    comps = []
    for comp in model.components:
        if comp.behavior is None:
            continue
        hr = meta.components.get(comp.name) if meta else None
        added = hr.added if hr else set()
        modified = hr.modified if hr else set()
        hsm = comp.behavior
        states = []
        for s in hsm.states.values():
            if s.id == M.ROOT_ID:
                continue
            states.append({
                "id": s.id, "name": s.name, "kind": s.kind,
                "parent": None if s.parent == M.ROOT_ID else s.parent,
                "added": s.id in added, "modified": s.id in modified,
            })
        transitions = []
        for t in hsm.transitions:
            from .printer import format_expr
            transitions.append({
                "id": t.id, "src": t.src, "des": t.des,
                "trig": [str(r) for r in t.trig],
                "guard": format_expr(t.guard) if t.guard is not None else None,
                "added": t.id in added, "modified": t.id in modified,
            })
        comps.append({
            "name": comp.name,
            "states": states,
            "transitions": transitions,
            "org": dict(hr.org_map) if hr else {},
            "dec_points": dict(hr.dec_points) if hr else {},
        })
    return {"system": model.name, "components": comps}


class Disconnected(Exception):
    pass


class Transport:
    """One connected client; concrete transports override send/recv."""

    def send(self, obj: dict) -> None:
        raise NotImplementedError

    def recv(self) -> Optional[dict]:
        """Next inbound message; None means the client went away."""
        raise NotImplementedError

    def close(self) -> None:
        pass


class LineTransport(Transport):
    def __init__(self, rfile, wfile):
        self.rfile = rfile
        self.wfile = wfile

    def send(self, obj: dict) -> None:
        try:
            self.wfile.write(json.dumps(obj, sort_keys=True) + "\n")
            self.wfile.flush()
        except (OSError, ValueError):
            raise Disconnected()

    def recv(self) -> Optional[dict]:
        try:
            line = self.rfile.readline()
        except OSError:
            return None
        if not line:
            return None
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            return {"type": "malformed", "raw": line.rstrip("\n")}

    def close(self) -> None:
        for f in (self.rfile, self.wfile):
            try:
                f.close()
            except OSError:
                pass


class QueueTransport(Transport):
    """Thread-safe transport for in-process fronts (websocket, tests)."""

    def __init__(self):
        self.inbound: "queue.Queue[Optional[dict]]" = queue.Queue()
        self.outbound: "queue.Queue[Optional[dict]]" = queue.Queue()

    def send(self, obj: dict) -> None:
        self.outbound.put(obj)

    def recv(self) -> Optional[dict]:
        return self.inbound.get()

    def close(self) -> None:
        self.outbound.put(None)


class BridgeSession(Session):
    """A session whose console is a message stream instead of a terminal."""

    def __init__(self, transport: Transport, reconnect_fn=None, **kw):
        super().__init__(input_fn=None, output_fn=lambda _t: None, **kw)
        self.transport = transport
        self.reconnect_fn = reconnect_fn
        self.seq_out = 0
        self._model_args = None

    def attach(self, run: SystemRun) -> None:
        super().attach(run)
        run.idle_hook = self.on_idle
        run.step_listener = self._on_step

    # -- outbound --------------------------------------------------------------
    def emit(self, mtype: str, payload) -> None:
        self.seq_out += 1
        self.transport.send({"type": mtype, "payload": payload, "seq": self.seq_out})

    def _on_step(self, rec) -> None:
        self.emit("step", rec.to_json())

    def send_model(self, model: M.SystemModel, meta: Optional[RefinementMetadata]) -> None:
        self._model_args = (model, meta)
        self.emit("model", model_message_payload(model, meta))

    # -- inbound command loop -----------------------------------------------------
    def _serve_until_selection(self, ctx: Optional[ExecutionContext],
                               idle: bool) -> Optional[int]:
        """Process commands until a selection (at a context) or new work (idle)."""
        while True:
            msg = self.transport.recv()
            if msg is None:
                raise Disconnected()
            if not isinstance(msg, dict) or msg.get("type") != "command" \
                    or not isinstance(msg.get("payload"), dict) or "text" not in msg["payload"]:
                self.emit("error", {"reason": "malformed command", "got": msg})
                continue
            text = str(msg["payload"]["text"])
            if idle and text.strip() == "continue":
                self.emit("ack", Response(lines=["resuming"]).to_json())
                return None
            resp = self.handle_command(text)
            self.emit("ack", resp.to_json())
            if resp.quit:
                self.closed = True
                raise SessionClosed("quit")
            if not idle and resp.selection is not None:
                return resp.selection
            if idle and (self.run.injections or self.run.emissions):
                return None

    def _interactive(self, ctx: ExecutionContext, narrowed=None) -> int:
        self.emit("context", ctx.to_json())
        payload = {"options": [o.to_json() for o in ctx.options]}
        if narrowed:
            payload["narrowed"] = [t.name for t in narrowed]
        self.emit("options", payload)
        while True:
            try:
                sel = self._serve_until_selection(ctx, idle=False)
                assert sel is not None
                return sel
            except Disconnected:
                # the run pauses here until the client comes back
                self._await_reconnect()
                if self._model_args is not None:
                    self.emit("model", model_message_payload(*self._model_args))
                self.emit("context", ctx.to_json())
                self.emit("options", payload)

    def on_idle(self) -> bool:
        if self.closed:
            return False
        self.emit("event", {"kind": "quiescent"})
        try:
            self._serve_until_selection(None, idle=True)
            return True
        except Disconnected:
            return False

    def _await_reconnect(self) -> None:
        if self.reconnect_fn is None:
            raise SessionClosed("client disconnected")
        self.transport = self.reconnect_fn()
        self.seq_out = 0


@dataclass
class RunConfig:
    model: M.SystemModel          # refined model to execute
    metadata: Optional[RefinementMetadata] = None
    rules: Optional[RuleSet] = None
    seed: int = 0
    limits: Optional[Limits] = None
    policy: str = "stuck"


def serve_transport(transport: Transport, cfg: RunConfig,
                    design_model: Optional[M.SystemModel] = None,
                    design_setting=None, reconnect_fn=None):
    """Run one system to completion over an already-connected transport."""
    sess = BridgeSession(transport, reconnect_fn=reconnect_fn, rules=cfg.rules,
                         design_model=design_model,
                         design_setting=design_setting, metadata=cfg.metadata)
    run = SystemRun(cfg.model, seed=cfg.seed, limits=cfg.limits, policy=cfg.policy)
    sess.attach(run)
    sess.send_model(cfg.model, cfg.metadata)
    try:
        trace = run.run()
        sess.emit("event", {"kind": "halt", "reason": trace.halt_reason})
    except Disconnected:
        trace = run.trace
        trace.halt_reason = "disconnected"
    except SessionClosed:
        trace = run.trace
        trace.halt_reason = trace.halt_reason or "quit"
        try:
            sess.emit("event", {"kind": "halt", "reason": "quit"})
        except Disconnected:
            pass
    return sess, trace


class BridgeServer:
    """One client per run over a local TCP socket."""

    def __init__(self, cfg: RunConfig, host: str = "127.0.0.1", port: int = 0,
                 design_model=None, design_setting=None):
        self.cfg = cfg
        self.design_model = design_model
        self.design_setting = design_setting
        self.sock = socket.create_server((host, port))
        self.host, self.port = self.sock.getsockname()[:2]

    def _accept(self) -> Transport:
        conn, _addr = self.sock.accept()
        self._conn = conn
        rfile = conn.makefile("r", encoding="utf-8")
        wfile = conn.makefile("w", encoding="utf-8")
        return LineTransport(rfile, wfile)

    def serve_one(self):
        transport = self._accept()
        try:
            return serve_transport(transport, self.cfg, self.design_model,
                                   self.design_setting, reconnect_fn=self._accept)
        finally:
            transport.close()

    def close(self):
        self.sock.close()


def serve_in_thread(cfg: RunConfig, host: str = "127.0.0.1", port: int = 0,
                    **kw) -> tuple[BridgeServer, threading.Thread]:
    server = BridgeServer(cfg, host, port, **kw)
    t = threading.Thread(target=server.serve_one, daemon=True)
    t.start()
    return server, t
