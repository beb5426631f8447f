"""FastAPI service wrapping the engine.

Stateless endpoints mirror the CLI's file pipeline (analyze, refine,
gen-rules, apply-rule, verify, mutate, batch run); live runs are created via
POST /runs and then steered over a websocket speaking the bridge protocol,
one JSON message per text frame.
"""

from __future__ import annotations

import asyncio
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from .. import model as M
from ..analysis import Setting, analyze
from ..bridge import QueueTransport, RunConfig, serve_transport
from ..mutate import mutate_model
from ..oracle import Bounds, check_progress, check_reachability, check_simulation
from ..parser import ParseError, ValidationFailed, parse_model
from ..printer import serialize_model
from ..refine import refine_model
from ..rules import RuleError, apply_rule_to_model, generate_default_rules, parse_rules, serialize_rules
from ..runtime import Limits, SystemRun
from ..session import Session
from .schemas import (
    AnalyzeResponse, ApplyRuleRequest, ApplyRuleResponse, CreateRunResponse,
    GenRulesResponse, ModelRequest, MutateRequest, MutateResponse,
    RefineResponse, RunRequest, RunResponse, VerifyRequest, VerifyResponse,
)


def _parse(model_text: str) -> M.SystemModel:
    try:
        return parse_model(model_text)
    except (ParseError, ValidationFailed) as e:
        raise HTTPException(status_code=422, detail=str(e)) from None


def _setting(text: str) -> Setting:
    try:
        return Setting.parse(text)
    except M.PmxError as e:
        raise HTTPException(status_code=422, detail=str(e)) from None


class LiveRun:
    def __init__(self, cfg: RunConfig, design_model=None, design_setting=None):
        self.transport = QueueTransport()
        self.cfg = cfg
        self.design_model = design_model
        self.design_setting = design_setting
        self.thread = threading.Thread(target=self._go, daemon=True)
        self.result = None

    def _go(self):
        self.result = serve_transport(self.transport, self.cfg,
                                      self.design_model, self.design_setting)

    def start(self):
        self.thread.start()


def create_app(ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="pmx", version="0.1.0",
                  description="Execution engine for partial state-machine models")
    runs: dict[str, LiveRun] = {}

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze_endpoint(req: ModelRequest):
        model = _parse(req.model_text)
        try:
            report = analyze(model, _setting(req.setting))
        except M.PmxError as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return AnalyzeResponse(report=report.to_json())

    @app.post("/refine", response_model=RefineResponse)
    def refine_endpoint(req: ModelRequest):
        model = _parse(req.model_text)
        try:
            refined, meta = refine_model(model, _setting(req.setting))
        except M.PmxError as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return RefineResponse(refined_text=serialize_model(refined), metadata=meta.to_json())

    @app.post("/gen-rules", response_model=GenRulesResponse)
    def gen_rules_endpoint(req: ModelRequest):
        model = _parse(req.model_text)
        setting = _setting(req.setting)
        report = analyze(model, setting)
        refined, meta = refine_model(model, setting)
        rules = generate_default_rules(refined, meta, report)
        return GenRulesResponse(rules_text=serialize_rules(rules), report=report.to_json())

    @app.post("/apply-rule", response_model=ApplyRuleResponse)
    def apply_rule_endpoint(req: ApplyRuleRequest):
        model = _parse(req.model_text)
        try:
            rules = parse_rules(req.rules_text)
            rule = rules.rule(req.rule_name)
            if rule is None:
                raise HTTPException(status_code=404, detail=f"no rule named {req.rule_name!r}")
            setting = req.setting or f"{req.component}=partial"
            report = analyze(model, _setting(setting))
            t = apply_rule_to_model(model, req.component, rule, report)
        except RuleError as e:
            raise HTTPException(status_code=422, detail=f"{type(e).__name__}: {e}") from None
        except M.PmxError as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return ApplyRuleResponse(model_text=serialize_model(model), transition=t.id)

    @app.post("/verify", response_model=VerifyResponse)
    def verify_endpoint(req: VerifyRequest):
        model = _parse(req.model_text)
        setting = _setting(req.setting)
        bounds = Bounds(max_states=req.max_states, max_depth=max(req.depth, 6))
        refined, meta = refine_model(model, setting)
        levels = setting.for_model(model)
        comps = [req.component] if req.component else \
            [c.name for c in model.components if levels[c.name] != M.COMPLETE or c.behavior]
        details: dict = {}
        ok = True
        try:
            for name in comps:
                if req.check == "simulation":
                    if model.component(name).behavior is None:
                        continue
                    introduced = meta.components[name].introduced_vars if name in meta.components else []
                    div = check_simulation(model, refined, name, introduced, depth=req.depth, bounds=bounds)
                    details[name] = str(div) if div else "pass"
                    ok = ok and div is None
                elif req.check == "progress":
                    stuck = check_progress(refined, name, bounds)
                    details[name] = f"stuck: {stuck[2]} at {stuck[0].sigma}" if stuck else "pass"
                    ok = ok and stuck is None
                else:
                    rep = check_reachability(refined, name, bounds)
                    details[name] = "pass" if rep.ok() else {
                        "unreached_basic": rep.unreached_basic,
                        "unreached_pseudo": rep.unreached_pseudo,
                        "unfired_transitions": rep.unfired_transitions,
                        "from_state_failures": rep.from_state_failures,
                    }
                    ok = ok and rep.ok()
        except M.PmxError as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return VerifyResponse(ok=ok, details=details)

    @app.post("/mutate", response_model=MutateResponse)
    def mutate_endpoint(req: MutateRequest):
        model = _parse(req.model_text)
        return MutateResponse(model_text=serialize_model(mutate_model(model, req.percent, req.seed)))

    @app.post("/run", response_model=RunResponse)
    def run_endpoint(req: RunRequest):
        model = _parse(req.model_text)
        setting = _setting(req.setting)
        refined, meta = refine_model(model, setting)
        rules = parse_rules(req.rules_text) if req.rules_text else None
        sess = Session(rules=rules)
        run = SystemRun(refined, seed=req.seed, policy=req.policy,
                        limits=Limits(req.max_steps, req.max_vtime))
        sess.attach(run)
        from ..runtime import SessionClosed
        try:
            trace = run.run()
        except SessionClosed as e:
            trace = run.trace
            trace.halt_reason = f"needs input: {e}"
        return RunResponse(halt_reason=trace.halt_reason, steps=len(trace.records),
                           trace_jsonl=trace.to_jsonl(), warnings=sess.warnings)

    @app.post("/runs", response_model=CreateRunResponse)
    def create_run(req: RunRequest):
        model = _parse(req.model_text)
        setting = _setting(req.setting)
        refined, meta = refine_model(model, setting)
        rules = parse_rules(req.rules_text) if req.rules_text else None
        cfg = RunConfig(model=refined, metadata=meta, rules=rules, seed=req.seed,
                        limits=Limits(req.max_steps, req.max_vtime), policy=req.policy)
        run_id = uuid.uuid4().hex[:12]
        runs[run_id] = LiveRun(cfg, design_model=model, design_setting=setting)
        return CreateRunResponse(run_id=run_id, bridge_path=f"/runs/{run_id}/bridge")

    @app.websocket("/runs/{run_id}/bridge")
    async def bridge_ws(ws: WebSocket, run_id: str):
        live = runs.get(run_id)
        if live is None:
            await ws.close(code=4004)
            return
        await ws.accept()
        if not live.thread.is_alive() and live.result is None:
            live.start()

        import json as _json
        loop = asyncio.get_event_loop()

        async def pump_out():
            while True:
                msg = await loop.run_in_executor(None, live.transport.outbound.get)
                if msg is None:
                    break
                await ws.send_text(_json.dumps(msg, sort_keys=True))

        out_task = asyncio.create_task(pump_out())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    live.transport.inbound.put(_json.loads(text))
                except ValueError:
                    live.transport.inbound.put({"type": "malformed", "raw": text})
        except WebSocketDisconnect:
            live.transport.inbound.put(None)
        finally:
            out_task.cancel()

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return FileResponse(Path(ui_dir) / "index.html")

    return app
