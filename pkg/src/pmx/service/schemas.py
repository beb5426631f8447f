"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class ModelRequest(BaseModel):
    model_text: str
    setting: str = ""


class AnalyzeResponse(BaseModel):
    report: dict


class RefineResponse(BaseModel):
    refined_text: str
    metadata: dict


class GenRulesResponse(BaseModel):
    rules_text: str
    report: dict


class ApplyRuleRequest(BaseModel):
    model_text: str
    rules_text: str
    rule_name: str
    component: str
    setting: str = ""


class ApplyRuleResponse(BaseModel):
    model_text: str
    transition: str


class VerifyRequest(BaseModel):
    model_text: str
    setting: str = ""
    check: str = Field(pattern="^(simulation|reach|progress)$")
    depth: int = 4
    component: Optional[str] = None
    max_states: int = 16


class VerifyResponse(BaseModel):
    ok: bool
    details: dict


class MutateRequest(BaseModel):
    model_text: str
    percent: int = Field(ge=0, le=90)
    seed: int = 0


class MutateResponse(BaseModel):
    model_text: str


class RunRequest(BaseModel):
    model_text: str
    setting: str = ""
    rules_text: Optional[str] = None
    seed: int = 0
    max_steps: int = 10_000
    max_vtime: int = 10_000
    policy: str = Field(default="stuck", pattern="^(stuck|drop)$")


class RunResponse(BaseModel):
    halt_reason: str
    steps: int
    trace_jsonl: str
    warnings: list[str] = []


class CreateRunResponse(BaseModel):
    run_id: str
    bridge_path: str


class ErrorResponse(BaseModel):
    detail: str
