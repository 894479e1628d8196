"""Request/response models for the simulation service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class GenerateRequest(BaseModel):
    nodes: int = Field(ge=2)
    density: float = Field(default=4.0, ge=1.0)
    seed: int = 0
    interest_min: float = 0.01
    interest_max: float = 0.25
    max_weight: int = Field(default=100, ge=1)


class GenerateResponse(BaseModel):
    nodes: int
    links: int
    seed: int
    graph: str


class ScenarioRequest(BaseModel):
    scenario: str = "prefix-bt"
    nodes: int | None = None
    seed: int | None = None
    config: str | None = None  # raw config file text; flags override it


class MetricsModel(BaseModel):
    scenario: str
    node_count: int
    op: str
    wall_ms: float
    cost: int
    messages: int
    hops_min: int
    hops_mean: float
    hops_max: int
    links_created: int
    links_destroyed: int
    ledger_writes: int
    line: str


class AuditFindingModel(BaseModel):
    kind: str
    detail: str
    suspects: list[str]


class ScenarioResponse(BaseModel):
    scenario: str
    nodes: int
    seed: int
    requestor: str | None
    metrics: list[MetricsModel]
    ledger: list[str]
    audit: list[AuditFindingModel]
    links_established: int
    landmark_fee: int | None = None
    bailout_failed: bool | None = None


class AuditRequest(BaseModel):
    scenario: str = "prefix-bt"
    nodes: int | None = None
    seed: int | None = None
    config: str | None = None


class AuditResponse(BaseModel):
    scenario: str
    nodes: int
    seed: int
    findings: list[AuditFindingModel]
    clean: bool


class HealthResponse(BaseModel):
    status: str
    version: str
