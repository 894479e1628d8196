"""HTTP service exposing network generation, scenario runs, and audits.

The CLI is a thin client of these endpoints; anything it can do goes
through this surface.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import SimConfig, parse_config
from ..model import NetworkConfig, generate_network
from ..scenarios import ScenarioResult, run_scenario
from .schemas import (
    AuditFindingModel,
    AuditRequest,
    AuditResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    MetricsModel,
    ScenarioRequest,
    ScenarioResponse,
)

app = FastAPI(title="creditnet", version=__version__)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/network/generate", response_model=GenerateResponse)
def network_generate(req: GenerateRequest) -> GenerateResponse:
    cfg = NetworkConfig(
        node_count=req.nodes,
        edge_density=req.density,
        seed=req.seed,
        interest_range=(req.interest_min, req.interest_max),
        max_weight=req.max_weight,
    )
    try:
        net = generate_network(cfg)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return GenerateResponse(
        nodes=net.node_count(), links=len(net.links), seed=req.seed,
        graph=net.to_text(),
    )


def _build_config(scenario: str, nodes: int | None, seed: int | None,
                  config_text: str | None) -> SimConfig:
    cfg = parse_config(config_text) if config_text else SimConfig()
    overrides: dict[str, object] = {"scenario": scenario}
    if nodes is not None:
        overrides["nodes"] = nodes
    if seed is not None:
        overrides["seed"] = seed
    cfg = cfg.with_overrides(**overrides)
    cfg.validate()
    return cfg


def _audit_findings(result: ScenarioResult) -> list[AuditFindingModel]:
    findings = []
    for f in result.audit.route_findings:
        findings.append(AuditFindingModel(
            kind="route-break",
            detail=(f"request {f.request_id}: trail from {f.responder} breaks "
                    f"between {f.segment[0]} and {f.segment[1]}"),
            suspects=[f.segment[0], f.segment[1]],
        ))
    for f in result.audit.misreport_findings:
        findings.append(AuditFindingModel(
            kind="misreport",
            detail=(f"{f.node} claims {f.claimed} on link {f.borrower}->{f.lender}, "
                    f"contract says {f.contracted}"),
            suspects=[f.node],
        ))
    return findings


@app.post("/scenario/run", response_model=ScenarioResponse)
def scenario_run(req: ScenarioRequest) -> ScenarioResponse:
    try:
        cfg = _build_config(req.scenario, req.nodes, req.seed, req.config)
        result = run_scenario(cfg)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    bail = result.bailout_result
    return ScenarioResponse(
        scenario=cfg.scenario,
        nodes=cfg.nodes,
        seed=cfg.seed,
        requestor=result.requestor,
        metrics=[
            MetricsModel(**{f: getattr(m, f) for f in m.FIELDS}, line=m.to_line())
            for m in result.metrics
        ],
        ledger=result.ctx.ledger.to_lines(),
        audit=_audit_findings(result),
        links_established=len(result.ctx.trace.contracts),
        landmark_fee=bail.fee if bail is not None else None,
        bailout_failed=bail.failed if bail is not None else None,
    )


@app.post("/audit/run", response_model=AuditResponse)
def audit_run(req: AuditRequest) -> AuditResponse:
    try:
        cfg = _build_config(req.scenario, req.nodes, req.seed, req.config)
        result = run_scenario(cfg)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    findings = _audit_findings(result)
    return AuditResponse(
        scenario=cfg.scenario, nodes=cfg.nodes, seed=cfg.seed,
        findings=findings, clean=not findings,
    )
