"""Request and response bodies for the HTTP endpoints.

Values that can be non-finite in memory (rate fits on diverged runs) are
carried as ``None`` so every response stays valid JSON.
"""

from __future__ import annotations

from pydantic import BaseModel


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    """Experiment request: flat ``key = value`` text plus an optional
    output directory override (applied on the serving host)."""

    config_text: str = ""
    output_dir: str | None = None


class MethodSummaryModel(BaseModel):
    method: str
    lambda_emp: float | None
    r_squared: float | None
    final_relative_residual: float | None
    iters_to_tol: int | None
    scalars_to_tol: int | None
    diverged_at: int | None


class RunResponse(BaseModel):
    output_dir: str
    manifest: list[str]
    graph_sha256: str
    mu: float
    L: float
    window_b: int | None
    window_delta: float | None
    constants_lines: list[str]
    summaries: list[MethodSummaryModel]
    flags: list[str]
    warnings: list[str]
    diverged_methods: list[str]


class ConstantsRequest(BaseModel):
    """Inputs of the rate-bound constants; ``eta`` defaults to 4L."""

    mu: float
    L: float
    b: int
    delta: float
    eta: float | None = None


class ConstantsResponse(BaseModel):
    lines: list[str]
    warnings: list[str]


class VerifyGraphRequest(BaseModel):
    """Verification request: only the graph-related configuration keys
    (n, pi, horizon, seed_graphs) matter; the rest are accepted and ignored."""

    config_text: str = ""


class VerifyGraphResponse(BaseModel):
    """Pass/fail per mixing-matrix property over the whole sequence:
    support (P1), double stochasticity (P2), joint-spectrum contraction (P3)."""

    n: int
    horizon: int
    graph_sha256: str
    support_ok: bool
    max_support_violation: float
    doubly_stochastic_ok: bool
    max_stochasticity_violation: float
    window_b: int | None
    window_delta: float | None
    contracts: bool
