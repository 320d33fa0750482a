"""FastAPI application wrapping the harness, theory, and graph modules.

Validation failures surface as HTTP 422 with the underlying message;
warnings raised while handling a request are captured and returned in the
response body rather than logged server-side.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import replace

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..graphnet import (
    find_contracting_window,
    generate_graph_sequence,
    metropolis_weights,
    sequence_hash,
    verify_mixing_matrix,
)
from ..harness import ConfigError, execute_experiment, parse_config
from ..theory import theorem_constants
from .schemas import (
    ConstantsRequest,
    ConstantsResponse,
    HealthResponse,
    MethodSummaryModel,
    RunRequest,
    RunResponse,
    VerifyGraphRequest,
    VerifyGraphResponse,
)


def _finite(v):
    """The value as a float, or None when JSON cannot carry it."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def create_app():
    """Build the application; state-free, so one instance serves all requests."""
    app = FastAPI(title="ecopanda", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest):
        try:
            config = parse_config(req.config_text)
            if req.output_dir is not None:
                config = replace(config, output_dir=req.output_dir)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = execute_experiment(config)
        summaries = [
            MethodSummaryModel(
                method=row.method,
                lambda_emp=_finite(row.lambda_emp),
                r_squared=_finite(row.r_squared),
                final_relative_residual=_finite(row.final_relative_residual),
                iters_to_tol=row.iters_to_tol,
                scalars_to_tol=row.scalars_to_tol,
                diverged_at=row.diverged_at,
            )
            for row in result.comparison.rows
        ]
        return RunResponse(
            output_dir=result.config.output_dir,
            manifest=list(result.manifest),
            graph_sha256=result.traces[0].graph_hash,
            mu=result.mu,
            L=result.L,
            window_b=result.window_b,
            window_delta=_finite(result.window_delta),
            constants_lines=result.constants_text.splitlines(),
            summaries=summaries,
            flags=list(result.comparison.flags),
            warnings=[str(w.message) for w in caught],
            diverged_methods=[t.method for t in result.traces if t.diverged],
        )

    @app.post("/constants", response_model=ConstantsResponse)
    def constants(req: ConstantsRequest):
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                tc = theorem_constants(req.mu, req.L, req.b, req.delta, eta=req.eta)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return ConstantsResponse(
            lines=list(tc.as_lines()),
            warnings=[str(w.message) for w in caught],
        )

    @app.post("/verify-graph", response_model=VerifyGraphResponse)
    def verify_graph(req: VerifyGraphRequest):
        try:
            config = parse_config(req.config_text)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        seq = generate_graph_sequence(config.n, config.pi, config.horizon, config.seed_graphs)
        ws = [metropolis_weights(g) for g in seq.graphs]
        reports = [verify_mixing_matrix(w, g) for w, g in zip(ws, seq.graphs)]
        window = find_contracting_window(ws, b_max=50)
        b, delta = window if window is not None else (None, None)
        return VerifyGraphResponse(
            n=seq.n,
            horizon=seq.horizon,
            graph_sha256=sequence_hash(seq),
            support_ok=all(r.support_ok for r in reports),
            max_support_violation=max(r.support_violation for r in reports),
            doubly_stochastic_ok=all(r.doubly_stochastic_ok for r in reports),
            max_stochasticity_violation=max(r.stochasticity_violation for r in reports),
            window_b=b,
            window_delta=_finite(delta),
            contracts=window is not None,
        )

    return app


app = create_app()
