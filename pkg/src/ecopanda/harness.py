"""Configuration-driven experiment runner.

Builds one ridge problem and one random graph sequence from seeds, runs
the selected methods over the shared inputs, measures the joint spectrum
of the realized mixing matrices, evaluates the rate-bound constants, and
writes per-method CSV traces, a resolved configuration, a constants
report, and a self-contained SVG chart of the residual curves.  Identical
configurations produce byte-identical output files.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .graphnet import find_contracting_window, generate_graph_sequence, metropolis_weights
from .objective import generate_ridge_problem
from .solvers import METHODS, StepParams, run_solver, trace_to_csv
from .theory import TheoryConstants, fit_empirical_rate, small_gain_sequences, theorem_constants

_FMT = ".17g"

_INT_KEYS = ("n", "p", "d", "horizon", "iters", "seed_problem", "seed_graphs")
_FLOAT_KEYS = ("r", "pi", "c_eco", "eta_eco", "c_panda", "alpha_diging")
_STR_KEYS = ("methods", "output_dir")
_ALL_KEYS = _INT_KEYS + _FLOAT_KEYS + _STR_KEYS


class ConfigError(ValueError):
    """Raised when a configuration file cannot be parsed or validated."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters; defaults reproduce the reference run.

    ``iters`` defaults to ``horizon``, so graph-only configurations stay
    valid at any horizon.
    """

    n: int = 10
    p: int = 3
    d: int = 5
    r: float = 1.0
    pi: float = 0.1
    horizon: int = 20000
    iters: int = None
    seed_problem: int = 0
    seed_graphs: int = 1
    c_eco: float = 5e-4
    eta_eco: float = 0.5
    c_panda: float = 1e-3
    alpha_diging: float = 3e-3
    methods: tuple = METHODS
    output_dir: str = "out"

    def __post_init__(self):
        if self.iters is None:
            object.__setattr__(self, "iters", self.horizon)
        for key in ("n", "p", "d", "horizon", "iters"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be at least 1, got {getattr(self, key)}")
        if self.iters > self.horizon:
            raise ConfigError(f"iters={self.iters} exceeds horizon={self.horizon}")
        for key in ("seed_problem", "seed_graphs"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be nonnegative, got {getattr(self, key)}")
        if self.r <= 0:
            raise ConfigError(f"regularizer r must be positive, got {self.r}")
        if not 0.0 <= self.pi <= 1.0:
            raise ConfigError(f"edge probability pi must lie in [0, 1], got {self.pi}")
        for key in ("c_eco", "eta_eco", "c_panda", "alpha_diging"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"step size {key} must be positive, got {getattr(self, key)}")
        if not self.methods:
            raise ConfigError("methods must name at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; expected a subset of {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError(f"methods lists a method twice: {list(self.methods)}")
        # Canonical order keeps output files independent of listing order.
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in self.methods))
        if not self.output_dir:
            raise ConfigError("output_dir must be a nonempty path")


def parse_config(text):
    """Build a configuration from flat ``key = value`` lines.

    ``#`` starts a comment, blank lines are skipped, missing keys take the
    defaults, unknown and repeated keys are errors.  Integer fields reject
    fractional values.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer, got {val!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be a number, got {val!r}") from None
        elif key == "methods":
            values[key] = tuple(tok.strip() for tok in val.split(",") if tok.strip())
        else:
            values[key] = val
    return ExperimentConfig(**values)


def load_config(path):
    """Read and parse a configuration file; see :func:`parse_config`."""
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(config):
    """Serialize a configuration so that parse_config round-trips it exactly."""
    lines = []
    for key in _ALL_KEYS:
        v = getattr(config, key)
        if key in _FLOAT_KEYS:
            lines.append(f"{key} = {format(v, _FMT)}")
        elif key == "methods":
            lines.append(f"{key} = {','.join(v)}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MethodSummary:
    """Rate fit and communication-to-accuracy numbers for one trace."""

    method: str
    lambda_emp: float
    r_squared: float
    final_relative_residual: float
    iters_to_tol: int = None
    scalars_to_tol: int = None
    diverged_at: int = None


@dataclass(frozen=True)
class ComparisonReport:
    """Per-method summaries plus warn-level flags for unexpected orderings."""

    tol: float
    rows: tuple
    flags: tuple


def compare_methods(traces, tol=1e-6):
    """Tabulate rate fits and iterations/scalars to reach ``tol``.

    Traces must share an iteration grid (a diverged trace is a prefix of
    it).  Empirically expected orderings that fail to hold are reported as
    warn-level flags, not errors.
    """
    if not traces:
        raise ValueError("compare_methods needs at least one trace")
    base = max((t.k for t in traces), key=len)
    for t in traces:
        if not np.array_equal(t.k, base[: len(t.k)]):
            raise ValueError("traces do not share an iteration grid")

    rows = []
    flags = []
    for t in traces:
        rel = t.relative_residual
        lam, r2 = math.nan, math.nan
        if not t.diverged:
            try:
                lam, r2 = fit_empirical_rate(rel)
            except ValueError:
                pass
        hit = np.nonzero(rel <= tol)[0]
        rows.append(MethodSummary(
            method=t.method,
            lambda_emp=lam,
            r_squared=r2,
            final_relative_residual=float(rel[-1]),
            iters_to_tol=int(t.k[hit[0]]) if hit.size else None,
            scalars_to_tol=int(t.scalars_sent[hit[0]]) if hit.size else None,
            diverged_at=t.diverged_at,
        ))
        if t.diverged:
            flags.append(f"{t.method} diverged at iteration {t.diverged_at}")

    by_method = {row.method: row for row in rows}
    eco, panda, diging = (by_method.get(m) for m in METHODS)
    if eco and panda and eco.iters_to_tol is not None and panda.iters_to_tol is not None \
            and panda.iters_to_tol > eco.iters_to_tol:
        flags.append(
            f"panda needed {panda.iters_to_tol} iterations to reach {tol:g} "
            f"but eco_panda needed only {eco.iters_to_tol}")
    if eco and diging and eco.iters_to_tol is not None and diging.iters_to_tol is not None \
            and eco.scalars_to_tol > diging.scalars_to_tol:
        flags.append(
            f"eco_panda spent {eco.scalars_to_tol} scalars to reach {tol:g} "
            f"but diging spent only {diging.scalars_to_tol}")
    return ComparisonReport(tol=tol, rows=tuple(rows), flags=tuple(flags))


@dataclass(frozen=True)
class ExperimentResult:
    """Everything one experiment produced, plus the written file manifest."""

    config: ExperimentConfig
    traces: tuple
    diagnostics: dict
    mu: float
    L: float
    window_b: int = None
    window_delta: float = None
    constants: TheoryConstants = None
    constants_text: str = ""
    comparison: ComparisonReport = None
    manifest: tuple = ()


def execute_experiment(config):
    """Run the configured experiment end to end and write all outputs.

    One problem instance and one graph sequence are generated from the
    seeds and shared by every method.  The contraction window is measured
    from the realized mixing matrices (capped at 50); when none is found,
    or when eta does not exceed the measured L, the constants report
    carries a note instead of constants.  Divergence is recorded in the
    trace, never raised.
    """
    obj = generate_ridge_problem(config.n, config.p, config.d, config.r, config.seed_problem)
    seq = generate_graph_sequence(config.n, config.pi, config.horizon, config.seed_graphs)
    ws = [metropolis_weights(g) for g in seq.graphs]
    mu, L = obj.conditioning()
    if config.eta_eco <= L:
        warnings.warn(
            f"eta_eco={config.eta_eco} does not exceed the measured L={L:.6g}",
            stacklevel=2,
        )
    params = StepParams(c=config.c_eco, eta=config.eta_eco,
                        c_panda=config.c_panda, alpha_diging=config.alpha_diging)

    traces = []
    diagnostics = {}
    y_star = obj.dual_optimum()
    for method in config.methods:
        wants_states = method in ("eco_panda", "panda")
        trace, history = run_solver(method, obj, seq, params, config.iters,
                                    weights=ws, record_states=wants_states)
        traces.append(trace)
        if wants_states:
            diagnostics[method] = small_gain_sequences(history, obj, y_star)

    window = find_contracting_window(ws, b_max=50)
    constants = None
    note = ""
    if window is None:
        b, delta = None, None
        note = "no contracting window found up to length 50"
        warnings.warn(
            "the realized graph sequence has no certified contracting window "
            "up to length 50; theory constants are unavailable",
            stacklevel=2,
        )
    else:
        b, delta = window
        if config.eta_eco <= L:
            note = f"eta_eco={format(config.eta_eco, _FMT)} does not exceed measured L"
        else:
            constants = theorem_constants(mu, L, b, delta, eta=config.eta_eco)
    if constants is not None:
        constants_lines = list(constants.as_lines())
    else:
        constants_lines = [f"measured_mu={format(mu, _FMT)}",
                           f"measured_L={format(L, _FMT)}"]
        if b is not None:
            constants_lines += [f"measured_b={b}",
                                f"measured_delta={format(delta, _FMT)}"]
        constants_lines.append(f"note={note}")

    comparison = compare_methods(traces)
    manifest = write_outputs(traces, constants, config, config.output_dir,
                             diagnostics=diagnostics, fallback_lines=constants_lines)
    return ExperimentResult(
        config=config,
        traces=tuple(traces),
        diagnostics=diagnostics,
        mu=mu,
        L=L,
        window_b=b,
        window_delta=delta,
        constants=constants,
        constants_text="\n".join(constants_lines) + "\n",
        comparison=comparison,
        manifest=tuple(manifest),
    )


def run_experiment(config):
    """Run the experiment and return one trace per selected method.

    Thin wrapper over :func:`execute_experiment`; all outputs are written
    to ``config.output_dir``.
    """
    return list(execute_experiment(config).traces)


def write_outputs(traces, constants, config, output_dir, diagnostics=None, fallback_lines=()):
    """Write trace CSVs, constants, resolved config, and the SVG chart.

    ``diagnostics`` maps method name to a DiagnosticSeries whose columns are
    appended to that method's CSV.  ``fallback_lines`` is the constants file
    body used when ``constants`` is None.  Returns the list of file names
    written, in order.
    """
    if not traces:
        raise ValueError("write_outputs needs at least one trace")
    diagnostics = diagnostics or {}
    os.makedirs(output_dir, exist_ok=True)
    manifest = []

    def emit(name, text):
        with open(os.path.join(output_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        manifest.append(name)

    for trace in traces:
        series = diagnostics.get(trace.method)
        extras = series.as_columns() if series is not None else None
        emit(f"trace_{trace.method}.csv", trace_to_csv(trace, diagnostics=extras))
    if constants is not None:
        emit("constants.txt", "\n".join(constants.as_lines()) + "\n")
    else:
        body = list(fallback_lines) or ["note=constants unavailable"]
        emit("constants.txt", "\n".join(body) + "\n")
    emit("config_resolved.txt", render_config(config))
    emit("plot.svg", render_plot_svg(traces))
    return manifest


_PLOT_COLORS = {"eco_panda": "#1f77b4", "panda": "#d62728", "diging": "#2ca02c"}
_PLOT_W, _PLOT_H = 960, 600
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 80, 24, 24, 56
_PLOT_MAX_POINTS = 1200
_LOG_FLOOR = 1e-300


def render_plot_svg(traces):
    """Log-scale SVG line chart of relative primal residual vs iteration.

    Hand-emitted XML with one polyline per method; long traces are strided
    down to about 1200 points.  Contains no timestamps, so identical traces
    render to identical bytes.
    """
    if not traces:
        raise ValueError("render_plot_svg needs at least one trace")
    series = []
    for t in traces:
        rel = np.clip(t.relative_residual, _LOG_FLOOR, None)
        logs = np.log10(rel)
        keep = np.isfinite(logs)
        series.append((t.method, t.k[keep], logs[keep]))

    kmax = max((int(ks[-1]) for _, ks, _ in series if len(ks)), default=1) or 1
    finite = np.concatenate([ls for _, _, ls in series if len(ls)]) if any(
        len(ls) for _, _, ls in series) else np.array([0.0])
    ylo = math.floor(float(finite.min()))
    yhi = math.ceil(float(finite.max()))
    if yhi <= ylo:
        yhi = ylo + 1

    x0, x1 = _MARGIN_L, _PLOT_W - _MARGIN_R
    y0, y1 = _PLOT_H - _MARGIN_B, _MARGIN_T

    def sx(k):
        return x0 + (x1 - x0) * (k / kmax)

    def sy(v):
        return y0 + (y1 - y0) * ((v - ylo) / (yhi - ylo))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_PLOT_W}" height="{_PLOT_H}" '
        f'viewBox="0 0 {_PLOT_W} {_PLOT_H}">',
        f'<rect width="{_PLOT_W}" height="{_PLOT_H}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black" stroke-width="1"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black" stroke-width="1"/>',
    ]
    for i in range(5):
        k = round(kmax * i / 4)
        px = sx(k)
        out.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" stroke="black" stroke-width="1"/>')
        out.append(f'<text x="{px:.2f}" y="{y0 + 20}" font-size="12" text-anchor="middle">{k}</text>')
    step = max(1, math.ceil((yhi - ylo) / 8))
    for v in range(ylo, yhi + 1, step):
        py = sy(v)
        out.append(f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black" stroke-width="1"/>')
        out.append(f'<text x="{x0 - 9}" y="{py + 4:.2f}" font-size="12" text-anchor="end">1e{v}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{_PLOT_H - 14}" font-size="13" '
               'text-anchor="middle">iteration k</text>')
    out.append(f'<text x="20" y="{(y0 + y1) / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 20 {(y0 + y1) / 2:.2f})">relative primal residual</text>')

    for idx, (method, ks, logs) in enumerate(series):
        color = _PLOT_COLORS.get(method, "black")
        if len(ks):
            stride = max(1, len(ks) // _PLOT_MAX_POINTS)
            sel = np.arange(0, len(ks), stride)
            if sel[-1] != len(ks) - 1:
                sel = np.append(sel, len(ks) - 1)
            pts = " ".join(f"{sx(int(k)):.2f},{sy(v):.2f}" for k, v in zip(ks[sel], logs[sel]))
        else:
            pts = ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = y1 + 16 + 18 * idx
        out.append(f'<line x1="{x1 - 150}" y1="{ly}" x2="{x1 - 120}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{x1 - 112}" y="{ly + 4}" font-size="12">{method}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
