"""Decentralized solvers: Eco-PANDA, PANDA, and a DIGing baseline.

All three iterate on agent-stacked (n, p) arrays against one shared
per-round mixing matrix sequence.  With Pi the projector onto zero-mean
stacks (Pi v = v - mean(v)), and W the round's mixing matrix:

Eco-PANDA (one gradient step on a curvature-eta upper bound, then dual ascent)

    x+ = x - (grad f(x) - y) / eta
    z+ = W z + x+ - x
    y+ = y - c Pi (x+ - z+)

PANDA replaces the x update by the exact inner solve x+ = argmin f - <y, x>;
its z and y updates are identical.  DIGing is primal gradient tracking:

    x+ = W x - alpha v
    v+ = W v + grad f(x+) - grad f(x),      v(0) = grad f(x(0)).

Per round, Eco-PANDA and PANDA transmit p scalars per directed edge (the z
block); DIGing transmits 2p (x and v blocks).

The per-agent forms (neighbor sums, no projector: x+ - z+ is already
zero-mean because mean(z) tracks mean(x)) are provided alongside the stacked
forms and agree with them to roundoff.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .graphnet import metropolis_weights, sequence_hash

METHODS = ("eco_panda", "panda", "diging")

TRACE_HEADER = "k,method,consensus_err,primal_residual,dual_residual,obj_gap,scalars_sent"

#: A run is reported diverged when its residual exceeds this factor of the initial one.
DIVERGENCE_FACTOR = 1e12

_FMT = ".17g"


def _fmt(v):
    return format(float(v), _FMT)


def perp(v):
    """Project an (n, p) stack onto zero-mean stacks: v minus its block mean."""
    return v - v.mean(axis=0)


@dataclass(frozen=True)
class StepParams:
    """Step sizes for all methods; defaults are the reference experiment's."""

    c: float = 5e-4           # Eco-PANDA dual step
    eta: float = 0.5          # Eco-PANDA curvature bound (must exceed L)
    c_panda: float = 1e-3     # PANDA dual step
    alpha_diging: float = 3e-3  # DIGing primal step

    def __post_init__(self):
        for name in ("c", "eta", "c_panda", "alpha_diging"):
            if getattr(self, name) <= 0:
                raise ValueError(f"step parameter {name} must be positive")


@dataclass(frozen=True)
class EcoPandaState:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class PandaState:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class DigingState:
    x: np.ndarray
    v: np.ndarray
    k: int = 0


def _initial_stack(obj, x0):
    if x0 is None:
        return np.zeros((obj.n, obj.p))
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (obj.n, obj.p):
        raise ValueError(f"x0 must have shape ({obj.n}, {obj.p}), got {x0.shape}")
    return x0.copy()


def eco_panda_init(obj, x0=None):
    """x(0) = z(0) = x0 (zeros by default), y(0) = 0 (zero-mean as required)."""
    x = _initial_stack(obj, x0)
    return EcoPandaState(x=x, z=x.copy(), y=np.zeros_like(x))


def panda_init(obj, x0=None):
    x = _initial_stack(obj, x0)
    return PandaState(x=x, z=x.copy(), y=np.zeros_like(x))


def diging_init(obj, x0=None):
    """Tracker starts at the initial gradient so mean(v) tracks mean(grad f)."""
    x = _initial_stack(obj, x0)
    return DigingState(x=x, v=obj.gradient(x))


def eco_panda_step(state, obj, w, params):
    """One stacked Eco-PANDA round with mixing matrix ``w``."""
    x, z, y = state.x, state.z, state.y
    x1 = x - (obj.gradient(x) - y) / params.eta
    z1 = w @ z + x1 - x
    y1 = y - params.c * perp(x1 - z1)
    return EcoPandaState(x=x1, z=z1, y=y1, k=state.k + 1)


def panda_step(state, obj, w, params):
    """One stacked PANDA round; the x update is the exact inner solve."""
    x, z, y = state.x, state.z, state.y
    x1 = obj.conjugate_argmin(y)
    z1 = w @ z + x1 - x
    y1 = y - params.c_panda * perp(x1 - z1)
    return PandaState(x=x1, z=z1, y=y1, k=state.k + 1)


def diging_step(state, obj, w, params):
    """One stacked DIGing round (combine, step, then track the new gradient)."""
    x, v = state.x, state.v
    x1 = w @ x - params.alpha_diging * v
    v1 = w @ v + obj.gradient(x1) - obj.gradient(x)
    return DigingState(x=x1, v=v1, k=state.k + 1)


def _agent_mix(graph, w, block):
    """Neighbor sums sum_{j in N_i + {i}} w_ij block_j, one agent at a time."""
    out = np.empty_like(block)
    for i in range(graph.n):
        acc = w[i, i] * block[i]
        for j in graph.neighbors(i):
            acc = acc + w[i, j] * block[j]
        out[i] = acc
    return out


def eco_panda_step_agentwise(state, obj, graph, w, params):
    """Per-agent Eco-PANDA round: neighbor sums, no explicit projector.

    The dual update subtracts c (x_i+ - z_i+) directly; that difference is
    already zero-mean because mean(z) tracks mean(x) from the shared start.
    """
    x, z, y = state.x, state.z, state.y
    grad = obj.gradient(x)
    x1 = np.empty_like(x)
    for i in range(graph.n):
        x1[i] = x[i] - (grad[i] - y[i]) / params.eta
    z1 = _agent_mix(graph, w, z) + (x1 - x)
    y1 = np.empty_like(y)
    for i in range(graph.n):
        y1[i] = y[i] - params.c * (x1[i] - z1[i])
    return EcoPandaState(x=x1, z=z1, y=y1, k=state.k + 1)


def panda_step_agentwise(state, obj, graph, w, params):
    """Per-agent PANDA round (exact inner solve per block)."""
    x, z, y = state.x, state.z, state.y
    x1 = obj.conjugate_argmin(y)
    z1 = _agent_mix(graph, w, z) + (x1 - x)
    y1 = np.empty_like(y)
    for i in range(graph.n):
        y1[i] = y[i] - params.c_panda * (x1[i] - z1[i])
    return PandaState(x=x1, z=z1, y=y1, k=state.k + 1)


def diging_step_agentwise(state, obj, graph, w, params):
    x, v = state.x, state.v
    g0 = obj.gradient(x)
    x1 = _agent_mix(graph, w, x) - params.alpha_diging * v
    v1 = _agent_mix(graph, w, v) + obj.gradient(x1) - g0
    return DigingState(x=x1, v=v1, k=state.k + 1)


_INITS = {"eco_panda": eco_panda_init, "panda": panda_init, "diging": diging_init}
_STEPS = {"eco_panda": eco_panda_step, "panda": panda_step, "diging": diging_step}


@dataclass
class Trace:
    """Per-iteration metrics of one run; row 0 is the initial state."""

    method: str
    k: np.ndarray
    consensus_err: np.ndarray
    primal_residual: np.ndarray
    dual_residual: np.ndarray
    obj_gap: np.ndarray
    scalars_sent: np.ndarray
    diverged_at: int = None
    graph_hash: str = ""

    def __len__(self):
        return len(self.k)

    @property
    def diverged(self):
        return self.diverged_at is not None

    @property
    def relative_residual(self):
        r0 = self.primal_residual[0]
        return self.primal_residual / (r0 if r0 > 0 else 1.0)


@dataclass
class StateHistory:
    """Full iterate history of one run (index 0 is the initial state)."""

    xs: np.ndarray
    zs: np.ndarray = None
    ys: np.ndarray = None
    vs: np.ndarray = None


def run_solver(method, obj, seq, params, iters, weights=None, lazy=False,
               x0=None, record_states=False):
    """Drive one method for ``iters`` rounds over a graph sequence.

    Parameters
    ----------
    method : str
        One of ``eco_panda``, ``panda``, ``diging``.
    obj : QuadraticObjective
    seq : GraphSequence
        Must provide at least ``iters`` rounds.
    params : StepParams
    iters : int
    weights : list of ndarray, optional
        Precomputed per-round mixing matrices (built with the plain
        Metropolis rule when omitted).
    record_states : bool
        Also return the full state history.

    Returns
    -------
    (Trace, StateHistory or None)
        Runs that lose finiteness or exceed ``DIVERGENCE_FACTOR`` times the
        initial residual are truncated and flagged via ``diverged_at``;
        divergence is reported, never raised.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if iters < 1:
        raise ValueError(f"iters must be positive, got {iters}")
    if iters > seq.horizon:
        raise ValueError(f"iters={iters} exceeds the graph horizon {seq.horizon}")
    if seq.n != obj.n:
        raise ValueError(f"graph sequence n={seq.n} does not match objective n={obj.n}")
    if method == "eco_panda" and params.eta <= obj.L:
        warnings.warn(
            f"eta={params.eta} does not exceed the gradient Lipschitz constant L={obj.L:.6g}; "
            "the quadratic upper bound is invalid and the run may diverge",
            stacklevel=2,
        )
    if weights is None:
        weights = [metropolis_weights(g, lazy=lazy) for g in seq.graphs[:iters]]

    xbar, fstar = obj.centralized_solve()
    xstar = obj.stack(xbar)
    ystar = obj.dual_optimum()
    p = obj.p

    state = _INITS[method](obj, x0)
    step = _STEPS[method]

    cons, prim, dual, gap, sent = [], [], [], [], []
    hist_x, hist_z, hist_y, hist_v = [], [], [], []

    def record(st, total_sent):
        cons.append(np.linalg.norm(perp(st.x)))
        prim.append(np.linalg.norm(st.x - xstar))
        dual.append(np.linalg.norm(st.y - ystar) if hasattr(st, "y") else np.nan)
        gap.append(obj.value(obj.stack(st.x.mean(axis=0))) - fstar)
        sent.append(total_sent)
        if record_states:
            hist_x.append(st.x)
            if hasattr(st, "z"):
                hist_z.append(st.z)
                hist_y.append(st.y)
            else:
                hist_v.append(st.v)

    record(state, 0)
    r0 = prim[0]
    limit = DIVERGENCE_FACTOR * (r0 + 1.0)
    total = 0
    diverged_at = None
    per_edge = p if method in ("eco_panda", "panda") else 2 * p
    for k in range(iters):
        state = step(state, obj, weights[k], params)
        total += per_edge * 2 * len(seq.graphs[k].edges)
        record(state, total)
        resid = prim[-1]
        if not np.isfinite(resid) or resid > limit:
            diverged_at = k + 1
            break

    trace = Trace(
        method=method,
        k=np.arange(len(prim)),
        consensus_err=np.array(cons),
        primal_residual=np.array(prim),
        dual_residual=np.array(dual),
        obj_gap=np.array(gap),
        scalars_sent=np.array(sent, dtype=np.int64),
        diverged_at=diverged_at,
        graph_hash=sequence_hash(seq),
    )
    history = None
    if record_states:
        history = StateHistory(
            xs=np.array(hist_x),
            zs=np.array(hist_z) if hist_z else None,
            ys=np.array(hist_y) if hist_y else None,
            vs=np.array(hist_v) if hist_v else None,
        )
    return trace, history


def trace_to_csv(trace, diagnostics=None):
    """Render a trace as CSV text with the exact canonical header.

    ``diagnostics`` is an optional ordered mapping of extra column name to
    per-iteration array (appended after the base columns).  A comment line
    carries the graph-sequence hash so runs can be checked for having
    consumed identical graphs.
    """
    extras = diagnostics or {}
    for name, col in extras.items():
        if len(col) != len(trace):
            raise ValueError(f"diagnostic column {name!r} has length {len(col)}, expected {len(trace)}")
    header = TRACE_HEADER + ("," + ",".join(extras) if extras else "")
    lines = []
    if trace.graph_hash:
        lines.append(f"# graph_sha256={trace.graph_hash}")
    if trace.diverged:
        lines.append(f"# diverged_at={trace.diverged_at}")
    lines.append(header)
    for idx in range(len(trace)):
        row = [
            str(int(trace.k[idx])),
            trace.method,
            _fmt(trace.consensus_err[idx]),
            _fmt(trace.primal_residual[idx]),
            _fmt(trace.dual_residual[idx]),
            _fmt(trace.obj_gap[idx]),
            str(int(trace.scalars_sent[idx])),
        ]
        row.extend(_fmt(extras[name][idx]) for name in extras)
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def trace_from_csv(text):
    """Parse CSV text back into ``(Trace, extras)``; exact inverse of trace_to_csv."""
    graph_hash = ""
    diverged_at = None
    rows = []
    header = None
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if ln.startswith("#"):
            body = ln[1:].strip()
            if body.startswith("graph_sha256="):
                graph_hash = body.split("=", 1)[1]
            elif body.startswith("diverged_at="):
                diverged_at = int(body.split("=", 1)[1])
            continue
        if header is None:
            header = ln
            continue
        rows.append(ln.split(","))
    if header is None or not header.startswith(TRACE_HEADER):
        raise ValueError("trace CSV missing canonical header")
    extra_names = header[len(TRACE_HEADER):].lstrip(",").split(",") if len(header) > len(TRACE_HEADER) else []
    if not rows:
        raise ValueError("trace CSV has no data rows")
    methods = {row[1] for row in rows}
    if len(methods) != 1:
        raise ValueError(f"trace CSV mixes methods {sorted(methods)}")
    cols = list(zip(*rows))
    trace = Trace(
        method=rows[0][1],
        k=np.array([int(v) for v in cols[0]]),
        consensus_err=np.array([float(v) for v in cols[2]]),
        primal_residual=np.array([float(v) for v in cols[3]]),
        dual_residual=np.array([float(v) for v in cols[4]]),
        obj_gap=np.array([float(v) for v in cols[5]]),
        scalars_sent=np.array([int(v) for v in cols[6]], dtype=np.int64),
        diverged_at=diverged_at,
        graph_hash=graph_hash,
    )
    extras = {}
    for j, name in enumerate(extra_names):
        extras[name] = np.array([float(v) for v in cols[7 + j]])
    return trace, extras
