"""Time-varying communication graphs and their mixing matrices.

A network of ``n`` agents (numbered ``0 .. n-1``) is described per round
``k`` by an undirected edge set.  Each round's averaging matrix follows the
Metropolis rule

    w_ij = 1 / max{d_i, d_j}          (i, j) an edge,
    w_ii = 1 - sum_{j in N_i} w_ij,
    w_ij = 0                          otherwise,

or the lazy variant ``w_ij = 1 / (1 + max{d_i, d_j})``, which keeps every
self-weight positive and restores contraction on degree-regular topologies
(a single static edge pair under the plain rule is a swap and never mixes).

Joint contraction of a window of ``b`` consecutive rounds is measured by

    delta_b(k) = sigma_max( W(k) W(k-1) ... W(k-b+1) - (1/n) 11^T ),

computed with a full SVD; ``delta = sup_k delta_b(k) < 1`` certifies that
the window length ``b`` mixes the whole sequence.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

#: Windows are certified contracting only when delta stays below 1 by this margin,
#: so a direction preserved exactly (sigma = 1 up to roundoff) is never certified.
CONTRACTION_TOL = 1e-12


def pair_index(n):
    """Unordered pairs (i, j), i < j, in lexicographic order."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


@dataclass(frozen=True)
class TimeGraph:
    """Edge set of one round; ``edges`` holds normalized pairs (i, j) with i < j."""

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one agent, got n={self.n}")
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i}, {j}) invalid for n={self.n}")

    @classmethod
    def from_pairs(cls, n, pairs):
        """Build a graph from arbitrary (i, j) pairs; orientation and duplicates are normalized away."""
        norm = set()
        for i, j in pairs:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop ({i}, {i}) not allowed")
            norm.add((min(i, j), max(i, j)))
        return cls(n, frozenset(norm))

    def degrees(self):
        d = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def neighbors(self, i):
        return sorted(j if a == i else a for a, j in self.edges if i in (a, j))


@dataclass(frozen=True)
class GraphSequence:
    """A horizon of per-round graphs over a fixed agent set."""

    n: int
    graphs: tuple

    def __post_init__(self):
        for g in self.graphs:
            if g.n != self.n:
                raise ValueError("all rounds must share the same agent count")

    @property
    def horizon(self):
        return len(self.graphs)


def complete_graph(n):
    return TimeGraph(n, frozenset(pair_index(n)))


def path_graph(n):
    return TimeGraph(n, frozenset((i, i + 1) for i in range(n - 1)))


def static_sequence(graph, horizon):
    """The same graph repeated for ``horizon`` rounds."""
    return GraphSequence(graph.n, (graph,) * horizon)


def generate_graph_sequence(n, pi, horizon, seed):
    """Sample an i.i.d. edge-probability-``pi`` sequence of ``horizon`` rounds.

    Each unordered pair gets one independent coin per round.  Coins come from
    a Philox counter-based generator keyed by ``seed`` with the round index in
    the counter's high bits, so round k's edges do not depend on the horizon
    or on the order rounds are materialized in.
    """
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"pi must lie in [0, 1], got {pi}")
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    pairs = pair_index(n)
    graphs = []
    for k in range(horizon):
        rng = np.random.Generator(np.random.Philox(key=seed, counter=k << 128))
        coins = rng.random(len(pairs))
        edges = frozenset(p for p, u in zip(pairs, coins) if u < pi)
        graphs.append(TimeGraph(n, edges))
    return GraphSequence(n, tuple(graphs))


def metropolis_weights(graph, lazy=False):
    """Metropolis averaging matrix of one round as a dense (n, n) array.

    Parameters
    ----------
    graph : TimeGraph
    lazy : bool
        Use 1/(1 + max degree) edge weights instead of 1/max degree.

    Returns
    -------
    ndarray
        Symmetric doubly stochastic matrix supported on the graph's edges
        plus the diagonal.  Agents with no neighbors keep w_ii = 1.
    """
    n = graph.n
    deg = graph.degrees()
    w = np.zeros((n, n))
    for i, j in graph.edges:
        m = max(deg[i], deg[j])
        w[i, j] = w[j, i] = 1.0 / (1.0 + m) if lazy else 1.0 / m
    off = w.sum(axis=1)
    for i in range(n):
        w[i, i] = 1.0 - off[i]
    return w


@dataclass(frozen=True)
class MixingReport:
    """Outcome of checking one averaging matrix against its round's graph."""

    support_ok: bool
    support_violation: float
    doubly_stochastic_ok: bool
    stochasticity_violation: float

    @property
    def passed(self):
        return self.support_ok and self.doubly_stochastic_ok


def verify_mixing_matrix(w, graph, tol=1e-12):
    """Check decentralized support and double stochasticity of ``w``.

    Support: w_ij may be nonzero only on the graph's edges or the diagonal.
    Double stochasticity: rows and columns sum to 1 and no entry is below 0,
    each within ``tol``.
    """
    n = graph.n
    if w.shape != (n, n):
        raise ValueError(f"matrix shape {w.shape} does not match n={n}")
    mask = np.zeros((n, n), dtype=bool)
    for i, j in graph.edges:
        mask[i, j] = mask[j, i] = True
    np.fill_diagonal(mask, True)
    support_violation = float(np.abs(np.where(mask, 0.0, w)).max(initial=0.0))
    row_err = np.abs(w.sum(axis=1) - 1.0).max()
    col_err = np.abs(w.sum(axis=0) - 1.0).max()
    neg_err = max(0.0, float(-w.min()))
    stoch_violation = float(max(row_err, col_err, neg_err))
    return MixingReport(
        support_ok=support_violation <= tol,
        support_violation=support_violation,
        doubly_stochastic_ok=stoch_violation <= tol,
        stochasticity_violation=stoch_violation,
    )


def window_product(ws, k, b):
    """Product W(k) W(k-1) ... W(k-b+1); ``b = 0`` gives the identity.

    ``ws`` is the per-round matrix list indexed by round.  Raises if the
    window would reach before round 0 or past the end of the list.
    """
    if b < 0:
        raise ValueError(f"window length must be nonnegative, got {b}")
    if k >= len(ws):
        raise ValueError(f"round {k} beyond the sequence (horizon {len(ws)})")
    if k - b + 1 < 0:
        raise ValueError(f"window of length {b} ending at round {k} has insufficient history")
    n = ws[0].shape[0] if ws else 0
    out = np.eye(n)
    for t in range(k - b + 1, k + 1):
        out = ws[t] @ out
    return out


def delta_of_window(wb):
    """Largest singular value of ``wb`` minus the consensus projector (1/n) 11^T."""
    n = wb.shape[0]
    dev = wb - np.full((n, n), 1.0 / n)
    return float(np.linalg.svd(dev, compute_uv=False)[0])


@dataclass(frozen=True)
class SpectrumReport:
    """Joint spectrum of every length-``b`` window of a matrix sequence."""

    b: int
    delta: float
    per_window: tuple  # pairs (k, delta_b(k)) for k = b-1 .. horizon-1

    @property
    def contracts(self):
        return self.delta < 1.0 - CONTRACTION_TOL


def estimate_joint_spectrum(ws, b):
    """delta_b(k) for every admissible window end; ``delta`` is their supremum."""
    if b < 1:
        raise ValueError(f"window length must be at least 1, got {b}")
    if b > len(ws):
        raise ValueError(f"window length {b} exceeds horizon {len(ws)}")
    per = []
    for k in range(b - 1, len(ws)):
        per.append((k, delta_of_window(window_product(ws, k, b))))
    delta = max(d for _, d in per)
    return SpectrumReport(b=b, delta=delta, per_window=tuple(per))


def find_contracting_window(ws, b_max=50):
    """Smallest ``b <= b_max`` whose every window contracts, with its delta.

    Scans window lengths in increasing order and abandons a candidate as soon
    as one window fails to contract.  Returns ``None`` when no window length
    up to ``b_max`` (capped at the horizon) is certified.
    """
    for b in range(1, min(b_max, len(ws)) + 1):
        worst = 0.0
        ok = True
        for k in range(b - 1, len(ws)):
            d = delta_of_window(window_product(ws, k, b))
            if d >= 1.0 - CONTRACTION_TOL:
                ok = False
                break
            worst = max(worst, d)
        if ok:
            return b, worst
    return None


def graphs_to_text(seq):
    """Line-oriented serialization: header then one ``k: i-j i-j ...`` line per round."""
    lines = [f"n={seq.n} horizon={seq.horizon}"]
    for k, g in enumerate(seq.graphs):
        body = " ".join(f"{i}-{j}" for i, j in sorted(g.edges))
        lines.append(f"{k}: {body}".rstrip())
    return "\n".join(lines) + "\n"


def graphs_from_text(text):
    """Inverse of :func:`graphs_to_text`; raises ValueError on malformed input."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty graph text")
    header = lines[0].split()
    try:
        kv = dict(item.split("=", 1) for item in header)
        n = int(kv["n"])
        horizon = int(kv["horizon"])
    except (ValueError, KeyError) as exc:
        raise ValueError(f"bad graph header {lines[0]!r}") from exc
    if len(lines) - 1 != horizon:
        raise ValueError(f"expected {horizon} round lines, found {len(lines) - 1}")
    graphs = []
    for k, ln in enumerate(lines[1:]):
        label, _, body = ln.partition(":")
        if label.strip() != str(k):
            raise ValueError(f"round line {ln!r} out of order (expected {k})")
        pairs = []
        for tok in body.split():
            a, _, c = tok.partition("-")
            try:
                pairs.append((int(a), int(c)))
            except ValueError as exc:
                raise ValueError(f"bad edge token {tok!r} in round {k}") from exc
        graphs.append(TimeGraph.from_pairs(n, pairs))
    return GraphSequence(n, tuple(graphs))


def sequence_hash(seq):
    """Stable hex digest of a graph sequence's serialized form."""
    return hashlib.sha256(graphs_to_text(seq).encode()).hexdigest()
