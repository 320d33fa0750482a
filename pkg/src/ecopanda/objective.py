"""Separable ridge least-squares objectives split across agents.

The network minimizes

    f(x) = sum_i f_i(x_i),
    f_i(x_i) = 1/(2 n d) ||H_i x_i - b_i||^2 + r/(2 n) ||x_i||^2,

where x stacks one p-vector per agent (an (n, p) array throughout).  When
all blocks agree, sum_i f_i(xbar) equals the centralized ridge problem
1/(2 n d) sum_i ||H_i xbar - b_i||^2 + r/2 ||xbar||^2, so the regularizer
is split as r/(2n) per agent.

Each agent's Hessian Q_i = 1/(n d) H_i^T H_i + (r/n) I is precomputed and
factored once; conjugate minimization (argmin of f minus a linear term) is
a block solve against these factors.
"""

from dataclasses import dataclass

import numpy as np

_FMT = ".17g"  # round-trip exact for doubles


def _fmt(v):
    return format(float(v), _FMT)


class QuadraticObjective:
    """Agent-separable ridge quadratic with precomputed block Hessians.

    Parameters
    ----------
    h : ndarray, shape (n, d, p)
        Per-agent data matrices.
    b : ndarray, shape (n, d)
        Per-agent observations.
    r : float
        Ridge weight; r >= 0 is accepted here as long as every block
        Hessian stays positive definite.
    seed : int or None
        Generator seed recorded for provenance (None when constructed
        directly from data).
    """

    def __init__(self, h, b, r, seed=None):
        h = np.asarray(h, dtype=float)
        b = np.asarray(b, dtype=float)
        if h.ndim != 3:
            raise ValueError(f"h must have shape (n, d, p), got {h.shape}")
        n, d, p = h.shape
        if b.shape != (n, d):
            raise ValueError(f"b shape {b.shape} does not match h {h.shape}")
        if r < 0:
            raise ValueError(f"ridge weight must be nonnegative, got {r}")
        self.n, self.d, self.p = n, d, p
        self.r = float(r)
        self.seed = seed
        self.scale = 1.0 / (2.0 * n * d)
        self.h = h
        self.b = b
        self.q = np.einsum("idp,idq->ipq", h, h) / (n * d) + (r / n) * np.eye(p)
        try:
            np.linalg.cholesky(self.q)
        except np.linalg.LinAlgError as exc:
            raise ValueError("some agent Hessian is not positive definite") from exc
        self.q_inv = np.linalg.inv(self.q)
        self.htb = np.einsum("idp,id->ip", h, b) / (n * d)
        evals = np.linalg.eigvalsh(self.q)
        self.mu = float(evals.min())
        self.L = float(evals.max())

    def _check_stack(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n, self.p):
            raise ValueError(f"expected an ({self.n}, {self.p}) stacked array, got {x.shape}")
        return x

    def value(self, x):
        """f(x) for a stacked (n, p) iterate."""
        x = self._check_stack(x)
        resid = np.einsum("idp,ip->id", self.h, x) - self.b
        return float(self.scale * np.sum(resid**2) + self.r / (2 * self.n) * np.sum(x**2))

    def gradient(self, x):
        """Blockwise gradient, shape (n, p)."""
        x = self._check_stack(x)
        resid = np.einsum("idp,ip->id", self.h, x) - self.b
        return np.einsum("idp,id->ip", self.h, resid) / (self.n * self.d) + (self.r / self.n) * x

    def conditioning(self):
        """(mu, L): extreme eigenvalues over all block Hessians."""
        return self.mu, self.L

    def conjugate_argmin(self, y):
        """argmin_x f(x) - <y, x>, i.e. the block solve Q_i x_i = y_i + H_i^T b_i/(nd)."""
        y = self._check_stack(y)
        return np.einsum("ipq,iq->ip", self.q_inv, y + self.htb)

    def stack(self, v):
        """Stack one p-vector onto every agent."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.p,):
            raise ValueError(f"expected a length-{self.p} vector, got shape {v.shape}")
        return np.tile(v, (self.n, 1))

    def centralized_solve(self):
        """(xbar*, f*): consensus minimizer of sum_i f_i and its value."""
        a = self.q.sum(axis=0)
        rhs = self.htb.sum(axis=0)
        xbar = np.linalg.solve(a, rhs)
        return xbar, self.value(self.stack(xbar))

    def dual_optimum(self):
        """y* with blocks grad f_i(xbar*); their mean is zero at the optimum."""
        xbar, _ = self.centralized_solve()
        return self.gradient(self.stack(xbar))


def generate_ridge_problem(n, p, d, r, seed):
    """Draw a synthetic instance: x_true ~ N(0, 10), H_i and noise ~ N(0, 0.1).

    Draw order is fixed (x_true, then H_i and xi_i per agent in agent order)
    so instances are reproducible from the seed alone.
    """
    if n < 1 or p < 1 or d < 1:
        raise ValueError(f"n, p, d must be positive, got {(n, p, d)}")
    if r <= 0:
        raise ValueError(f"ridge weight must be positive, got {r}")
    rng = np.random.default_rng(seed)
    x_true = rng.normal(0.0, np.sqrt(10.0), p)
    h = np.empty((n, d, p))
    b = np.empty((n, d))
    for i in range(n):
        h[i] = rng.normal(0.0, np.sqrt(0.1), (d, p))
        noise = rng.normal(0.0, np.sqrt(0.1), d)
        b[i] = h[i] @ x_true + noise
    return QuadraticObjective(h, b, r, seed=seed)


def problem_to_text(obj):
    """Serialize an instance with 17-significant-digit decimals (round-trip exact)."""
    seed = "none" if obj.seed is None else str(obj.seed)
    lines = [f"n={obj.n} p={obj.p} d={obj.d} r={_fmt(obj.r)} seed={seed}"]
    for i in range(obj.n):
        lines.append(f"H{i} " + " ".join(_fmt(v) for v in obj.h[i].ravel()))
        lines.append(f"b{i} " + " ".join(_fmt(v) for v in obj.b[i]))
    return "\n".join(lines) + "\n"


def problem_from_text(text):
    """Inverse of :func:`problem_to_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty problem text")
    try:
        kv = dict(item.split("=", 1) for item in lines[0].split())
        n, p, d = int(kv["n"]), int(kv["p"]), int(kv["d"])
        r = float(kv["r"])
        seed = None if kv["seed"] == "none" else int(kv["seed"])
    except (ValueError, KeyError) as exc:
        raise ValueError(f"bad problem header {lines[0]!r}") from exc
    if len(lines) - 1 != 2 * n:
        raise ValueError(f"expected {2 * n} data lines, found {len(lines) - 1}")
    h = np.empty((n, d, p))
    b = np.empty((n, d))
    for i in range(n):
        hline = lines[1 + 2 * i].split()
        bline = lines[2 + 2 * i].split()
        if hline[0] != f"H{i}" or bline[0] != f"b{i}":
            raise ValueError(f"agent {i} lines out of order")
        hvals = [float(v) for v in hline[1:]]
        bvals = [float(v) for v in bline[1:]]
        if len(hvals) != d * p or len(bvals) != d:
            raise ValueError(f"agent {i} has wrong entry counts")
        h[i] = np.array(hvals).reshape(d, p)
        b[i] = bvals
    return QuadraticObjective(h, b, r, seed=seed)
