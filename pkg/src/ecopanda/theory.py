"""Convergence-rate machinery: theorem constants, step bounds, diagnostics.

Given a mu-strongly convex objective with L-Lipschitz gradients, a curvature
bound eta > L, and a graph sequence whose length-B windows contract with
joint spectrum delta < 1, the linearized dual-ascent method converges
R-linearly for dual steps c in (0, c_max).  The constants are computed
exactly as printed in their source:

    kappa = L / mu
    q     = 1 - mu / eta
    rho   = max{L / eta, q}
    C     = q (1 - sqrt(q)) / ((max{1/eta, q/mu} + B (1 - delta)) (3 + q))
    alpha = C / mu                         (must be < 1)
    lambda_cbar^B = (alpha delta + sqrt(4 kappa^{3/2} (4 kappa^{3/2} - alpha delta^2)))
                    / (alpha + kappa^{3/2})
    cbar  = alpha mu (lambda_cbar^B - delta)^2 / (2 sqrt(kappa))
    c_max = alpha mu (1 - delta)^2 / 2
    rate(c) = (1 - c/(2L))^{1/(2B)}              for c in (0, cbar],
              (delta + sqrt(2 c sqrt(kappa)/(alpha mu)))^{1/B}   otherwise.

The printed lambda_cbar^B routinely exceeds 1 and puts cbar above c_max,
which looks like a typo in the source display: the two rate branches cross
at a "knee" that does lie in (delta, 1).  Solving branch1 = branch2 for the
crossing gives

    lambda_knee^B = (alpha delta + sqrt(4 kappa^{3/2} (4 kappa^{3/2} + alpha (1 - delta^2))))
                    / (alpha + 4 kappa^{3/2})

(note the + alpha (1 - delta^2) and the 4 kappa^{3/2} denominator), whose
cbar always lands inside (0, c_max).  Both variants are computed; the
printed ones drive :func:`rate_bound`, and disagreements are surfaced as
:class:`TheoryConsistencyWarning` plus fields on the returned constants,
never silently corrected.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class TheoryConsistencyWarning(UserWarning):
    """A printed-formula consistency check failed (suspected source typo)."""


@dataclass(frozen=True)
class TheoryConstants:
    """Every rate constant for one (mu, L, eta, B, delta) tuple.

    ``lambda_cbar_b`` and ``cbar`` follow the printed formulas;
    ``lambda_knee_b`` and ``cbar_knee`` are the derived branch-crossing
    values kept alongside for the consistency checks.
    """

    mu: float
    L: float
    eta: float
    b: int
    delta: float
    kappa: float
    q: float
    rho: float
    C: float
    alpha: float
    lambda_cbar_b: float
    cbar: float
    c_max: float
    lambda_knee_b: float
    cbar_knee: float
    lambda_cbar_b_in_band: bool
    cbar_in_interval: bool
    branch_gap_at_cbar: float
    branch_gap_at_knee: float

    def as_lines(self):
        """name=value rendering (17 significant digits) for reports and the CLI."""
        out = []
        for name in ("mu", "L", "eta", "b", "delta", "kappa", "q", "rho", "C",
                     "alpha", "lambda_cbar_b", "cbar", "c_max", "lambda_knee_b",
                     "cbar_knee", "lambda_cbar_b_in_band", "cbar_in_interval",
                     "branch_gap_at_cbar", "branch_gap_at_knee"):
            v = getattr(self, name)
            if isinstance(v, bool):
                out.append(f"{name}={str(v).lower()}")
            elif isinstance(v, int):
                out.append(f"{name}={v}")
            else:
                out.append(f"{name}={format(float(v), '.17g')}")
        return out


def _branch1(L, b, c):
    base = 1.0 - c / (2.0 * L)
    return base ** (1.0 / (2.0 * b)) if base > 0 else float("nan")


def _branch2(mu, kappa, alpha, delta, b, c):
    return (delta + np.sqrt(2.0 * c * np.sqrt(kappa) / (alpha * mu))) ** (1.0 / b)


def theorem_constants(mu, L, b, delta, eta=None):
    """Compute rate constants; ``eta`` defaults to 4L (the proof's choice).

    Raises ValueError when the inputs violate 0 < mu <= L < eta, b >= 1,
    0 <= delta < 1, when alpha comes out >= 1, or when any constant is not
    finite.  Emits :class:`TheoryConsistencyWarning` when the printed
    lambda_cbar^B leaves (delta, 1) or cbar leaves (0, c_max).
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if L < mu:
        raise ValueError(f"need mu <= L, got mu={mu}, L={L}")
    if eta is None:
        eta = 4.0 * L
    if eta <= L:
        raise ValueError(f"need eta > L, got eta={eta}, L={L}")
    if b < 1:
        raise ValueError(f"window length b must be at least 1, got {b}")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")

    kappa = L / mu
    q = 1.0 - mu / eta
    rho = max(L / eta, q)
    denom = (max(1.0 / eta, q / mu) + b * (1.0 - delta)) * (3.0 + q)
    C = q * (1.0 - np.sqrt(q)) / denom
    alpha = C / mu
    if not alpha < 1.0:
        raise ValueError(f"alpha = C/mu = {alpha} is not below 1; constants are invalid")

    k32 = kappa ** 1.5
    lambda_cbar_b = (alpha * delta + np.sqrt(4.0 * k32 * (4.0 * k32 - alpha * delta**2))) / (alpha + k32)
    cbar = alpha * mu * (lambda_cbar_b - delta) ** 2 / (2.0 * np.sqrt(kappa))
    c_max = alpha * mu * (1.0 - delta) ** 2 / 2.0
    lambda_knee_b = (alpha * delta + np.sqrt(4.0 * k32 * (4.0 * k32 + alpha * (1.0 - delta**2)))) / (alpha + 4.0 * k32)
    cbar_knee = alpha * mu * (lambda_knee_b - delta) ** 2 / (2.0 * np.sqrt(kappa))

    values = (kappa, q, rho, C, alpha, lambda_cbar_b, cbar, c_max, lambda_knee_b, cbar_knee)
    if not all(np.isfinite(v) for v in values):
        raise ValueError(f"non-finite constant among {values}")

    in_band = bool(delta < lambda_cbar_b < 1.0)
    in_interval = bool(0.0 < cbar < c_max)
    gap_cbar = abs(_branch1(L, b, cbar) - _branch2(mu, kappa, alpha, delta, b, cbar))
    gap_knee = abs(_branch1(L, b, cbar_knee) - _branch2(mu, kappa, alpha, delta, b, cbar_knee))
    if not in_band:
        warnings.warn(
            f"printed lambda_cbar^B = {lambda_cbar_b:.6g} is outside (delta, 1) = "
            f"({delta:.6g}, 1); the branch-crossing value {lambda_knee_b:.6g} is inside",
            TheoryConsistencyWarning,
            stacklevel=2,
        )
    if not in_interval:
        warnings.warn(
            f"printed cbar = {cbar:.6g} is outside (0, c_max) = (0, {c_max:.6g}); "
            f"the branch-crossing value {cbar_knee:.6g} is inside",
            TheoryConsistencyWarning,
            stacklevel=2,
        )

    return TheoryConstants(
        mu=float(mu), L=float(L), eta=float(eta), b=int(b), delta=float(delta),
        kappa=float(kappa), q=float(q), rho=float(rho), C=float(C), alpha=float(alpha),
        lambda_cbar_b=float(lambda_cbar_b), cbar=float(cbar), c_max=float(c_max),
        lambda_knee_b=float(lambda_knee_b), cbar_knee=float(cbar_knee),
        lambda_cbar_b_in_band=in_band, cbar_in_interval=in_interval,
        branch_gap_at_cbar=float(gap_cbar), branch_gap_at_knee=float(gap_knee),
    )


def admissible_step_interval(constants):
    """Open interval (0, c_max) of dual steps the theorem admits."""
    return 0.0, constants.c_max


def rate_bound(constants, c):
    """R-linear rate bound at dual step ``c``, using the printed branch split.

    ``c`` must lie in the open admissible interval; the result must come out
    strictly below 1 or the constants were inconsistent for this input.
    """
    lo, hi = admissible_step_interval(constants)
    if not lo < c < hi:
        raise ValueError(f"step c={c} outside the admissible interval ({lo}, {hi:.6g})")
    if c <= constants.cbar:
        lam = _branch1(constants.L, constants.b, c)
    else:
        lam = _branch2(constants.mu, constants.kappa, constants.alpha, constants.delta, constants.b, c)
    if not lam < 1.0:
        raise ValueError(f"rate bound {lam} is not below 1 at c={c}; printed constants are inconsistent here")
    return float(lam)


class RateFit(NamedTuple):
    lam: float
    r_squared: float


def fit_empirical_rate(series, window=1.0 / 3.0):
    """Geometric-rate fit over the tail of a positive series.

    Least-squares slope of log(series) against iteration index over the last
    ``window`` fraction of points (final third by default, skipping
    transients), exponentiated.  Exact zeros are clamped to 1e-300 with a
    warning; negative values are an error.  The window must cover at least
    50 points.

    Returns
    -------
    RateFit
        ``lam`` (the per-iteration factor) and the fit's R^2.  A constant
        series fits perfectly with lam = 1.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1:
        raise ValueError(f"series must be one-dimensional, got shape {series.shape}")
    if not 0.0 < window <= 1.0:
        raise ValueError(f"window must be a fraction in (0, 1], got {window}")
    w = int(np.ceil(len(series) * window))
    if w < 50:
        raise ValueError(f"fit window has {w} points; at least 50 are required")
    tail = series[len(series) - w:]
    if np.any(tail < 0):
        raise ValueError("series must be nonnegative")
    if np.any(tail == 0):
        warnings.warn("series hits exact zero; clamping at 1e-300", stacklevel=2)
        tail = np.clip(tail, 1e-300, None)
    ks = np.arange(len(series) - w, len(series), dtype=float)
    logy = np.log(tail)
    slope, intercept = np.polyfit(ks, logy, 1)
    pred = slope * ks + intercept
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return RateFit(lam=float(np.exp(slope)), r_squared=r2)


@dataclass(frozen=True)
class DiagnosticSeries:
    """Norms of the eight coupled error sequences of a dual-ascent run.

    With y* the dual optimum, Pi the zero-mean projector, x_p(k) the exact
    inner solve at y(k-1), and the conventions y(-1) = y(0) and
    x(-1) = x(0) = z(0):

        r(k)        = y(k) - y*
        xperp(k)    = Pi x(k)
        dxz(k)      = Pi (x(k) - z(k))
        dy(k)       = y(k) - y(k-1)
        s(k)        = ( ||x(k) - x(k-1)||, ||x(k) - x_p(k)|| )
        zperp(k)    = Pi z(k)
        dx(k)       = x(k) - x_p(k)
        eps(k)      = Pi (x(k) - x_p(k) - z(k))
    """

    r_norm: np.ndarray
    xperp_norm: np.ndarray
    dxz_norm: np.ndarray
    dy_norm: np.ndarray
    s_norm: np.ndarray
    zperp_norm: np.ndarray
    dx_norm: np.ndarray
    eps_norm: np.ndarray

    COLUMNS = ("r_norm", "xperp_norm", "dxz_norm", "dy_norm",
               "s_norm", "zperp_norm", "dx_norm", "eps_norm")

    def as_columns(self):
        """Ordered name -> array mapping matching the trace CSV column order."""
        return {name: getattr(self, name) for name in self.COLUMNS}


def small_gain_sequences(history, obj, y_star):
    """Compute all eight diagnostic sequences from a recorded state history.

    ``history`` must carry x, z, and y iterates (Eco-PANDA or PANDA runs);
    at the optimum state every sequence is identically zero.
    """
    if history.zs is None or history.ys is None:
        raise ValueError("diagnostics need a dual-ascent history with x, z, and y iterates")
    xs, zs, ys = history.xs, history.zs, history.ys
    y_star = np.asarray(y_star, dtype=float)

    def tnorm(a):
        return np.linalg.norm(a, axis=(1, 2))

    def tperp(a):
        return a - a.mean(axis=1, keepdims=True)

    x_prev = np.concatenate([xs[:1], xs[:-1]])
    y_prev = np.concatenate([ys[:1], ys[:-1]])
    xp = np.empty_like(xs)
    for t in range(len(ys)):
        xp[t] = obj.conjugate_argmin(y_prev[t])

    dx = tnorm(xs - xp)
    return DiagnosticSeries(
        r_norm=tnorm(ys - y_star[None]),
        xperp_norm=tnorm(tperp(xs)),
        dxz_norm=tnorm(tperp(xs - zs)),
        dy_norm=tnorm(ys - y_prev),
        s_norm=np.sqrt(tnorm(xs - x_prev) ** 2 + dx**2),
        zperp_norm=tnorm(tperp(zs)),
        dx_norm=dx,
        eps_norm=tnorm(tperp(xs - xp - zs)),
    )
