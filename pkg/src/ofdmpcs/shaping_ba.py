"""Rate-optimal shaping: constrained Blahut-Arimoto over a moment budget.

Maximizes the mutual information of a discrete constellation on AWGN subject
to a fourth-moment budget (``sum p A**4 = c0``), unit mean power, and
normalization.  The alternating scheme is classic Blahut-Arimoto with the
input update replaced by a Lagrangian exponential-family step,

    p(x)  proportional to  exp{ u(x) - lam1 * A_x**4 - lam2 * A_x**2 },

where ``u(x)`` is a Monte-Carlo estimate of ``integral p(y|x) log q(x|y) dy``
and the multipliers ``(lam1, lam2)`` are chosen so the moment constraints
hold exactly: a coarse grid scan locates the root of the residual system and
Newton iterations polish it (analytic 2x2 Jacobian).

Numerical conventions:

* Everything runs in log space; exponential sums are max-shifted.
* The solver evaluates residuals normalized by ``sum_x g_x``, which makes
  them literal moment residuals of the candidate distribution and keeps the
  grid scan meaningful (raw residuals vanish spuriously for large
  multipliers because every ``g_x`` underflows together).  The Newton step
  is unchanged by the normalization.
* Newton also stops on the residual norm: at the endpoints of the feasible
  moment interval the root lies at infinity and steps stop shrinking, while
  the residual still decays to zero.
* By default one Monte-Carlo sample set, drawn under the uniform input, is
  shared across all outer iterations.  The fixed-sample objective is then
  exactly alternately maximized, so its trace is non-decreasing to machine
  precision.  ``resample_each_iter`` redraws under the current iterate
  instead (the textbook estimator); the trace is then monotone only up to
  Monte-Carlo noise.
* Iterates are ring-symmetrized (the per-point integrals are averaged over
  each ring before the update), which is exact for the ring-uniform model
  and lets the solver run on W ring masses instead of Q probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .constellation import Constellation, Distribution
from .rates import ChannelSpec, mutual_information
from .seeds import derive_seed
from .shaping import ShapingResult, feasible_c0_range

_NEG_INF = -np.inf
_LOG_TINY = float(np.log(np.finfo(float).tiny))
EXIT_RESIDUAL_TOL = 1e-4


@dataclass(frozen=True)
class MBAConfig:
    """Settings for :func:`run_mba`.

    ``outer_tol`` stops the outer loop on the squared change of the
    per-point probability vector (and, secondarily, on a relative objective
    plateau).  Grid parameters bound the multiplier scan; Newton walks
    outside them freely.
    """

    c0: float
    noise_power: float
    n_mc: int = 10_000
    outer_tol: float = 1e-5
    max_outer: int = 300
    newton_step_tol: float = 1e-18
    newton_residual_tol: float = 1e-11
    newton_max_iter: int = 200
    grid_lo: float = -20.0
    grid_hi: float = 20.0
    grid_step: float = 0.5
    resample_each_iter: bool = False
    state: str = "rings"          # "rings" | "points"
    air_n_mc: int = 100_000

    def __post_init__(self):
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.n_mc < 100:
            raise ValueError("n_mc too small to estimate the update integrals")
        if self.state not in ("rings", "points"):
            raise ValueError("state must be 'rings' or 'points'")


# ---------------------------------------------------------------------------
# channel tables


def _per_point(p) -> np.ndarray:
    if isinstance(p, Distribution):
        return np.asarray(p.per_point, dtype=float)
    return np.asarray(p, dtype=float)


def _log_likelihood(c: Constellation, samples: np.ndarray,
                    sigma2: float) -> np.ndarray:
    """(Q, M) table of log p(y_m | x_q) for the AWGN channel."""
    y = np.asarray(samples, dtype=complex).ravel()
    d2 = np.abs(c.points[:, None] - y[None, :]) ** 2
    return -d2 / sigma2 - np.log(np.pi * sigma2)


def _log_probs(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(p > 0, np.log(np.maximum(p, 1e-300)), _NEG_INF)


def q_update(c: Constellation, p, samples, spec: ChannelSpec) -> np.ndarray:
    """Posterior table q(x | y_m) by Bayes' rule; columns sum to one."""
    loglik = _log_likelihood(c, samples, spec.noise_power)
    logp = _log_probs(_per_point(p))
    num = logp[:, None] + loglik
    return np.exp(num - logsumexp(num, axis=0, keepdims=True))


def mc_integrals(c: Constellation, p, q_table, samples,
                 spec: ChannelSpec) -> np.ndarray:
    """Monte-Carlo estimates of integral p(y|x) log q(x|y) dy, all x at once.

    ``p`` must be the distribution the samples were drawn under (it forms
    the importance weights ``p(y_m|x) / sum_x' p(y_m|x') p(x')``).  A point
    whose posterior row is identically zero (zero prior mass) contributes
    ``-inf`` wherever its weight is positive, matching the limit of the
    exact integral; isolated zero cells are treated as underflow instead.
    """
    loglik = _log_likelihood(c, samples, spec.noise_power)
    logp_draw = _log_probs(_per_point(p))
    log_mix = logsumexp(loglik + logp_draw[:, None], axis=0)
    w = np.exp(loglik - log_mix[None, :])
    q = np.asarray(q_table, dtype=float)
    with np.errstate(divide="ignore"):
        logq = np.where(q > 0, np.log(np.maximum(q, 1e-300)), _NEG_INF)
    # a point is unreachable only if its posterior vanishes for EVERY
    # sample (zero prior); scattered zeros are exponent underflow on far
    # samples, where the true contribution w * log q vanishes (w shrinks
    # faster than log q diverges), so those get a floored logarithm
    dead_row = np.all(q == 0.0, axis=1, keepdims=True)
    terms = w * np.where(np.isfinite(logq), logq, _LOG_TINY)
    terms = np.where(dead_row & (w > 0.0), _NEG_INF, terms)
    return np.mean(terms, axis=1)


def mc_integral(x: int, c: Constellation, p, q_table, samples,
                spec: ChannelSpec) -> float:
    """Single-point view of :func:`mc_integrals`."""
    return float(mc_integrals(c, p, q_table, samples, spec)[x])


# ---------------------------------------------------------------------------
# multiplier system


def _residual_system(u, a2, a4, c0, lam1, lam2, scaled):
    """Residuals (f1, f2) and Jacobian of the exponential-family update.

    ``u`` may contain -inf (dead points); those contribute zero weight.
    The shifted weights g are computed with the running maximum removed;
    ``scaled`` divides by sum(g), turning residuals into literal moment
    mismatches of the candidate distribution.
    """
    e = u - lam1 * a4 - lam2 * a2
    finite = np.isfinite(e)
    if not np.any(finite):
        raise ValueError("all update weights vanished; integrals are degenerate")
    shift = float(np.max(e[finite]))
    g = np.where(finite, np.exp(e - shift), 0.0)
    total = float(g.sum())
    f = np.array([np.dot(a2 - 1.0, g), np.dot(a4 - c0, g)])
    jac = -np.array([
        [np.dot((a2 - 1.0) * a4, g), np.dot((a2 - 1.0) * a2, g)],
        [np.dot((a4 - c0) * a4, g), np.dot((a4 - c0) * a2, g)],
    ])
    if scaled:
        return f / total, jac / total
    with np.errstate(over="ignore", invalid="ignore"):
        back = np.exp(shift)
        restored_f, restored_jac = f * back, jac * back
    if not np.isfinite(back) or not np.all(np.isfinite(restored_f)):
        raise OverflowError(
            f"residuals overflow despite stabilization at lambda=({lam1}, {lam2})")
    return restored_f, restored_jac


def multiplier_residuals(lam1: float, lam2: float, integrals, c: Constellation,
                         c0: float, scaled: bool = False):
    """Constraint residuals (f1, f2) and their 2x2 Jacobian in (lam1, lam2).

    f1 drives the unit-power constraint, f2 the fourth-moment budget; both
    are weighted sums of g_x = exp(u_x - lam1 A**4 - lam2 A**2) over points.
    """
    u = np.asarray(integrals, dtype=float)
    a2 = c.amplitudes ** 2
    a4 = a2 ** 2
    if u.shape != a2.shape:
        raise ValueError("need one integral per constellation point")
    return _residual_system(u, a2, a4, c0, lam1, lam2, scaled)


def grid_init(residual_fn, ranges, resolution: float):
    """Coarse grid argmin of ||(f1, f2)|| over a rectangle of multipliers.

    ``ranges`` is ((lo1, hi1), (lo2, hi2)).  Ties keep the first point in
    scan order (lam1-major, lam2 within).  Returns ((lam1, lam2), norm).
    """
    (lo1, hi1), (lo2, hi2) = ranges
    l1s = np.arange(lo1, hi1 + 0.5 * resolution, resolution)
    l2s = np.arange(lo2, hi2 + 0.5 * resolution, resolution)
    best, best_norm = None, np.inf
    for l1 in l1s:
        for l2 in l2s:
            out = residual_fn(l1, l2)
            f = np.asarray(out[0] if isinstance(out, tuple) else out,
                           dtype=float)
            norm = float(np.hypot(f[0], f[1]))
            if norm < best_norm:
                best, best_norm = (float(l1), float(l2)), norm
    return best, best_norm


@dataclass(frozen=True)
class NewtonResult:
    lam: np.ndarray
    converged: bool
    iterations: int
    used_damping: bool


def newton_solve(residual_fn, lam0, step_tol: float = 1e-18,
                 residual_tol: float = 1e-11, max_iter: int = 200,
                 cond_limit: float = 1e12) -> NewtonResult:
    """Damped Newton iteration on the 2x2 residual system.

    Stops when the squared step norm falls below ``step_tol`` or the
    residual norm below ``residual_tol``.  Every step is line-searched (the
    Newton direction is always a descent direction for ||f||, so halving
    finds a decrease near regular roots and full steps keep the quadratic
    rate); ill-conditioned Jacobians switch to a pseudo-inverse direction.
    Failure to decrease the residual ends the iteration unconverged — this
    happens when the root sits at infinity, e.g. for a fourth-moment target
    on the boundary of the feasible interval.
    """
    lam = np.array(lam0, dtype=float)
    used_damping = False
    for it in range(1, max_iter + 1):
        f, jac = residual_fn(lam[0], lam[1])
        f = np.asarray(f, dtype=float)
        norm = float(np.hypot(f[0], f[1]))
        if not np.isfinite(norm):
            return NewtonResult(lam, False, it, used_damping)
        if norm <= residual_tol:
            return NewtonResult(lam, True, it, used_damping)
        jac = np.asarray(jac, dtype=float)
        bad = not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > cond_limit
        if bad:
            step = -np.linalg.pinv(jac) @ f
        else:
            step = np.linalg.solve(jac, -f)
        alpha, ok = 1.0, False
        while alpha > 2.0 ** -30:
            f_try, _ = residual_fn(*(lam + alpha * step))
            f_try = np.asarray(f_try, dtype=float)
            if np.all(np.isfinite(f_try)) and float(np.hypot(*f_try)) < norm:
                ok = True
                break
            alpha *= 0.5
        if not ok:
            return NewtonResult(lam, False, it, used_damping)
        used_damping = used_damping or bad or alpha < 1.0
        step = alpha * step
        lam = lam + step
        if float(step @ step) <= step_tol:
            return NewtonResult(lam, True, it, used_damping)
    return NewtonResult(lam, False, max_iter, used_damping)


# ---------------------------------------------------------------------------
# bisection fallback for the multiplier system
#
# The normalized moments of the tilted weights g = exp(u - l1*A^4 - l2*A^2)
# are strictly monotone: sum(g A^2)/sum(g) decreases in l2 at fixed l1
# (its derivative is -Var(A^2) under the tilt), and on the manifold where
# that moment equals one, sum(g A^4)/sum(g) decreases in l1 (Cauchy-Schwarz).
# Nested scalar root finding is therefore globally convergent, including
# targets at the feasible boundary where the root runs off to infinity and
# Newton stalls; there the bracket expansion caps out and the cap yields the
# boundary distribution to within exp(-cap)-level residuals.

_OUTER_CAP = 512.0


def _tilted_moments(u, a2, a4, lam1, lam2):
    e = u - lam1 * a4 - lam2 * a2
    finite = np.isfinite(e)
    g = np.where(finite, np.exp(e - np.max(e[finite])), 0.0)
    total = g.sum()
    return float(g @ a2) / total, float(g @ a4) / total


def _power_balance_root(u, a2, a4, lam1):
    """lam2 making the tilted mean-square amplitude equal one, at fixed lam1."""
    def f(lam2):
        return _tilted_moments(u, a2, a4, lam1, lam2)[0] - 1.0

    # |lam2| needed to balance any |lam1| <= cap is at most ~2 max(a2) cap
    inner_cap = 8.0 * max(1.0, float(np.max(a2))) * _OUTER_CAP
    lo, hi = -1.0, 1.0
    flo, fhi = f(lo), f(hi)
    if flo == 0.0 and fhi == 0.0:       # constant-modulus support
        return 0.0
    while flo < 0.0 and lo > -inner_cap:
        lo *= 2.0
        flo = f(lo)
    while fhi > 0.0 and hi < inner_cap:
        hi *= 2.0
        fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo < 0.0 or fhi > 0.0:          # root beyond the cap: take the endpoint
        return lo if abs(flo) <= abs(fhi) else hi
    return brentq(f, lo, hi, xtol=1e-13, maxiter=300)


def _nested_multiplier_root(u, a2, a4, c0):
    """Globally convergent (lam1, lam2) solve by nested bisection."""
    def h(lam1):
        lam2 = _power_balance_root(u, a2, a4, lam1)
        return _tilted_moments(u, a2, a4, lam1, lam2)[1] - c0

    lo, hi = -1.0, 1.0
    hlo, hhi = h(lo), h(hi)
    if hlo == 0.0:
        lam1 = lo
    elif hhi == 0.0:
        lam1 = hi
    else:
        while hlo < 0.0 and lo > -_OUTER_CAP:
            lo *= 2.0
            hlo = h(lo)
        while hhi > 0.0 and hi < _OUTER_CAP:
            hi *= 2.0
            hhi = h(hi)
        if hlo < 0.0 or hhi > 0.0:
            lam1 = lo if abs(hlo) <= abs(hhi) else hi
        else:
            lam1 = brentq(h, lo, hi, xtol=1e-12, maxiter=300)
    lam2 = _power_balance_root(u, a2, a4, lam1)
    return np.array([float(lam1), float(lam2)])


def _match_multipliers(u, a2, a4, c0, cfg: MBAConfig):
    """Grid + Newton fast path, nested bisection as the robust fallback."""
    lam0 = _init_multipliers(u, a2, a4, c0, cfg)

    def fn(l1, l2):
        return _residual_system(u, a2, a4, c0, l1, l2, scaled=True)

    res = newton_solve(fn, lam0, step_tol=cfg.newton_step_tol,
                       residual_tol=cfg.newton_residual_tol,
                       max_iter=cfg.newton_max_iter)
    lam = res.lam
    best = float(np.hypot(*np.asarray(fn(lam[0], lam[1])[0], dtype=float)))
    if not res.converged or best > cfg.newton_residual_tol:
        alt = _nested_multiplier_root(u, a2, a4, c0)
        alt_norm = float(np.hypot(*np.asarray(fn(alt[0], alt[1])[0],
                                              dtype=float)))
        if alt_norm < best:
            lam = alt
    return lam, res.iterations


# ---------------------------------------------------------------------------
# the outer loop


def _grid_scan_vec(u, a2, a4, c0, l1s, l2s):
    """Vectorized scaled-residual scan; returns argmin in scan order."""
    grid1 = np.repeat(l1s, l2s.size)
    grid2 = np.tile(l2s, l1s.size)
    e = u[None, :] - grid1[:, None] * a4[None, :] - grid2[:, None] * a2[None, :]
    e = np.where(np.isfinite(e), e, -np.inf)
    shift = np.max(e, axis=1, keepdims=True)
    g = np.exp(e - shift)
    total = g.sum(axis=1)
    f1 = g @ (a2 - 1.0) / total
    f2 = g @ (a4 - c0) / total
    norms = np.hypot(f1, f2)
    k = int(np.argmin(norms))          # argmin keeps the first minimum
    return np.array([grid1[k], grid2[k]]), float(norms[k])


def _init_multipliers(u, a2, a4, c0, cfg: MBAConfig):
    coarse = np.arange(cfg.grid_lo, cfg.grid_hi + 0.5 * cfg.grid_step,
                       cfg.grid_step)
    lam, _ = _grid_scan_vec(u, a2, a4, c0, coarse, coarse)
    fine_step = cfg.grid_step / 10.0
    f1s = np.arange(lam[0] - cfg.grid_step, lam[0] + cfg.grid_step + 0.5 * fine_step,
                    fine_step)
    f2s = np.arange(lam[1] - cfg.grid_step, lam[1] + cfg.grid_step + 0.5 * fine_step,
                    fine_step)
    lam, _ = _grid_scan_vec(u, a2, a4, c0, f1s, f2s)
    return lam


def _ring_means(values, ring_index, n_rings):
    sums = np.bincount(ring_index, weights=np.where(np.isfinite(values),
                                                    values, 0.0),
                       minlength=n_rings)
    counts = np.bincount(ring_index, minlength=n_rings)
    means = sums / counts
    has_dead = np.bincount(ring_index, weights=(~np.isfinite(values)).astype(float),
                           minlength=n_rings) > 0
    return np.where(has_dead, _NEG_INF, means)


def run_mba(c: Constellation, cfg: MBAConfig, seed: int = 0) -> ShapingResult:
    """Alternating maximization of the constrained-rate objective.

    Starts from the uniform input, alternates the Bayes posterior update
    with the multiplier-matched exponential input update, and stops when the
    probability vector settles (or the objective plateaus).  The recorded
    trace holds the sample objective (nats) after each input update; with
    shared samples it is non-decreasing by construction.

    Raises ``ValueError`` when ``c0`` lies outside the feasible moment range.
    """
    lo, hi = feasible_c0_range(c)
    if not (lo - 1e-9 <= cfg.c0 <= hi + 1e-9):
        raise ValueError(f"fourth-moment target {cfg.c0} outside the feasible "
                         f"range [{lo:.6f}, {hi:.6f}]")
    c0 = float(np.clip(cfg.c0, lo, hi))
    spec = ChannelSpec(cfg.noise_power)
    rng = np.random.default_rng(derive_seed(seed, "mba-samples"))

    ring_a2 = c.ring_amps ** 2
    ring_a4 = ring_a2 ** 2
    counts = c.ring_counts.astype(float)
    log_counts = np.log(counts)
    W = c.n_rings

    def draw(dist_pt: np.ndarray):
        idx = rng.choice(c.size, size=cfg.n_mc, p=dist_pt / dist_pt.sum())
        sig = np.sqrt(cfg.noise_power / 2.0)
        y = c.points[idx] + rng.normal(scale=sig, size=cfg.n_mc) \
            + 1j * rng.normal(scale=sig, size=cfg.n_mc)
        return y

    uniform_pt = np.full(c.size, 1.0 / c.size)
    samples = draw(uniform_pt)
    loglik = _log_likelihood(c, samples, cfg.noise_power)
    log_mix_draw = logsumexp(loglik + _log_probs(uniform_pt)[:, None], axis=0)

    mass = counts / float(c.size)              # ring masses, start uniform
    trace: list[float] = []
    newton_iters = 0
    converged_outer = False
    lam = np.zeros(2)

    def point_probs(mass_vec):
        return mass_vec[c.ring_index] / counts[c.ring_index]

    def sym_integrals(mass_vec):
        """Ring-averaged update integrals under the current iterate."""
        logp = _log_probs(point_probs(mass_vec))
        log_mix_now = logsumexp(loglik + logp[:, None], axis=0)
        logq = logp[:, None] + loglik - log_mix_now[None, :]
        w = np.exp(loglik - log_mix_draw[None, :])
        dead = ~np.isfinite(logq)
        terms = np.where(dead & (w == 0.0), 0.0, w * logq)
        u_pt = np.mean(terms, axis=1)
        u_pt = np.where(point_probs(mass_vec) > 0, u_pt, _NEG_INF)
        return _ring_means(u_pt, c.ring_index, W)

    def objective(mass_vec, u_ring):
        # F = sum_x p(x) (u_x - log p(x)), ring-collapsed; nats
        alive = mass_vec > 0
        logp_ring = np.log(mass_vec[alive] / counts[alive])
        return float(np.dot(mass_vec[alive], u_ring[alive] - logp_ring))

    for outer in range(1, cfg.max_outer + 1):
        if cfg.resample_each_iter and outer > 1:
            samples = draw(point_probs(mass))
            loglik = _log_likelihood(c, samples, cfg.noise_power)
            log_mix_draw = logsumexp(
                loglik + _log_probs(point_probs(mass))[:, None], axis=0)

        u_ring = sym_integrals(mass)
        if cfg.state == "rings":
            u_sys = u_ring + log_counts        # weights folded into exponents
            a2_sys, a4_sys = ring_a2, ring_a4
        else:
            u_sys = u_ring[c.ring_index]
            a2_sys = c.amplitudes ** 2
            a4_sys = a2_sys ** 2

        lam, n_it = _match_multipliers(u_sys, a2_sys, a4_sys, c0, cfg)
        newton_iters += n_it

        e = u_sys - lam[0] * a4_sys - lam[1] * a2_sys
        finite = np.isfinite(e)
        g = np.where(finite, np.exp(e - np.max(e[finite])), 0.0)
        if cfg.state == "rings":
            mass_new = g / g.sum()
        else:
            p_new = g / g.sum()
            mass_new = np.bincount(c.ring_index, weights=p_new, minlength=W)

        u_new = sym_integrals(mass_new)
        f_val = objective(mass_new, u_new)
        plateau = bool(trace) and abs(f_val - trace[-1]) <= cfg.outer_tol * abs(trace[-1])
        trace.append(f_val)

        delta = point_probs(mass_new) - point_probs(mass)
        mass = mass_new
        if float(delta @ delta) <= cfg.outer_tol or plateau:
            converged_outer = True
            break

    mass = np.maximum(mass, 0.0)
    mass = mass / mass.sum()
    dist = Distribution.from_ring_mass(c, mass)
    m4 = float(np.dot(mass, ring_a4))
    residuals = (abs(m4 - c0), abs(float(np.dot(mass, ring_a2)) - 1.0),
                 abs(float(mass.sum()) - 1.0))
    feasible = max(residuals) <= EXIT_RESIDUAL_TOL

    air = mutual_information(c, dist, spec, n_mc=cfg.air_n_mc,
                             seed=derive_seed(seed, "mba-air"))
    return ShapingResult(
        c0=float(cfg.c0), method="optimal",
        ring_mass=mass, distribution=dist, moment4=m4,
        converged=bool(converged_outer and feasible),
        iterations=len(trace),
        air_bits=float(air.mi_bits),
        multipliers=(float(lam[0]), float(lam[1])),
        trace=trace)
