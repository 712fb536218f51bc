"""
Joint transceiver and offset design (JTOD) for the point-to-point link.

The equalizer is eliminated in closed form (Wiener), leaving the reduced
objective ``tr(Y^{-1})`` over the precoder ``P`` and offset ``b``.  It is
minimized by projected gradient with an Armijo rule along the projection
arc.  Two update schemes are provided:

``"joint"`` (default)
    one step on ``(P, b)`` followed by the exact projection onto the joint
    lighting-feasible set.
``"alternating"``
    a step on ``P`` projected with ``b`` fixed, then a step on ``b``
    projected with ``P`` fixed.  With the amplitude constraint active the
    offsets cannot move in this scheme, so it stalls wherever the first
    ``P`` sweep saturates the rows.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .mse import P2PDesign, _y_matrix, mse_p2p_reduced, spd_inv, wiener_equalizer_p2p
from .signal import (
    InfeasibleError,
    LightingConstraints,
    SystemParams,
    check_feasible,
    project_joint,
    project_offset,
    project_precoder,
)

__all__ = [
    "OptimizerConfig",
    "grad_p",
    "grad_b",
    "projected_gradient",
    "jtod_p2p",
    "initial_offset",
    "min_dimming",
    "nonconvexity_witness",
    "write_trace_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    eps_p: float = 1e-4
    eps_b: float = 1e-4
    max_iters: int = 2000
    step0: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 50
    spectral: bool = True
    extrapolation: float = 0.0
    n_restarts: int = 20
    seed: int = 0
    mode: str = "joint"
    record_trace: bool = False

    def __post_init__(self):
        if self.eps_p <= 0 or self.eps_b <= 0:
            raise ValueError("convergence thresholds must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("sufficient-decrease constant must lie in (0, 1)")
        if not 0.0 <= self.extrapolation < 1.0:
            raise ValueError("extrapolation factor must lie in [0, 1)")
        if self.mode not in ("joint", "alternating"):
            raise ValueError(f"unknown update mode {self.mode!r}")
        if self.n_restarts < 1:
            raise ValueError("need at least one restart")

    def with_(self, **kw) -> "OptimizerConfig":
        return replace(self, **kw)


# ----------------------------------------------------------------------------
# gradients of tr(Y^{-1})
# ----------------------------------------------------------------------------


def grad_p(p, b, h, params: SystemParams) -> np.ndarray:
    """``dMSE/dP = -2 H^T Sigma H P Y^{-2}``."""
    y, sig, hp = _y_matrix(h, p, b, params)
    yi = spd_inv(y)
    return -2.0 * np.asarray(h).T @ (sig[:, None] * hp) @ (yi @ yi)


def grad_b(p, b, h, params: SystemParams) -> np.ndarray:
    """``dMSE/db_j = shot * sum_i M_ii H_ij`` with ``M = Sigma H P Y^{-2} P^T H^T Sigma``."""
    y, sig, hp = _y_matrix(h, p, b, params)
    yi = spd_inv(y)
    m_diag = sig**2 * np.einsum("ij,jk,ik->i", hp, yi @ yi, hp)
    return params.shot * (m_diag @ np.asarray(h))


# ----------------------------------------------------------------------------
# generic projected gradient with Armijo backtracking
# ----------------------------------------------------------------------------


@dataclass
class PGResult:
    x: tuple
    f: float
    n_iter: int
    converged: bool
    trace: list = field(default_factory=list)


def _dot(a, b):
    return sum(float(np.vdot(u, v)) for u, v in zip(a, b))


def _replace(x, blocks, values):
    y = list(x)
    for i, v in zip(blocks, values):
        y[i] = v
    return tuple(y)


def _armijo(f, fx, x, blocks, g, proj, t0, cfg):
    """Backtrack along the projection arc ``x(t) = proj(x - t g)``.

    Returns the accepted point, its value and step (0 when no step passes).
    """
    sub = tuple(x[i] for i in blocks)
    t = t0
    for _ in range(cfg.max_backtracks + 1):
        trial = proj(_replace(x, blocks, [s - t * gi for s, gi in zip(sub, g)]))
        decrease = _dot(g, [s - v for s, v in zip(sub, trial)])
        if decrease <= 0:
            break
        xt = _replace(x, blocks, trial)
        try:
            ft = f(xt)
        except np.linalg.LinAlgError:
            ft = np.inf
        if fx - ft >= cfg.armijo_c * decrease:
            return xt, ft, t
        t *= cfg.shrink
    return x, fx, 0.0


def projected_gradient(f, stages, x0, cfg: OptimizerConfig) -> PGResult:
    """Minimize ``f`` over a tuple of array blocks.

    ``stages`` is a list of ``(blocks, grad, proj)``: each outer iteration
    runs the stages in order, stepping only the listed blocks.  ``grad(x)``
    returns the gradients of those blocks and ``proj(x)`` the projection of
    those blocks given the full candidate tuple ``x``.  Trial steps start at
    the Barzilai-Borwein length when ``cfg.spectral`` is set.  Stops when
    block 0 moves less than ``eps_p`` and every other block less than
    ``eps_b`` in one outer iteration.
    """
    x = tuple(np.array(xi, dtype=float) for xi in x0)
    fx = f(x)
    steps = [cfg.step0] * len(stages)
    prev = [None] * len(stages)
    eps = [cfg.eps_p] + [cfg.eps_b] * (len(x) - 1)
    trace = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        x_old = x
        step_log = []
        for s, (blocks, grad, proj) in enumerate(stages):
            g = tuple(grad(x))
            sub = tuple(x[i] for i in blocks)
            t0 = steps[s]
            if cfg.spectral and prev[s] is not None:
                ds = [a - c for a, c in zip(sub, prev[s][0])]
                dg = [a - c for a, c in zip(g, prev[s][1])]
                sy = _dot(ds, dg)
                t0 = float(np.clip(_dot(ds, ds) / sy, 1e-10, 1e10)) if sy > 0 else 2.0 * steps[s]
            x_new, f_new, t = _armijo(f, fx, x, blocks, g, proj, t0, cfg)
            if cfg.extrapolation and t > 0:
                new_sub = [x_new[i] for i in blocks]
                ext = [n + cfg.extrapolation * (n - o) for n, o in zip(new_sub, sub)]
                cand = _replace(x_new, blocks, proj(_replace(x_new, blocks, ext)))
                f_cand = f(cand)
                if f_cand <= f_new:
                    x_new, f_new = cand, f_cand
            prev[s] = (sub, g)
            steps[s] = t if t > 0 else steps[s] * cfg.shrink
            x, fx = x_new, f_new
            step_log.append(t)
        if cfg.record_trace:
            trace.append((it, fx, *step_log))
        moves = [float(np.linalg.norm(a - c)) for a, c in zip(x, x_old)]
        if all(m < e for m, e in zip(moves, eps)):
            converged = True
            break
    return PGResult(x=x, f=fx, n_iter=it, converged=converged, trace=trace)


# ----------------------------------------------------------------------------
# P2P design
# ----------------------------------------------------------------------------


def initial_offset(n_leds: int, lc: LightingConstraints) -> np.ndarray:
    b = np.empty(n_leds)
    for idx, total in lc.groups(n_leds):
        b[idx] = total / idx.size
    return b


def _random_start(rng, n_leds, k, lc):
    b = np.empty(n_leds)
    for idx, total in lc.groups(n_leds):
        b[idx] = rng.dirichlet(np.ones(idx.size)) * total
    p = rng.standard_normal((n_leds, k))
    # scale each row into the interior of its l1 ball
    row_l1 = np.abs(p).sum(axis=1) * lc.delta
    frac = rng.uniform(0.2, 0.9, size=n_leds)
    p *= (frac * b / np.maximum(row_l1, 1e-300))[:, None]
    return p, b


def _structured_start(h, n_streams, lc):
    n_leds = h.shape[1]
    b = initial_offset(n_leds, lc)
    p = np.zeros((n_leds, n_streams))
    m = min(n_leds, n_streams)
    p[np.arange(m), np.arange(m)] = 0.9 * b.min() / lc.delta
    return p, b


def _p2p_stages(h, params, lc, mode):
    if mode == "joint":
        return [(
            (0, 1),
            lambda x: (grad_p(x[0], x[1], h, params), grad_b(x[0], x[1], h, params)),
            lambda x: project_joint(x[0], x[1], lc),
        )]
    return [
        ((0,), lambda x: (grad_p(x[0], x[1], h, params),),
         lambda x: (project_precoder(x[0], x[1], lc.delta),)),
        ((1,), lambda x: (grad_b(x[0], x[1], h, params),),
         lambda x: (project_offset(x[1], x[0], lc),)),
    ]


def _run_single(h, params, lc, cfg, p0, b0):
    def f(x):
        return mse_p2p_reduced(x[0], x[1], h, params)

    return projected_gradient(f, _p2p_stages(h, params, lc, cfg.mode), (p0, b0), cfg)


def jtod_p2p(channel, params: SystemParams, lc: LightingConstraints, config: OptimizerConfig | None = None,
             n_streams: int | None = None) -> P2PDesign:
    """Multi-start projected-gradient JTOD.

    Restart 0 starts from the equal-split offset and a scaled identity
    precoder; the remaining restarts are random feasible points drawn from
    ``config.seed``.  A later restart replaces the incumbent only if it
    improves the MSE by more than ``1e-9`` relative, so equivalent optima
    (stream permutations, sign flips) resolve to the lowest restart index.
    """
    cfg = config or OptimizerConfig()
    h = np.asarray(getattr(channel, "overall", channel), dtype=float)
    n_leds = h.shape[1]
    k = n_streams or min(h.shape)
    p0, b0 = _structured_start(h, k, lc)
    ok, rep = check_feasible(p0, b0, lc)
    if not ok:
        raise InfeasibleError(f"lighting constraints infeasible: {rep}")
    rng = np.random.default_rng(cfg.seed)
    starts = [(p0, b0)] + [_random_start(rng, n_leds, k, lc) for _ in range(cfg.n_restarts - 1)]

    best = None
    runs = []
    for i, (ps, bs) in enumerate(starts):
        res = _run_single(h, params, lc, cfg, ps, bs)
        runs.append((res.f, res.n_iter, res.converged))
        if best is None or res.f < best[1].f - 1e-9 * max(1.0, abs(best[1].f)):
            best = (i, res)
    idx, res = best
    p, b = res.x
    g = wiener_equalizer_p2p(h, p, b, params)
    return P2PDesign(
        p=p,
        b=b,
        g=g,
        mse=float(res.f),
        status="converged" if res.converged else "max_iters",
        info={"restart": idx, "n_iter": res.n_iter, "runs": runs, "trace": res.trace},
    )


def write_trace_csv(design: P2PDesign, fh=None) -> str:
    """Optimizer trace as CSV (iteration, mse, step sizes)."""
    out = fh or io.StringIO()
    w = csv.writer(out)
    trace = design.info.get("trace", [])
    n_steps = max((len(row) - 2 for row in trace), default=1)
    w.writerow(["iteration", "mse"] + [f"step_{i}" for i in range(n_steps)])
    for row in trace:
        w.writerow(row)
    return out.getvalue() if fh is None else ""


# ----------------------------------------------------------------------------
# minimal dimming level
# ----------------------------------------------------------------------------


def min_dimming(channel, params: SystemParams, lc: LightingConstraints, eps_mse: float,
                config: OptimizerConfig | None = None, tol: float = 1e-3, beta_min: float = 1e-3):
    """Smallest dimming level whose JTOD design meets ``MSE <= eps_mse``.

    Bisection over ``beta`` assuming the optimized MSE is non-increasing in
    ``beta``; every evaluated ``(beta, mse)`` pair is kept in
    ``design.info["beta_grid"]`` and the assumption is checked on it.
    """
    cfg = config or OptimizerConfig()
    tol_mse = 1e-9 * max(1.0, abs(eps_mse)) if np.isfinite(eps_mse) else 0.0
    cache = {}

    def solve(beta):
        if beta not in cache:
            lcb = replace(lc, beta=beta)
            cache[beta] = jtod_p2p(channel, params.with_(beta=beta), lcb, cfg)
        return cache[beta]

    top = solve(1.0)
    if top.mse > eps_mse + tol_mse:
        raise InfeasibleError(f"target MSE {eps_mse:.6g} unreachable at full power (best {top.mse:.6g})")
    if solve(beta_min).mse <= eps_mse + tol_mse:
        beta_star = beta_min
    else:
        lo, hi = beta_min, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if solve(mid).mse <= eps_mse + tol_mse:
                hi = mid
            else:
                lo = mid
        beta_star = hi
    design = solve(beta_star)
    grid = sorted((bt, d.mse) for bt, d in cache.items())
    mses = np.array([m for _, m in grid])
    design.info["beta_grid"] = grid
    design.info["monotone"] = bool(np.all(np.diff(mses) <= 1e-6 * np.maximum(1.0, mses[:-1])))
    return beta_star, design


# ----------------------------------------------------------------------------
# non-convexity witness
# ----------------------------------------------------------------------------


def nonconvexity_witness(n: int = 6, alpha: float = 1.0, r: float = 1.0, varsigma2: float = 1.0,
                         sigma2: float = 1.0, p1=None, p2=None, h=None, b=None) -> float:
    """Second derivative of ``f(alpha) = tr(A(alpha)^{-1})`` along a precoder segment.

    ``A = I/r + P(alpha)^T H^T Sigma H P(alpha)`` with
    ``P(alpha) = alpha P1 + (1 - alpha) P2``.  Defaults: ``P1 = 0``,
    ``P2 = I``, ``H = I``, ``b = 1`` and unit constants, for which the
    value is ``-n``.
    """
    p1 = np.zeros((n, n)) if p1 is None else np.asarray(p1, dtype=float)
    p2 = np.eye(n) if p2 is None else np.asarray(p2, dtype=float)
    h = np.eye(n) if h is None else np.asarray(h, dtype=float)
    b = np.ones(n) if b is None else np.asarray(b, dtype=float)
    sig = np.diag(1.0 / (varsigma2 * sigma2 * (h @ b) + sigma2))
    q = h.T @ sig @ h
    p3 = p1 - p2
    pa = alpha * p1 + (1.0 - alpha) * p2
    a = np.eye(p1.shape[1]) / r + pa.T @ q @ pa
    da = 2.0 * alpha * p3.T @ q @ p3 + p3.T @ q @ p2 + p2.T @ q @ p3
    d2a = 2.0 * p3.T @ q @ p3
    ai = np.linalg.inv(a)
    return float(2.0 * np.trace(ai @ da @ ai @ da @ ai) - np.trace(ai @ d2a @ ai))
