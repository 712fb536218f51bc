"""
Multi-user MISO designs with white LEDs: downlink and uplink JTOD, and the
downlink/uplink MSE duality analysis.

Channel convention: ``h`` is N x K and column ``h_k`` links the N LEDs (or
access-point detectors) with single-antenna user k.  In the downlink user k
observes ``h_k^T x``; in the uplink the access point observes ``H x_tilde``.

Both designers minimize the sum MSE with the equalizers eliminated in closed
form and use the same projected-gradient engine as the point-to-point
design, with a single offset-sum equality (white LEDs).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy import linalg

from .baselines import zf_downlink_design
from .mse import (
    LITERAL,
    PER_USER,
    MultiUserDesign,
    mse_downlink_full,
    mse_downlink_reduced,
    mse_uplink_full,
    mse_uplink_reduced,
    wiener_equalizer_downlink,
    wiener_equalizer_uplink,
)
from .optimizer import OptimizerConfig, _random_start, initial_offset, projected_gradient
from .signal import InfeasibleError, LightingConstraints, SystemParams, check_feasible, project_joint

__all__ = [
    "downlink_objective",
    "grad_downlink",
    "grad_uplink",
    "jtod_downlink",
    "jtod_uplink",
    "duality_map",
    "shot_duality_gap",
    "DualityError",
]


class DualityError(ValueError):
    """The duality weights have no positive solution."""


def _white(lc: LightingConstraints) -> LightingConstraints:
    return lc if not lc.colored else replace(lc, colored=False, pi=None)


def _best_of(runs):
    """Index of the lowest objective; later runs win only by more than 1e-9 relative."""
    best = 0
    for i, res in enumerate(runs):
        if res.f < runs[best].f - 1e-9 * max(1.0, abs(runs[best].f)):
            best = i
    return best


# ----------------------------------------------------------------------------
# downlink
# ----------------------------------------------------------------------------


def downlink_objective(p, b, h, params: SystemParams) -> float:
    """``sum_k r (h_k^T p_k)^2 / c_k``, the quantity maximized by the downlink design.

    Equals ``K r - sum MSE`` at the Wiener equalizers.
    """
    h, p, b = (np.asarray(a, dtype=float) for a in (h, p, b))
    q = h.T @ p
    c = (q**2).sum(axis=1) + (params.shot * (h.T @ b) + params.sigma2) / params.r
    return float(params.r * np.sum(np.diag(q) ** 2 / c))


def grad_downlink(p, b, h, params: SystemParams):
    """Gradients of the downlink sum MSE with respect to ``P`` and ``b``."""
    h, p = np.asarray(h, dtype=float), np.asarray(p, dtype=float)
    r = params.r
    q = h.T @ p  # row k is q_k = P^T h_k
    a = np.diag(q)
    c = (q**2).sum(axis=1) + (params.shot * (h.T @ b) + params.sigma2) / r
    w1 = 2.0 * r * a / c
    w2 = 2.0 * r * a**2 / c**2
    gp = -(h * w1) @ np.eye(h.shape[1]) + (h * w2) @ q
    gb = params.shot * h @ (a**2 / c**2)
    return gp, gb


def _downlink_starts(h, params, lc, cfg):
    n, k = h.shape
    starts = []
    if n == k and np.linalg.matrix_rank(h) == k:
        zf = zf_downlink_design(h, params, lc)
        starts.append((zf.p, zf.b))
    b0 = initial_offset(n, lc)
    p0 = np.zeros((n, k))
    m = min(n, k)
    p0[np.arange(m), np.arange(m)] = 0.9 * b0.min() / lc.delta
    starts.append((p0, b0))
    rng = np.random.default_rng(cfg.seed)
    while len(starts) < max(cfg.n_restarts, 2):
        starts.append(_random_start(rng, n, k, lc))
    return starts


def jtod_downlink(h, params: SystemParams, lc: LightingConstraints,
                  config: OptimizerConfig | None = None) -> MultiUserDesign:
    """Projected-gradient downlink JTOD with Wiener ``g_k``.

    The scaled-ZF design (when the channel is square and invertible) and an
    equal-power start are always among the restarts, so the result is never
    worse than scaled ZF with Wiener receivers.
    """
    cfg = config or OptimizerConfig()
    h = np.asarray(h, dtype=float)
    lc = _white(lc)
    if lc.budget <= 0:
        raise InfeasibleError("offset budget must be positive")

    def f(x):
        return float(np.sum(mse_downlink_reduced(x[0], x[1], h, params)))

    stages = [((0, 1), lambda x: grad_downlink(x[0], x[1], h, params), lambda x: project_joint(x[0], x[1], lc))]
    runs = [projected_gradient(f, stages, s, cfg) for s in _downlink_starts(h, params, lc, cfg)]
    idx = _best_of(runs)
    res = runs[idx]
    p, b = res.x
    g = wiener_equalizer_downlink(h, p, b, params)
    return MultiUserDesign(
        p=p,
        b=b,
        g=g,
        per_user_mse=mse_downlink_full(p, b, h, g, params),
        link="downlink",
        status="converged" if res.converged else "max_iters",
        info={"restart": idx, "n_iter": res.n_iter, "runs": [(r.f, r.n_iter, r.converged) for r in runs],
              "trace": res.trace},
    )


# ----------------------------------------------------------------------------
# uplink
# ----------------------------------------------------------------------------


def grad_uplink(p, b, h, params: SystemParams, mode: str = PER_USER):
    """Gradients of the reduced uplink sum MSE with respect to ``p`` and ``b`` (both length K)."""
    h, p, b = (np.asarray(a, dtype=float) for a in (h, p, b))
    r = params.r
    noise = params.shot * np.maximum(h @ b, 0.0) + params.sigma2
    if mode == PER_USER:
        a = r * (h * p**2) @ h.T + np.diag(noise)
        u = linalg.solve(a, h, assume_a="pos")  # column k is A^{-1} h_k
        hu = h.T @ u  # hu[j, k] = h_j^T u_k
        gp = -2.0 * r**2 * p * np.diag(hu) + 2.0 * r**3 * p * (hu**2 @ p**2)
        gb = r**2 * params.shot * ((h * (u**2 @ p**2)[:, None]).sum(axis=0))
        return gp, gb
    if mode == LITERAL:
        hht = h @ h.T
        gp = np.empty_like(p)
        w = np.zeros(h.shape[0])
        for k in range(h.shape[1]):
            uk = linalg.solve(r * p[k] ** 2 * hht + np.diag(noise), h[:, k], assume_a="pos")
            sk = h[:, k] @ uk
            gp[k] = -r**2 * (2.0 * p[k] * sk - 2.0 * r * p[k] ** 3 * float(uk @ hht @ uk))
            w += p[k] ** 2 * uk**2
        gb = r**2 * params.shot * (w @ h)
        return gp, gb
    raise ValueError(f"unknown uplink interference mode {mode!r}")


def jtod_uplink(h, params: SystemParams, lc: LightingConstraints, config: OptimizerConfig | None = None,
                mode: str = PER_USER) -> MultiUserDesign:
    """Projected-gradient uplink JTOD over per-user amplitudes and offsets.

    User k drives a single LED with ``p_k s_k + b_k`` subject to
    ``|p_k| delta <= b_k`` and ``sum_k b_k = beta P_T``.
    """
    cfg = config or OptimizerConfig()
    h = np.asarray(h, dtype=float)
    lc = _white(lc)
    k = h.shape[1]
    if lc.budget <= 0:
        raise InfeasibleError("offset budget must be positive")

    def f(x):
        return float(np.sum(mse_uplink_reduced(x[0][:, 0], x[1], h, params, mode)))

    def grad(x):
        gp, gb = grad_uplink(x[0][:, 0], x[1], h, params, mode)
        return gp[:, None], gb

    stages = [((0, 1), grad, lambda x: project_joint(x[0], x[1], lc))]
    b0 = initial_offset(k, lc)
    starts = [(0.9 * b0[:, None] / lc.delta, b0)]
    rng = np.random.default_rng(cfg.seed)
    while len(starts) < cfg.n_restarts:
        starts.append(_random_start(rng, k, 1, lc))
    runs = [projected_gradient(f, stages, s, cfg) for s in starts]
    idx = _best_of(runs)
    res = runs[idx]
    p, b = res.x[0][:, 0], res.x[1]
    g = wiener_equalizer_uplink(h, p, b, params, mode)
    return MultiUserDesign(
        p=p,
        b=b,
        g=g,
        per_user_mse=mse_uplink_full(g, p, b, h, params, mode),
        link="uplink",
        status="converged" if res.converged else "max_iters",
        info={"restart": idx, "n_iter": res.n_iter, "mode": mode,
              "runs": [(r.f, r.n_iter, r.converged) for r in runs], "trace": res.trace},
    )


# ----------------------------------------------------------------------------
# duality
# ----------------------------------------------------------------------------


def duality_map(g_ul, p_ul, h, params: SystemParams):
    """Map an uplink design to a downlink design with equal thermal-noise MSEs.

    Solves ``C alpha^2 = sigma2 p^2`` with
    ``C_kk = r sum_{i != k} p_i^2 (g_k^T h_i)^2 + sigma2 ||g_k||^2`` and
    ``C_kj = -r p_k^2 (g_j^T h_k)^2``, then sets ``p_k = alpha_k g_k`` and
    ``g_k = p_k_ul / alpha_k``.  Returns ``(alpha, P_dl, g_dl)``.
    """
    g_ul, p_ul, h = (np.asarray(a, dtype=float) for a in (g_ul, p_ul, h))
    r, s2 = params.r, params.sigma2
    gh2 = (g_ul.T @ h) ** 2  # gh2[k, i] = (g_k^T h_i)^2
    p2 = p_ul**2
    off = -r * p2[:, None] * gh2.T  # off[k, j] = -r p_k^2 (g_j^T h_k)^2
    c = off.copy()
    np.fill_diagonal(c, r * (gh2 @ p2 - np.diag(gh2) * p2) + s2 * (g_ul**2).sum(axis=0))
    try:
        alpha2 = np.linalg.solve(c, s2 * p2)
    except np.linalg.LinAlgError as exc:
        raise DualityError(f"duality matrix is singular: {exc}") from None
    if not (alpha2 > 0).all():
        raise DualityError(f"duality weights not all positive: alpha^2 = {alpha2}")
    alpha = np.sqrt(alpha2)
    return alpha, g_ul * alpha, p_ul / alpha


def shot_duality_gap(design_ul: MultiUserDesign, h, b_dl, params: SystemParams):
    """Shot-noise MSE terms of the dual downlink and the uplink, and their difference.

    Returns ``(mse_sh_dl, mse_sh_ul, gap)`` per user, with
    ``mse_sh_dl_k = shot alpha_k^-2 p_k^2 h_k^T b`` and
    ``mse_sh_ul_k = shot alpha_k^-2 p_k^T diag(H b_ul) p_k`` (``p_k`` the
    mapped downlink precoder).
    """
    h = np.asarray(h, dtype=float)
    alpha, p_dl, _ = duality_map(design_ul.g, design_ul.p, h, params)
    dl = params.shot * design_ul.p**2 / alpha**2 * (h.T @ np.asarray(b_dl, dtype=float))
    ul = params.shot / alpha**2 * ((p_dl**2) * (h @ design_ul.b)[:, None]).sum(axis=0)
    return dl, ul, dl - ul


def equal_split_offset(b_ul, n_leds: int) -> np.ndarray:
    """Downlink offset with equal entries and the same total optical power as ``b_ul``."""
    return np.full(n_leds, float(np.sum(b_ul)) / n_leds)


__all__.append("equal_split_offset")
