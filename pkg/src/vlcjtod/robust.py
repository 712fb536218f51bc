"""
Robust downlink JTOD under norm-bounded channel error.

User k's channel is ``h_hat_k + e_k`` with ``||e_k|| <= rho_k``.  For fixed
scalar equalizers ``g`` the worst-case sum MSE is bounded by a semidefinite
program: the S-procedure turns each semi-infinite constraint into a linear
matrix inequality and a Schur complement linearizes the quadratic terms.

Per user k (``c_k = varsigma2 sigma2 g_k^2``)::

    [ lam_k - nu_k        g_k h_k^T P - e_k^T   0            ]
    [ (.)^T               I / r                 -rho_k g_k P^T ]  >= 0
    [ 0                   -rho_k g_k P          nu_k I        ]

    [ lamt_k - c_k h_k^T b - nut_k c_k^2 / 4    -rho_k b^T ]
    [ -rho_k b                                   nut_k I   ]  >= 0

together with ``sum_k (lam_k + lamt_k) + sigma2 ||g||^2 <= varpi``,
``T >= +-P``, ``delta T 1 <= b`` and ``1^T b = beta P_T``; the program
minimizes ``varpi``.  The second block is equivalent to
``lamt_k >= c_k (h_k^T b + rho_k ||b||)``.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import optimize

from .channel import UncertaintyModel
from .mse import MultiUserDesign, wiener_equalizer_downlink
from .multiuser import _white, jtod_downlink
from .optimizer import OptimizerConfig
from .sdp import LmiBlock, SdpError, SdpProblem, solve_sdp
from .signal import LightingConstraints, SystemParams

__all__ = [
    "build_robust_sdp",
    "interior_point_for",
    "trs_max",
    "worst_case_mse",
    "sampled_worst_case",
    "minimax_equalizers",
    "robust_jtod",
]

log = logging.getLogger(__name__)


# ----------------------------------------------------------------------------
# exact worst case
# ----------------------------------------------------------------------------


def trs_max(v, m, rho: float) -> float:
    """``max ||v + M d||^2`` over ``||d|| <= rho`` (trust-region maximization).

    The maximizer lies on the sphere and solves ``(mu I - M^T M) d = M^T v``
    with ``mu >= lambda_max(M^T M)``; the degenerate (hard) case is handled
    through the eigen-decomposition.
    """
    v, m = np.asarray(v, dtype=float), np.atleast_2d(np.asarray(m, dtype=float))
    base = float(v @ v)
    if rho == 0.0:
        return base
    q = m.T @ v
    w, vec = np.linalg.eigh(m.T @ m)
    qt = vec.T @ q
    wmax = w[-1]
    scale = max(1.0, wmax, float(np.abs(qt).max(initial=0.0)))

    def value(d):
        return base + 2.0 * q @ d + d @ (m.T @ (m @ d))

    def dnorm(mu):
        return np.sqrt(np.sum((qt / (mu - w)) ** 2))

    top = np.abs(w - wmax) <= 1e-12 * scale
    if np.abs(qt[top]).max() <= 1e-12 * scale:
        # candidate hard case: mu = lambda_max, fill the top eigenspace
        rest = ~top
        dt = np.zeros_like(qt)
        dt[rest] = qt[rest] / (wmax - w[rest])
        nrm = np.linalg.norm(dt)
        if nrm <= rho:
            dt[np.flatnonzero(top)[0]] = np.sqrt(rho**2 - nrm**2)
            return float(value(vec @ dt))
    hi = wmax + np.linalg.norm(q) / rho + 1e-12 * scale
    lo_gap = (hi - wmax) / 2.0
    while dnorm(wmax + lo_gap) <= rho and lo_gap > 1e-300:
        lo_gap /= 2.0
    mu = optimize.brentq(lambda t: dnorm(t) - rho, wmax + lo_gap, hi, xtol=1e-15 * scale, rtol=1e-15)
    d = vec @ (qt / (mu - w))
    return float(max(value(d), value(-d), base))


def worst_case_mse(p, b, g, model: UncertaintyModel, params: SystemParams):
    """Per-user worst-case downlink MSE and its sum.

    Per user: ``r max ||g_k (h_k + e)^T P - e_k^T||^2 + sigma2 g_k^2
    + c_k (h_k^T b + rho_k ||b||)``.  The quadratic and shot parts are each
    maximized exactly but separately, matching the two constraints of the
    SDP, so the value upper-bounds the joint maximum over one common error.
    """
    p, b, g = (np.asarray(a, dtype=float) for a in (p, b, g))
    h = model.h_hat
    k_users = h.shape[1]
    out = np.empty(k_users)
    for k in range(k_users):
        v = g[k] * (h[:, k] @ p) - np.eye(k_users)[k]
        quad = params.r * trs_max(v, g[k] * p.T, float(model.rho[k]))
        c = params.shot * g[k] ** 2
        out[k] = quad + params.sigma2 * g[k] ** 2 + c * (h[:, k] @ b + model.rho[k] * np.linalg.norm(b))
    return out, float(out.sum())


def sampled_worst_case(p, b, g, model: UncertaintyModel, params: SystemParams, n: int = 10_000, seed: int = 0):
    """Largest per-user MSE over ``n`` sampled boundary errors per user (a lower bound on the max)."""
    p, b, g = (np.asarray(a, dtype=float) for a in (p, b, g))
    h = model.h_hat
    rng = np.random.default_rng(seed)
    k_users = h.shape[1]
    out = np.empty(k_users)
    for k in range(k_users):
        d = rng.standard_normal((n, h.shape[0]))
        d *= model.rho[k] / np.linalg.norm(d, axis=1, keepdims=True)
        hk = h[:, k][None, :] + d
        q = hk @ p  # q[s, j] = h_k(s)^T p_j
        e = np.eye(k_users)[k]
        quad = params.r * ((g[k] * q - e) ** 2).sum(axis=1)
        shot = params.shot * g[k] ** 2 * (hk @ b)
        out[k] = float((quad + shot).max() + params.sigma2 * g[k] ** 2)
    return out, float(out.sum())


# ----------------------------------------------------------------------------
# SDP construction
# ----------------------------------------------------------------------------


def _layout(n, k):
    names = [("P", (n, k)), ("T", (n, k)), ("b", (n,)), ("lam", (k,)), ("lamt", (k,)),
             ("nu", (k,)), ("nut", (k,)), ("varpi", (1,))]
    out, pos = {}, 0
    for name, shape in names:
        size = int(np.prod(shape))
        out[name] = (slice(pos, pos + size), shape)
        pos += size
    return out, pos


def build_robust_sdp(model: UncertaintyModel, g, params: SystemParams, lc: LightingConstraints) -> SdpProblem:
    """Semidefinite program bounding the worst-case sum MSE for fixed equalizers ``g``."""
    h = np.asarray(model.h_hat, dtype=float)
    n, k_users = h.shape
    g = np.asarray(g, dtype=float)
    rho = np.asarray(model.rho, dtype=float)
    if g.shape != (k_users,) or rho.shape != (k_users,):
        raise ValueError(f"need {k_users} equalizers and radii, got {g.shape} and {rho.shape}")
    if (rho < 0).any():
        raise ValueError("uncertainty radii must be non-negative")
    lc = _white(lc)
    lay, nv = _layout(n, k_users)

    def idx(name, *pos):
        sl, shape = lay[name]
        return sl.start + int(np.ravel_multi_index(pos, shape)) if pos else sl.start

    r = params.r
    c = params.shot * g**2
    blocks = []
    for k in range(k_users):
        m = 1 + k_users + n
        const = np.zeros((m, m))
        co = np.zeros((nv, m, m))
        co[idx("lam", k), 0, 0] = 1.0
        co[idx("nu", k), 0, 0] = -1.0
        for j in range(k_users):
            const[0, 1 + j] = const[1 + j, 0] = -1.0 if j == k else 0.0
            const[1 + j, 1 + j] = 1.0 / r
            for i in range(n):
                v = idx("P", i, j)
                co[v, 0, 1 + j] = co[v, 1 + j, 0] = g[k] * h[i, k]
                co[v, 1 + j, 1 + k_users + i] = co[v, 1 + k_users + i, 1 + j] = -rho[k] * g[k]
        for i in range(n):
            co[idx("nu", k), 1 + k_users + i, 1 + k_users + i] = 1.0
        blocks.append(LmiBlock(const, co, name=f"large_{k}"))
        if c[k] > 0:
            m = 1 + n
            const = np.zeros((m, m))
            co = np.zeros((nv, m, m))
            co[idx("lamt", k), 0, 0] = 1.0
            co[idx("nut", k), 0, 0] = -c[k] ** 2 / 4.0
            for i in range(n):
                co[idx("b", i), 0, 0] = -c[k] * h[i, k]
                co[idx("b", i), 0, 1 + i] = co[idx("b", i), 1 + i, 0] = -rho[k]
                co[idx("nut", k), 1 + i, 1 + i] = 1.0
            blocks.append(LmiBlock(const, co, name=f"small_{k}"))

    rows, rhs = [], []

    def ineq(terms, const=0.0):
        row = np.zeros(nv)
        for v, a in terms:
            row[v] += a
        rows.append(row)
        rhs.append(const)

    for i in range(n):
        for j in range(k_users):
            ineq([(idx("T", i, j), 1.0), (idx("P", i, j), -1.0)])
            ineq([(idx("T", i, j), 1.0), (idx("P", i, j), 1.0)])
        ineq([(idx("b", i), 1.0)] + [(idx("T", i, j), -lc.delta) for j in range(k_users)])
    lam0 = params.sigma2 * float(g @ g)
    for k in range(k_users):
        ineq([(idx("nu", k), 1.0)])
        ineq([(idx("nut", k), 1.0)])
        if c[k] == 0:
            # no shot term: the second block reduces to lamt_k >= 0 and nut_k is unused
            ineq([(idx("lamt", k), 1.0)])
            ineq([(idx("nut", k), -1.0)], 1.0)
    ineq([(idx("varpi"), 1.0)] + [(idx("lam", k), -1.0) for k in range(k_users)]
         + [(idx("lamt", k), -1.0) for k in range(k_users)], -lam0)

    a_eq = np.zeros((1, nv))
    a_eq[0, lay["b"][0]] = 1.0
    cvec = np.zeros(nv)
    cvec[idx("varpi")] = 1.0
    return SdpProblem(
        n_vars=nv,
        c=cvec,
        blocks=blocks,
        g_ineq=np.array(rows),
        h_ineq=np.array(rhs),
        a_eq=a_eq,
        b_eq=np.array([lc.budget]),
        layout=lay,
    )


def interior_point_for(prob: SdpProblem, p, b, g, model: UncertaintyModel, params: SystemParams,
                       lc: LightingConstraints, shrink: float = 0.9):
    """Strictly feasible SDP point built from a nominal design shrunk toward zero."""
    h = model.h_hat
    n, k_users = h.shape
    lc = _white(lc)
    p = shrink * np.asarray(p, dtype=float)
    b = np.asarray(b, dtype=float)
    slack = b - lc.delta * np.abs(p).sum(axis=1)
    if (slack <= 0).any():
        raise ValueError("nominal design is not strictly inside the amplitude constraints")
    t = np.abs(p) + (0.5 * slack / (lc.delta * k_users))[:, None]
    r = params.r
    c = params.shot * np.asarray(g) ** 2
    x = np.zeros(prob.n_vars)
    lay = prob.layout

    def put(name, val):
        x[lay[name][0]] = np.ravel(val)

    put("P", p)
    put("T", t)
    put("b", b)
    lam, lamt, nu, nut = (np.zeros(k_users) for _ in range(4))
    for k in range(k_users):
        gp = model.rho[k] * g[k] * p
        nu[k] = r * np.linalg.norm(gp, 2) ** 2 + 1.0
        s = np.block([[np.eye(k_users) / r, -gp.T], [-gp, nu[k] * np.eye(n)]])
        w = np.concatenate([g[k] * (h[:, k] @ p) - np.eye(k_users)[k], np.zeros(n)])
        lam[k] = nu[k] + w @ np.linalg.solve(s, w) + 1.0
        bn = np.linalg.norm(b)
        if c[k] > 0:
            nut[k] = 2.0 * model.rho[k] * bn / c[k] if model.rho[k] * bn > 0 else 1.0
            lamt[k] = c[k] * (h[:, k] @ b) + nut[k] * c[k] ** 2 / 4 + (model.rho[k] * bn) ** 2 / nut[k] + 1.0
        else:
            nut[k], lamt[k] = 0.5, 1.0
    put("lam", lam)
    put("lamt", lamt)
    put("nu", nu)
    put("nut", nut)
    put("varpi", lam.sum() + lamt.sum() + params.sigma2 * float(np.dot(g, g)) + 1.0)
    return x


# ----------------------------------------------------------------------------
# outer loop
# ----------------------------------------------------------------------------


def minimax_equalizers(p, b, g0, model: UncertaintyModel, params: SystemParams) -> np.ndarray:
    """Per-user equalizers minimizing the worst-case MSE (each a convex 1-D problem)."""
    g = np.array(g0, dtype=float)
    for k in range(g.size):
        def f(gk, k=k):
            gg = g.copy()
            gg[k] = gk
            return worst_case_mse(p, b, gg, model, params)[0][k]

        lo, hi = sorted((0.0, 2.0 * g[k]))
        if hi - lo > 0:
            g[k] = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}).x
    return g


def robust_jtod(model: UncertaintyModel, params: SystemParams, lc: LightingConstraints, outer_iters: int = 20,
                config: OptimizerConfig | None = None, init: MultiUserDesign | None = None,
                tol: float = 1e-6, equalizer: str = "wiener") -> MultiUserDesign:
    """Alternate equalizer updates with the SDP in ``(P, b)``.

    ``equalizer="wiener"`` (default) uses the Wiener equalizers at the
    channel estimate; ``"minimax"`` instead minimizes each user's worst-case
    MSE over its scalar equalizer.  Starts from the perfect-CSI downlink
    design at the estimate and stops once the certified objective improves
    by less than ``1e-5`` or after ``outer_iters`` rounds.  The returned
    ``info["certified"]`` bounds the worst-case sum MSE of the returned
    ``(P, b, g)``.
    """
    if equalizer not in ("wiener", "minimax"):
        raise ValueError(f"unknown equalizer rule {equalizer!r}")
    h = model.h_hat
    lc = _white(lc)
    design = init or jtod_downlink(h, params, lc, config)
    p, b = design.p, design.b
    history = []
    best = None
    status = "max_iters"
    for it in range(outer_iters):
        g = wiener_equalizer_downlink(h, p, b, params)
        if equalizer == "minimax":
            g = minimax_equalizers(p, b, g, model, params)
        prob = build_robust_sdp(model, g, params, lc)
        try:
            sol = solve_sdp(prob, tol=tol, x_start=interior_point_for(prob, p, b, g, model, params, lc))
        except SdpError as exc:
            if best is None:
                raise
            log.warning("robust loop stopped at round %d: %s", it, exc)
            status = "sdp_stalled"
            break
        history.append(sol.objective)
        if best is None or sol.objective < best[0]:
            best = (sol.objective, sol.values["P"], sol.values["b"], g)
        p, b = sol.values["P"], sol.values["b"]
        if it and history[-2] - history[-1] < 1e-5:
            status = "converged"
            break
    varpi, p, b, g = best
    per_user, _ = worst_case_mse(p, b, g, model, params)
    return MultiUserDesign(
        p=p,
        b=b,
        g=g,
        per_user_mse=per_user,
        link="downlink",
        status=status,
        info={"certified": varpi, "history": history, "outer_iters": len(history), "equalizer": equalizer},
    )
