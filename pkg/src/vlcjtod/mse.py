"""
Exact MSE expressions and Wiener equalizers under input-dependent shot noise.

Three link models share the same noise law: a receiver branch observing
intensity ``x`` sees zero-mean Gaussian noise of variance
``sigma2 * (varsigma2 * x + 1)``.  Because PAM symbols have zero mean,
the shot-noise contribution to the MSE depends on the offset only.

Point-to-point (P2P)
    ``y_bar = H P s + W n_sh + n_th``, ``s_hat = G y_bar``.
Downlink (DL)
    user k observes ``h_k^T x`` with ``x = P s + b``; scalar equalizer ``g_k``.
Uplink (UL)
    user k transmits ``p_k s_k + b_k``; the access point observes
    ``sum_k h_k x_k`` and applies receive vector ``g_k``.

In the multi-user models ``h_k`` is column k of ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .signal import SystemParams

__all__ = [
    "P2PDesign",
    "MultiUserDesign",
    "spd_inv",
    "shot_covariance",
    "wiener_equalizer_p2p",
    "mse_p2p_full",
    "mse_p2p_reduced",
    "wiener_equalizer_downlink",
    "mse_downlink_full",
    "mse_downlink_reduced",
    "wiener_equalizer_uplink",
    "mse_uplink_full",
    "mse_uplink_reduced",
    "PER_USER",
    "LITERAL",
]

# uplink interference conventions: sum_j p_j^2 h_j h_j^T (per user) or
# p_k^2 H H^T (as the expression is sometimes printed)
PER_USER = "per_user"
LITERAL = "literal"


@dataclass
class P2PDesign:
    p: np.ndarray
    b: np.ndarray
    g: np.ndarray
    mse: float
    status: str = "converged"
    info: dict = field(default_factory=dict)


@dataclass
class MultiUserDesign:
    """Downlink: ``p`` is N_t x K, ``b`` length N_t, ``g`` K scalars.
    Uplink: ``p`` and ``b`` are K scalars, ``g`` is N x K (column k = receiver k).
    """

    p: np.ndarray
    b: np.ndarray
    g: np.ndarray
    per_user_mse: np.ndarray
    link: str = "downlink"
    status: str = "converged"
    info: dict = field(default_factory=dict)

    @property
    def sum_mse(self) -> float:
        return float(np.sum(self.per_user_mse))


def spd_inv(a) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix via Cholesky.

    Raises ``numpy.linalg.LinAlgError`` on a non-positive pivot.
    """
    a = np.asarray(a, dtype=float)
    c, low = linalg.cho_factor(a, check_finite=False)
    return linalg.cho_solve((c, low), np.eye(a.shape[0]), check_finite=False)


# ----------------------------------------------------------------------------
# point to point
# ----------------------------------------------------------------------------


def shot_covariance(h, b) -> np.ndarray:
    """``E_s[W W^T] = diag(H b)``; negative received intensity is an error."""
    hb = np.asarray(h, dtype=float) @ np.asarray(b, dtype=float)
    if (hb < -1e-12).any():
        raise ValueError("received offset intensity H b has a negative entry")
    return np.diag(np.maximum(hb, 0.0))


def _noise_cov(h, b, params: SystemParams) -> np.ndarray:
    hb = np.maximum(np.asarray(h) @ np.asarray(b), 0.0)
    return np.diag(params.shot * hb + params.sigma2)


def wiener_equalizer_p2p(h, p, b, params: SystemParams) -> np.ndarray:
    h, p = np.asarray(h, dtype=float), np.asarray(p, dtype=float)
    r = params.r
    hp = h @ p
    inner = r * hp @ hp.T + _noise_cov(h, b, params)
    return r * hp.T @ spd_inv(inner)


def mse_p2p_full(g, p, b, h, params: SystemParams) -> float:
    """Sum MSE for an arbitrary equalizer ``G`` (K x 3N_r)."""
    g, p, h = (np.asarray(a, dtype=float) for a in (g, p, h))
    r = params.r
    hp = h @ p
    gtg = g.T @ g
    hb = h @ np.asarray(b, dtype=float)
    return float(
        p.shape[1] * r
        + r * np.trace(hp @ hp.T @ gtg)
        - 2.0 * r * np.trace(g @ hp)
        + params.sigma2 * np.trace(gtg)
        + params.shot * np.dot(hb, np.diag(gtg))
    )


def _y_matrix(h, p, b, params: SystemParams):
    """``Y = I/r + P^T H^T Sigma H P`` and the diagonal of ``Sigma``."""
    hp = np.asarray(h) @ np.asarray(p)
    sig = 1.0 / (params.shot * np.maximum(np.asarray(h) @ np.asarray(b), 0.0) + params.sigma2)
    y = np.eye(hp.shape[1]) / params.r + hp.T @ (sig[:, None] * hp)
    return y, sig, hp


def mse_p2p_reduced(p, b, h, params: SystemParams) -> float:
    """Sum MSE at the Wiener equalizer, ``tr(Y^{-1})``."""
    y, _, _ = _y_matrix(h, p, b, params)
    return float(np.trace(spd_inv(y)))


# ----------------------------------------------------------------------------
# downlink
# ----------------------------------------------------------------------------


def wiener_equalizer_downlink(h, p, b, params: SystemParams) -> np.ndarray:
    """Per-user scalar Wiener equalizers ``g_k``."""
    h, p, b = (np.asarray(a, dtype=float) for a in (h, p, b))
    r = params.r
    q = h.T @ p  # q[k, j] = h_k^T p_j
    sig = np.diag(q)
    denom = r * (q**2).sum(axis=1) + params.shot * (h.T @ b) + params.sigma2
    return r * sig / denom


def mse_downlink_full(p, b, h, g, params: SystemParams) -> np.ndarray:
    h, p, b, g = (np.asarray(a, dtype=float) for a in (h, p, b, g))
    r = params.r
    q = h.T @ p
    return (
        r * g**2 * (q**2).sum(axis=1)
        - 2.0 * r * g * np.diag(q)
        + params.sigma2 * g**2
        + r
        + params.shot * g**2 * (h.T @ b)
    )


def mse_downlink_reduced(p, b, h, params: SystemParams) -> np.ndarray:
    h, p, b = (np.asarray(a, dtype=float) for a in (h, p, b))
    r = params.r
    q = h.T @ p
    c = (q**2).sum(axis=1) + (params.shot * (h.T @ b) + params.sigma2) / r
    return r - r * np.diag(q) ** 2 / c


# ----------------------------------------------------------------------------
# uplink
# ----------------------------------------------------------------------------


def _uplink_cov(h, p, b, params: SystemParams, mode: str):
    """Receive covariance per user (list of K matrices, shared in per-user mode)."""
    h = np.asarray(h, dtype=float)
    r = params.r
    noise = np.diag(params.shot * np.maximum(h @ b, 0.0) + params.sigma2)
    if mode == PER_USER:
        a = r * (h * p**2) @ h.T + noise
        return [a] * h.shape[1]
    if mode == LITERAL:
        hht = h @ h.T
        return [r * pk**2 * hht + noise for pk in p]
    raise ValueError(f"unknown uplink interference mode {mode!r}")


def wiener_equalizer_uplink(h, p, b, params: SystemParams, mode: str = PER_USER) -> np.ndarray:
    """Receive vectors as the columns of an N x K matrix."""
    h, p, b = (np.asarray(a, dtype=float) for a in (h, p, b))
    covs = _uplink_cov(h, p, b, params, mode)
    if mode == PER_USER:
        return params.r * linalg.solve(covs[0], h, assume_a="pos") * p
    return np.column_stack(
        [params.r * p[k] * linalg.solve(covs[k], h[:, k], assume_a="pos") for k in range(h.shape[1])]
    )


def mse_uplink_full(g, p, b, h, params: SystemParams, mode: str = PER_USER) -> np.ndarray:
    g, p, b, h = (np.asarray(a, dtype=float) for a in (g, p, b, h))
    r = params.r
    gh = g.T @ h  # gh[k, j] = g_k^T h_j
    if mode == PER_USER:
        interf = r * (gh**2 * p[None, :] ** 2).sum(axis=1)
    elif mode == LITERAL:
        interf = r * p**2 * (gh**2).sum(axis=1)
    else:
        raise ValueError(f"unknown uplink interference mode {mode!r}")
    shot = params.shot * ((g**2) * (h @ b)[:, None]).sum(axis=0)
    return interf - 2.0 * r * p * np.diag(gh) + params.sigma2 * (g**2).sum(axis=0) + r + shot


def mse_uplink_reduced(p, b, h, params: SystemParams, mode: str = PER_USER) -> np.ndarray:
    h, p, b = (np.asarray(a, dtype=float) for a in (h, p, b))
    r = params.r
    covs = _uplink_cov(h, p, b, params, mode)
    out = np.empty(h.shape[1])
    for k in range(h.shape[1]):
        hk = h[:, k]
        out[k] = r - r**2 * p[k] ** 2 * hk @ linalg.solve(covs[k], hk, assume_a="pos")
    return out
