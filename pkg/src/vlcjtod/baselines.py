"""Scaled zero-forcing and SVD pre-equalization baselines with a fixed equal offset."""

from __future__ import annotations

import numpy as np

from .mse import MultiUserDesign, P2PDesign, mse_downlink_full, mse_p2p_full
from .signal import LightingConstraints, SystemParams

__all__ = ["zf_design", "svd_design", "zf_downlink_design", "scaling_constant", "svd_sign_convention"]


def scaling_constant(pre, b, amp) -> float:
    """Largest ``mu`` with ``abs(mu * pre) @ (amp * 1) <= b``."""
    need = np.abs(pre).sum(axis=1) * amp
    with np.errstate(divide="ignore"):
        ratio = np.where(need > 0, b / need, np.inf)
    return float(ratio.min())


def _equal_offset(n, lc):
    return np.full(n, lc.budget / n)


def _check_rank(h, what):
    if np.linalg.matrix_rank(h) < min(h.shape) or h.shape[0] != h.shape[1]:
        raise np.linalg.LinAlgError(
            f"{what} needs a square full-rank channel; got rank "
            f"{np.linalg.matrix_rank(h)} for shape {h.shape} (e.g. a blocked LED)"
        )


def zf_design(h, params: SystemParams, lc: LightingConstraints) -> P2PDesign:
    """``P = mu H^{-1}``, ``G = I / mu`` with the equal offset ``beta P_T / n``."""
    h = np.asarray(getattr(h, "overall", h), dtype=float)
    _check_rank(h, "zero forcing")
    hinv = np.linalg.inv(h)
    b = _equal_offset(h.shape[1], lc)
    mu = scaling_constant(hinv, b, params.amp_bound)
    p = mu * hinv
    g = np.eye(h.shape[0]) / mu
    return P2PDesign(p=p, b=b, g=g, mse=mse_p2p_full(g, p, b, h, params), info={"mu": mu})


def svd_sign_convention(u, vt):
    """Flip singular-vector pairs so each right vector's largest-magnitude entry is non-negative."""
    v = vt.T.copy()
    u = u.copy()
    lead = v[np.abs(v).argmax(axis=0), np.arange(v.shape[1])]
    flip = np.where(lead < 0, -1.0, 1.0)
    return u * flip, v * flip


def svd_design(h, params: SystemParams, lc: LightingConstraints) -> P2PDesign:
    """``P = mu V S^{-1}``, ``G = U^T / mu`` from ``H = U S V^T``."""
    h = np.asarray(getattr(h, "overall", h), dtype=float)
    _check_rank(h, "SVD pre-equalization")
    u, sv, vt = np.linalg.svd(h)
    u, v = svd_sign_convention(u, vt)
    pre = v / sv
    b = _equal_offset(h.shape[1], lc)
    mu = scaling_constant(pre, b, params.amp_bound)
    p = mu * pre
    g = u.T / mu
    return P2PDesign(p=p, b=b, g=g, mse=mse_p2p_full(g, p, b, h, params), info={"mu": mu})


def zf_downlink_design(h, params: SystemParams, lc: LightingConstraints) -> MultiUserDesign:
    """Scaled ZF for the multi-user downlink, where user k observes ``h_k^T x``."""
    h = np.asarray(h, dtype=float)
    _check_rank(h, "zero forcing")
    pre = np.linalg.inv(h.T)
    b = _equal_offset(h.shape[0], lc)
    mu = scaling_constant(pre, b, params.amp_bound)
    p = mu * pre
    g = np.full(h.shape[1], 1.0 / mu)
    return MultiUserDesign(
        p=p, b=b, g=g, per_user_mse=mse_downlink_full(p, b, h, g, params), link="downlink", info={"mu": mu}
    )
