"""
Multi-color VLC channel construction.

The overall channel of an RGB MIMO link is the Kronecker product of the
3x3 color-crosstalk (CoC) matrix and the N_r x N_t channel-correlation
(ChC) matrix.  Rows/columns of the overall matrix are ordered color-major:
index ``c * N + t`` addresses color ``c`` of LED (or detector) ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Channel",
    "UncertaintyModel",
    "CaseId",
    "make_coc_matrix",
    "make_overall_channel",
    "case_channel",
    "uncertainty_ball",
    "sample_channel_error",
    "load_channel_matrix",
]


@dataclass(frozen=True)
class Channel:
    """Point-to-point channel with its two Kronecker factors."""

    chc: np.ndarray
    coc: np.ndarray
    overall: np.ndarray

    @property
    def n_t(self) -> int:
        return self.chc.shape[1]

    @property
    def n_r(self) -> int:
        return self.chc.shape[0]

    def __post_init__(self):
        for arr in (self.chc, self.coc, self.overall):
            arr.setflags(write=False)


@dataclass(frozen=True)
class UncertaintyModel:
    """Norm-bounded per-column channel error model ``h_k = h_hat_k + e``, ``||e|| <= rho_k``."""

    h_hat: np.ndarray  # columns are the estimated h_k
    rho: np.ndarray
    s: float = 0.0

    @property
    def n_users(self) -> int:
        return self.h_hat.shape[1]


class CaseId(str, Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"
    CASE4 = "case4"
    CASE5 = "case5"
    DOWNLINK4 = "downlink4"


def make_coc_matrix(xi: float) -> np.ndarray:
    """Color-crosstalk matrix for leak fraction ``xi`` (rows sum to one)."""
    if not 0.0 <= xi <= 0.5:
        raise ValueError(f"leak fraction xi must lie in [0, 0.5], got {xi}")
    return np.array(
        [
            [1.0 - xi, xi, 0.0],
            [xi, 1.0 - 2.0 * xi, xi],
            [0.0, xi, 1.0 - xi],
        ]
    )


def make_overall_channel(chc, coc) -> Channel:
    """Compose the overall channel ``coc ⊗ chc``.

    Raises
    ------
    ValueError
        If either factor has a negative entry or ``coc`` is not 3x3.
    """
    chc = np.array(chc, dtype=float, ndmin=2)
    coc = np.array(coc, dtype=float, ndmin=2)
    if coc.shape != (3, 3):
        raise ValueError(f"color crosstalk matrix must be 3x3, got {coc.shape}")
    if (chc < 0).any() or (coc < 0).any():
        raise ValueError("channel gains must be non-negative")
    return Channel(chc=chc, coc=coc, overall=np.kron(coc, chc))


_CORRELATED = [[1.0, 0.5], [0.25, 1.0]]


def case_channel(case_id) -> np.ndarray | Channel:
    """Fixture channels used in the numerical study.

    ``case1``..``case5`` return a :class:`Channel` (N_t = N_r = 2).
    ``downlink4`` returns the 4x4 white-LED multi-user matrix in which only
    adjacent LEDs interfere.
    """
    case_id = CaseId(case_id)
    if case_id is CaseId.CASE1:
        return make_overall_channel(np.eye(2), np.eye(3))
    if case_id is CaseId.CASE2:
        return make_overall_channel([[1.0, 0.0], [0.0, 0.0]], np.eye(3))
    if case_id is CaseId.CASE3:
        return make_overall_channel(_CORRELATED, np.eye(3))
    if case_id is CaseId.CASE4:
        return make_overall_channel(np.eye(2), make_coc_matrix(0.05))
    if case_id is CaseId.CASE5:
        return make_overall_channel(_CORRELATED, make_coc_matrix(0.05))
    return np.array(
        [
            [1.0, 0.25, 0.0, 0.0],
            [0.25, 1.0, 0.25, 0.0],
            [0.0, 0.25, 1.0, 0.25],
            [0.0, 0.0, 0.25, 1.0],
        ]
    )


def uncertainty_ball(h, s: float) -> UncertaintyModel:
    """Treat ``h`` as the channel estimate and give column k radius ``s * ||h_k||``."""
    if not 0.0 <= s < 1.0:
        raise ValueError(f"uncertainty scalar s must lie in [0, 1), got {s}")
    h = np.array(h, dtype=float, ndmin=2)
    return UncertaintyModel(h_hat=h, rho=s * np.linalg.norm(h, axis=0), s=float(s))


def sample_channel_error(model: UncertaintyModel, seed: int, n_samples: int = 1):
    """Draw channel errors inside each user's ball.

    Returns an array of shape ``(n_samples, N, K)`` whose ``[:, :, k]``
    slices satisfy ``||e|| <= rho_k``.  Half of the samples (even indices)
    sit exactly on the sphere; the rest are uniform in the ball.
    """
    rng = np.random.default_rng(seed)
    n, k = model.h_hat.shape
    direction = rng.standard_normal((n_samples, n, k))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random((n_samples, 1, k)) ** (1.0 / n)
    radius[::2] = 1.0
    return direction * radius * model.rho[None, None, :]


def load_channel_matrix(path) -> np.ndarray:
    """Read a matrix file: ``rows cols`` header, then rows of decimals."""
    from .matrixio import read_matrix

    return read_matrix(Path(path))
