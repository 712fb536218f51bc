"""
PAM constellations, system parameters, lighting constraints and the exact
Euclidean projections onto the lighting-feasible sets.

Feasibility of a precoder/offset pair means

* ``abs(P) @ (delta * 1) <= b`` (sufficient for non-negative intensity), and
* ``Pi @ b == beta * P_T * b_bar`` (dimming, total power and color ratio),
  or ``sum(b) == beta * P_T`` for white-LED (uncolored) systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

__all__ = [
    "PamConstellation",
    "SystemParams",
    "LightingConstraints",
    "InfeasibleError",
    "pam_points",
    "color_summation_matrix",
    "lighting_constraints",
    "check_feasible",
    "project_l1_ball",
    "project_precoder",
    "project_capped_simplex",
    "project_offset",
    "project_l1_cone",
    "project_joint",
]

_FEAS_TOL = 1e-9


class InfeasibleError(ValueError):
    """The lighting constraint set is empty for the requested inputs."""


@dataclass(frozen=True)
class PamConstellation:
    m: int
    d: float

    @property
    def points(self) -> np.ndarray:
        return np.linspace(-self.d, self.d, self.m)

    @property
    def r(self) -> float:
        """Per-symbol variance ``(d^2 / 3) (M + 1) / (M - 1)``."""
        return self.d**2 / 3.0 * (self.m + 1) / (self.m - 1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.d / (self.m - 1)


def pam_points(m: int, d: float) -> PamConstellation:
    if m < 2 or m % 2:
        raise ValueError(f"PAM order must be an even integer >= 2, got {m}")
    if d <= 0:
        raise ValueError(f"amplitude d must be positive, got {d}")
    return PamConstellation(int(m), float(d))


@dataclass(frozen=True)
class SystemParams:
    """Modulation, noise and power parameters.

    ``varsigma2`` scales the input-dependent shot-noise variance, which is
    ``x * varsigma2 * sigma2`` for received intensity ``x``.  ``delta``
    defaults to the constellation amplitude ``d``.
    """

    m: int = 4
    d: float = 3.0
    sigma2: float = 0.01
    varsigma2: float = 1.0
    p_total: float = 30.0
    beta: float = 1.0
    b_bar: tuple = (1 / 3, 1 / 3, 1 / 3)
    delta: float | None = None

    @property
    def constellation(self) -> PamConstellation:
        return pam_points(self.m, self.d)

    @property
    def r(self) -> float:
        return self.constellation.r

    @property
    def amp_bound(self) -> float:
        return self.d if self.delta is None else float(self.delta)

    @property
    def shot(self) -> float:
        """Shot-noise variance per unit intensity, ``varsigma2 * sigma2``."""
        return self.varsigma2 * self.sigma2

    def with_(self, **kw) -> "SystemParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class LightingConstraints:
    delta: float
    beta: float
    p_total: float
    b_bar: np.ndarray = field(default_factory=lambda: np.full(3, 1 / 3))
    pi: np.ndarray | None = None
    colored: bool = True

    def __post_init__(self):
        b_bar = np.asarray(self.b_bar, dtype=float)
        if (b_bar < 0).any() or abs(b_bar.sum() - 1.0) > 1e-12:
            raise ValueError("color ratio must be non-negative and sum to one")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"dimming level must lie in (0, 1], got {self.beta}")
        object.__setattr__(self, "b_bar", b_bar)

    @property
    def budget(self) -> float:
        return self.beta * self.p_total

    def groups(self, n_leds: int) -> list[tuple[np.ndarray, float]]:
        """(indices, required sum) per equality group of the offset vector."""
        if not self.colored:
            return [(np.arange(n_leds), self.budget)]
        pi = self.pi if self.pi is not None else color_summation_matrix(n_leds // 3)
        return [(np.flatnonzero(row), self.budget * bc) for row, bc in zip(pi, self.b_bar)]


def color_summation_matrix(n_t: int) -> np.ndarray:
    """3 x 3N_t zero/one matrix summing the per-color intensities."""
    if n_t < 1:
        raise ValueError("need at least one LED")
    return np.kron(np.eye(3), np.ones((1, n_t)))


def lighting_constraints(params: SystemParams, colored: bool = True, n_t: int | None = None):
    pi = color_summation_matrix(n_t) if (colored and n_t is not None) else None
    return LightingConstraints(
        delta=params.amp_bound,
        beta=params.beta,
        p_total=params.p_total,
        b_bar=np.asarray(params.b_bar, dtype=float),
        pi=pi,
        colored=colored,
    )


def check_feasible(p, b, lc: LightingConstraints, tol: float = _FEAS_TOL):
    """Return ``(ok, report)``; report lists violated rows and groups."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    b = np.asarray(b, dtype=float)
    slack = b - np.abs(p).sum(axis=1) * lc.delta
    bad_rows = np.flatnonzero(slack < -tol).tolist()
    bad_groups = []
    for c, (idx, total) in enumerate(lc.groups(b.size)):
        if abs(b[idx].sum() - total) > tol * max(1.0, abs(total)):
            bad_groups.append(c)
    report = {"rows": bad_rows, "groups": bad_groups, "min_slack": float(slack.min())}
    return (not bad_rows and not bad_groups), report


# ----------------------------------------------------------------------------
# projections
# ----------------------------------------------------------------------------


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w : ||w||_1 <= radius}``."""
    v = np.asarray(v, dtype=float)
    if radius <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.flatnonzero(u * k > css - radius)[-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_precoder(p, b, delta: float) -> np.ndarray:
    """Project ``P`` onto ``{P : abs(P) delta 1 <= b}`` for fixed ``b`` (row by row)."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    b = np.asarray(b, dtype=float)
    if (b < -_FEAS_TOL).any():
        raise ValueError("offset must be non-negative")
    return np.vstack([project_l1_ball(row, max(bi, 0.0) / delta) for row, bi in zip(p, b)])


def project_capped_simplex(v, lower, total: float, tol: float = 1e-12) -> np.ndarray:
    """Projection onto ``{x : x >= lower, sum(x) = total}``.

    Shifting by ``lower`` turns this into a simplex projection, solved by
    the sort-and-threshold water-filling rule.
    """
    v = np.asarray(v, dtype=float)
    lower = np.asarray(lower, dtype=float)
    s = total - lower.sum()
    if s < -tol * max(1.0, abs(total)):
        raise InfeasibleError(f"lower bounds sum to {lower.sum():.6g} > required {total:.6g}")
    s = max(s, 0.0)
    w = v - lower
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.flatnonzero(u * k > css - s)
    if rho.size == 0:
        return lower + s / w.size
    rho = rho[-1]
    theta = (css[rho] - s) / (rho + 1.0)
    return lower + np.maximum(w - theta, 0.0)


def project_offset(b, p, lc: LightingConstraints) -> np.ndarray:
    """Project ``b`` onto ``{b : b >= abs(P) delta 1, Pi b = beta P_T b_bar}``."""
    b = np.asarray(b, dtype=float)
    lower = np.abs(np.atleast_2d(p)).sum(axis=1) * lc.delta
    out = np.empty_like(b)
    for c, (idx, total) in enumerate(lc.groups(b.size)):
        try:
            out[idx] = project_capped_simplex(b[idx], lower[idx], total)
        except InfeasibleError as exc:
            raise InfeasibleError(f"color group {c}: {exc}") from None
    return out


def project_l1_cone(x, t: float, delta: float = 1.0):
    """Projection of ``(x, t)`` onto ``{(y, s) : delta * ||y||_1 <= s}``.

    Uses the KKT form ``y = soft(x, delta * mu)``, ``s = t + mu`` with the
    scalar ``mu >= 0`` found exactly over the sorted breakpoints.
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    if delta * a.sum() <= t:
        return x.copy(), float(t)
    # phi(mu) = delta * sum(max(a - delta mu, 0)) - t - mu is strictly
    # decreasing; on each piece with the top j+1 entries active it is linear
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    cand = (delta * css - t) / (1.0 + j * delta**2)
    upper = u / delta
    lower = np.append(u[1:], 0.0) / delta
    ok = np.flatnonzero((cand >= lower - 1e-15) & (cand <= upper + 1e-15))
    # no active entry at the root: the projection is the apex
    mu = float(cand[ok[0]]) if ok.size else -float(t)
    if t + mu <= 0:
        return np.zeros_like(x), 0.0
    y = np.sign(x) * np.maximum(a - delta * mu, 0.0)
    return y, float(t + mu)


def _cone_rows(u, css, t, delta):
    """Vectorized l1-cone multiplier for rows with pre-sorted magnitudes.

    ``u`` holds each row's magnitudes sorted in decreasing order and
    ``css`` their cumulative sums; returns the offsets ``s`` and the
    soft-threshold levels ``delta * mu`` of the projections.
    """
    n = u.shape[1]
    j = np.arange(1, n + 1)
    cand = (delta * css - t[:, None]) / (1.0 + j * delta**2)
    upper = u / delta
    lower = np.concatenate([u[:, 1:], np.zeros((u.shape[0], 1))], axis=1) / delta
    ok = (cand >= lower - 1e-15) & (cand <= upper + 1e-15)
    first = ok.argmax(axis=1)
    mu = np.where(ok.any(axis=1), cand[np.arange(u.shape[0]), first], -t)
    inside = delta * css[:, -1] <= t
    mu = np.where(inside, 0.0, mu)
    s = np.maximum(t + mu, 0.0)
    thr = np.where(s > 0, delta * mu, np.inf)
    return s, thr


def project_joint(p, b, lc: LightingConstraints, tol: float = 1e-14):
    """Joint projection of ``(P, b)`` onto the full lighting-feasible set.

    For each equality group a scalar multiplier ``lam`` shifts the offsets;
    each row is then projected onto its l1 cone.  The group sum of the
    projected offsets is non-increasing in ``lam``, so ``lam`` is found by
    bisection.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    b = np.asarray(b, dtype=float)
    a = np.abs(p)
    u_all = -np.sort(-a, axis=1)
    css_all = np.cumsum(u_all, axis=1)
    p_out = np.empty_like(p)
    b_out = np.empty_like(b)
    for idx, total in lc.groups(b.size):
        u, css, t = u_all[idx], css_all[idx], b[idx]

        def excess(lam):
            return _cone_rows(u, css, t - lam, lc.delta)[0].sum() - total

        scale = 1.0 + np.abs(t).max() + lc.delta * css[:, -1].max() + abs(total)
        lo, hi = -scale, scale
        while excess(lo) < 0:
            lo *= 2
        while excess(hi) > 0:
            hi *= 2
        lam = lo if excess(lo) == 0 else optimize.brentq(excess, lo, hi, xtol=tol * scale, rtol=1e-15)
        s, thr = _cone_rows(u, css, t - lam, lc.delta)
        # spread the bisection residual so the group sum is exact
        s = s + (total - s.sum()) / s.size
        y = np.sign(p[idx]) * np.maximum(a[idx] - thr[:, None], 0.0)
        for row, (yi, si) in enumerate(zip(y, s)):
            if lc.delta * np.abs(yi).sum() > si:
                y[row] = project_l1_ball(yi, max(si, 0.0) / lc.delta)
        p_out[idx] = y
        b_out[idx] = s
    return p_out, b_out
