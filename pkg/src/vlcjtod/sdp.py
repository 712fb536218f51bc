"""
A small dense log-det barrier solver for linear matrix inequality problems.

Problem form::

    minimize    c^T x
    subject to  F_j(x) = F_j0 + sum_i x_i F_ji  >= 0   (PSD, every block j)
                G x + h >= 0                           (elementwise)
                A x = b_eq

Equalities are eliminated through a null-space parametrization
``x = x0 + N z``; the barrier subproblems are solved by damped Newton steps
and the barrier weight grows by ``mu`` after each centering.  A phase-I
problem supplies a strictly feasible start when the caller does not.
Intended for the desk-scale problems of the robust design (tens of
variables, blocks of order ten).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

__all__ = ["LmiBlock", "SdpProblem", "SdpSolution", "SdpError", "solve_sdp"]

log = logging.getLogger(__name__)


class SdpError(RuntimeError):
    """Infeasible start or stalled centering; ``best`` holds the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass
class LmiBlock:
    """Affine symmetric matrix ``const + sum_i x_i coeffs[i]``; ``coeffs`` is (n_vars, m, m)."""

    const: np.ndarray
    coeffs: np.ndarray
    name: str = ""

    @property
    def size(self) -> int:
        return self.const.shape[0]

    def value(self, x) -> np.ndarray:
        return self.const + np.tensordot(x, self.coeffs, axes=1)


@dataclass
class SdpProblem:
    n_vars: int
    c: np.ndarray
    blocks: list
    g_ineq: np.ndarray
    h_ineq: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    layout: dict = field(default_factory=dict)
    offset: float = 0.0  # constant added to c^T x when reporting the objective

    def unpack(self, x) -> dict:
        return {name: x[sl].reshape(shape) for name, (sl, shape) in self.layout.items()}

    def objective(self, x) -> float:
        return float(self.c @ x + self.offset)

    def min_eigs(self, x) -> np.ndarray:
        return np.array([np.linalg.eigvalsh(blk.value(x)).min() for blk in self.blocks])

    def ineq_slack(self, x) -> np.ndarray:
        return self.g_ineq @ x + self.h_ineq

    def to_text(self) -> str:
        """Plain-text dump: header, block sizes, then ``block row col var coeff`` tuples.

        ``var = -1`` marks the constant matrix; only the upper triangle is listed.
        """
        out = [f"n_vars {self.n_vars}", "blocks " + " ".join(str(b.size) for b in self.blocks)]
        out.append("objective " + " ".join(f"{i} {float(v)!r}" for i, v in enumerate(self.c) if v != 0))
        for j, blk in enumerate(self.blocks):
            iu = np.triu_indices(blk.size)
            for r, c in zip(*iu):
                if blk.const[r, c] != 0:
                    out.append(f"{j} {r} {c} -1 {float(blk.const[r, c])!r}")
            for v in range(self.n_vars):
                m = blk.coeffs[v]
                for r, c in zip(*iu):
                    if m[r, c] != 0:
                        out.append(f"{j} {r} {c} {v} {float(m[r, c])!r}")
        for i, (grow, hv) in enumerate(zip(self.g_ineq, self.h_ineq)):
            terms = " ".join(f"{v} {float(grow[v])!r}" for v in np.flatnonzero(grow))
            out.append(f"ineq {i} {float(hv)!r} : {terms}")
        for i, (arow, bv) in enumerate(zip(self.a_eq, self.b_eq)):
            terms = " ".join(f"{v} {float(arow[v])!r}" for v in np.flatnonzero(arow))
            out.append(f"eq {i} {float(bv)!r} : {terms}")
        return "\n".join(out) + "\n"


@dataclass
class SdpSolution:
    x: np.ndarray
    objective: float
    values: dict
    gap: float
    n_newton: int
    status: str = "optimal"


# ----------------------------------------------------------------------------
# barrier machinery in reduced coordinates
# ----------------------------------------------------------------------------


class _Reduced:
    """The problem in null-space coordinates plus an optional extra slack variable."""

    def __init__(self, prob: SdpProblem, x0, basis, phase1: bool):
        self.x0, self.basis, self.phase1 = x0, basis, phase1
        nz = basis.shape[1]
        self.n = nz + (1 if phase1 else 0)
        self.blocks = []
        for blk in prob.blocks:
            const = blk.value(x0)
            co = np.tensordot(basis.T, blk.coeffs, axes=1)
            if phase1:
                co = np.concatenate([co, np.eye(blk.size)[None]], axis=0)
            self.blocks.append((const, co.reshape(self.n, -1), blk.size))
        self.g = prob.g_ineq @ basis
        self.h = prob.h_ineq + prob.g_ineq @ x0
        if phase1:
            # the slack enters every original inequality; s >= -1 and a wide
            # box on x keep the phase-I barrier bounded below
            radius = 1e4 * max(1.0, np.abs(x0).max(initial=0.0))
            zero = np.zeros((basis.shape[0], 1))
            self.g = np.vstack([
                np.hstack([self.g, np.ones((self.g.shape[0], 1))]),
                np.hstack([basis, zero]),
                np.hstack([-basis, zero]),
                np.eye(1, self.n, self.n - 1),
            ])
            self.h = np.concatenate([self.h, radius + x0, radius - x0, [1.0]])
            self.c = np.eye(1, self.n, self.n - 1)[0]
        else:
            self.c = basis.T @ prob.c
        self.m_total = sum(b[2] for b in self.blocks) + self.g.shape[0]

    def x_of(self, z):
        zz = z[:-1] if self.phase1 else z
        return self.x0 + self.basis @ zz

    def barrier(self, z):
        """Barrier value, or ``inf`` outside the interior."""
        val = 0.0
        for const, co, m in self.blocks:
            f = const + (z @ co).reshape(m, m)
            try:
                ch = linalg.cholesky(f, lower=True, check_finite=False)
            except linalg.LinAlgError:
                return np.inf
            val -= 2.0 * np.log(np.diag(ch)).sum()
        s = self.g @ z + self.h
        if (s <= 0).any():
            return np.inf
        return val - np.log(s).sum()

    def derivatives(self, z):
        grad = np.zeros(self.n)
        hess = np.zeros((self.n, self.n))
        for const, co, m in self.blocks:
            f = const + (z @ co).reshape(m, m)
            ch = linalg.cholesky(f, lower=True, check_finite=False)
            # t[i] = L^{-1} F_i L^{-T} via two batched triangular solves on the
            # horizontally stacked coefficient matrices [F_1 ... F_n]
            n = self.n
            wide = co.reshape(n, m, m).transpose(1, 0, 2).reshape(m, n * m)
            half = linalg.solve_triangular(ch, wide, lower=True, check_finite=False).reshape(m, n, m)
            wide = half.transpose(2, 1, 0).reshape(m, n * m)
            t = linalg.solve_triangular(ch, wide, lower=True, check_finite=False)
            t = t.reshape(m, n, m).transpose(1, 0, 2)
            flat = t.reshape(self.n, -1)
            grad -= np.einsum("ijj->i", t)
            hess += flat @ flat.T
        s = self.g @ z + self.h
        grad -= self.g.T @ (1.0 / s)
        hess += (self.g / s[:, None] ** 2).T @ self.g
        return grad, hess


def _center(red: _Reduced, z, t, max_newton, stop=None):
    """Damped Newton on ``t c^T z + barrier(z)``; returns (z, n_steps, converged)."""
    bar = red.barrier(z)
    for it in range(1, max_newton + 1):
        if stop is not None and stop(z):
            return z, it, True
        g, hmat = red.derivatives(z)
        g = g + t * red.c
        # Jacobi equilibration: the variables differ in scale by many orders
        d = 1.0 / np.sqrt(np.maximum(np.diag(hmat), 1e-300))
        hs = hmat * d[:, None] * d[None, :]
        try:
            dz = -d * linalg.solve(hs, d * g, assume_a="pos", check_finite=False)
        except (linalg.LinAlgError, ValueError):
            dz = -d * linalg.lstsq(hs, d * g)[0]
        dec = float(-g @ dz)
        if dec / 2.0 <= 1e-10:
            return z, it, True
        # the change of t c^T z is formed directly: subtracting two values of
        # size t |c^T z| would lose the decrease to rounding once t is large
        lin = t * float(red.c @ dz)
        step = 1.0
        while step > 1e-14:
            zn = z + step * dz
            barn = red.barrier(zn)
            if step * lin + (barn - bar) <= -0.25 * step * dec:
                break
            step *= 0.5
        else:
            # no representable decrease: converged up to rounding if the
            # Newton decrement is already small
            log.debug("line search failed: t=%g dec=%g", t, dec)
            return z, it, dec / 2.0 <= 1e-6
        z, bar = zn, barn
    return z, max_newton, False


def solve_sdp(prob: SdpProblem, tol: float = 1e-6, x_start=None, mu: float = 10.0, t0: float = 1.0,
              max_newton: int = 200) -> SdpSolution:
    """Solve ``prob`` to duality measure ``m / t < tol``.

    ``x_start``, when strictly feasible, skips phase I.  Deterministic.
    """
    if prob.a_eq.shape[0]:
        x0 = linalg.lstsq(prob.a_eq, prob.b_eq)[0]
        basis = linalg.null_space(prob.a_eq)
        if np.abs(prob.a_eq @ x0 - prob.b_eq).max() > 1e-9 * (1 + np.abs(prob.b_eq).max()):
            raise SdpError("equality constraints are inconsistent")
    else:
        x0 = np.zeros(prob.n_vars)
        basis = np.eye(prob.n_vars)
    if x_start is not None:
        x_start = np.asarray(x_start, dtype=float)
        if np.abs(prob.a_eq @ x_start - prob.b_eq).max(initial=0.0) < 1e-10 * (1 + np.abs(prob.b_eq).max(initial=0)):
            x0 = x_start
    red = _Reduced(prob, x0, basis, phase1=False)
    z = np.zeros(red.n)
    n_newton = 0
    if not np.isfinite(red.barrier(z)):
        z, steps = _phase1(prob, x0, basis, tol)
        n_newton += steps
    t = t0
    while True:
        z, steps, ok = _center(red, z, t, max_newton)
        n_newton += steps
        if not ok:
            x = red.x_of(z)
            raise SdpError(f"centering stalled at t={t:.3g}", best=x)
        if red.m_total / t < tol:
            break
        t *= mu
    x = red.x_of(z)
    return SdpSolution(x=x, objective=prob.objective(x), values=prob.unpack(x), gap=red.m_total / t,
                       n_newton=n_newton)


def _phase1(prob, x0, basis, tol):
    """Find a strictly feasible point by driving a common slack below zero."""
    red = _Reduced(prob, x0, basis, phase1=True)
    worst = 0.0
    base = red.x_of(np.zeros(red.n))
    for blk in prob.blocks:
        worst = min(worst, np.linalg.eigvalsh(blk.value(base)).min())
    slack = prob.ineq_slack(base)
    worst = min(worst, slack.min(initial=0.0))
    z = np.zeros(red.n)
    z[-1] = 1.0 - 1.5 * worst
    # keep the slack bound s >= -1 strictly satisfied
    t = float(red.m_total)
    total = 0
    for _ in range(40):
        z, steps, _ = _center(red, z, t, 200, stop=lambda zz: zz[-1] < -1e-3)
        total += steps
        if z[-1] < -1e-3:
            zz = z[:-1]
            return zz, total
        if red.m_total / t < tol * 1e-2:
            break
        t *= 10.0
    raise SdpError(f"no strictly feasible point (phase-I slack {z[-1]:.3g} >= 0)", best=red.x_of(z))
