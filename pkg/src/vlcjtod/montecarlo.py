"""
Seeded Monte-Carlo symbol-error-rate simulation under input-dependent shot noise.

All three link models reduce to one equivalent point-to-point form
``x = P s + b``, ``y = H x + sqrt(H x) * n_sh + n_th``,
``s_hat = G (y - H b)``:

=========  ============  ===========  ==============
scenario   H             P            G
=========  ============  ===========  ==============
p2p        H             P            G
downlink   H^T           P            diag(g)
uplink     H             diag(p)      g^T
=========  ============  ===========  ==============

Trials are split into fixed-size chunks; chunk ``c`` draws everything from
a Philox generator keyed by ``(seed, c)``, so results do not depend on how
chunks are scheduled.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .matrixio import atomic_write_text
from .mse import (
    MultiUserDesign,
    P2PDesign,
    mse_downlink_full,
    mse_p2p_full,
    mse_uplink_full,
)
from .signal import InfeasibleError, PamConstellation, SystemParams

__all__ = [
    "Scenario",
    "SimSpec",
    "SerResult",
    "CSV_COLUMNS",
    "equivalent_link",
    "slice_pam",
    "receiver_noise",
    "simulate_ser",
    "analytic_sum_mse",
    "empirical_shot_covariance",
    "sweep",
    "monotonicity_flags",
    "result_row",
    "append_results_csv",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "scenario", "case", "scheme", "sigma2", "varsigma2", "p_total", "beta",
    "n_trials", "seed", "ser", "ci_low", "ci_high", "sum_mse_analytic",
]

CHUNK = 20_000


class Scenario:
    P2P = "p2p"
    DOWNLINK = "downlink"
    UPLINK = "uplink"
    ALL = ("p2p", "downlink", "uplink")


@dataclass
class SimSpec:
    design: P2PDesign | MultiUserDesign
    h: np.ndarray
    params: SystemParams
    n_trials: int
    seed: int
    scenario: str = Scenario.P2P
    case: str = ""
    scheme: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("need at least one trial")
        if self.scenario not in Scenario.ALL:
            raise ValueError(f"unknown scenario {self.scenario!r}")


@dataclass
class SerResult:
    ser: float
    ci_low: float
    ci_high: float
    n_errors: int
    n_symbols: int
    extra: dict = field(default_factory=dict)


def equivalent_link(design, h, scenario: str):
    """``(H, P, b, G)`` of the equivalent point-to-point link."""
    h = np.asarray(h, dtype=float)
    if scenario == Scenario.P2P:
        return h, np.asarray(design.p), np.asarray(design.b), np.asarray(design.g)
    if scenario == Scenario.DOWNLINK:
        return h.T, np.asarray(design.p), np.asarray(design.b), np.diag(design.g)
    if scenario == Scenario.UPLINK:
        return h, np.diag(design.p), np.asarray(design.b), np.asarray(design.g).T
    raise ValueError(f"unknown scenario {scenario!r}")


def analytic_sum_mse(design, h, params: SystemParams, scenario: str) -> float:
    if scenario == Scenario.P2P:
        return mse_p2p_full(design.g, design.p, design.b, h, params)
    if scenario == Scenario.DOWNLINK:
        return float(mse_downlink_full(design.p, design.b, h, design.g, params).sum())
    mode = design.info.get("mode", "per_user") if isinstance(design, MultiUserDesign) else "per_user"
    return float(mse_uplink_full(design.g, design.p, design.b, h, params, mode).sum())


def slice_pam(z, const: PamConstellation) -> np.ndarray:
    """Index of the nearest constellation point; exact midpoints go to the smaller symbol."""
    u = (np.asarray(z) + const.d) / const.spacing
    return np.clip(np.ceil(u - 0.5), 0, const.m - 1).astype(np.int64)


def receiver_noise(rng: np.random.Generator, hx, params: SystemParams) -> np.ndarray:
    """Shot plus thermal noise for received intensities ``hx`` (shot variance ``hx * varsigma2 * sigma2``)."""
    n_sh = rng.standard_normal(hx.shape)
    n_th = rng.standard_normal(hx.shape)
    return np.sqrt(hx * params.shot) * n_sh + np.sqrt(params.sigma2) * n_th


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chunk)])))


def _run_chunk(args):
    c, n, h, p, b, g, params, seed = args
    const = params.constellation
    rng = _chunk_rng(seed, c)
    idx = rng.integers(0, const.m, size=(n, p.shape[1]))
    s = const.points[idx]
    x = s @ p.T + b
    if x.min() < -1e-9 * max(1.0, np.abs(b).max()):
        raise InfeasibleError(f"negative LED intensity {x.min():.3g} in chunk {c}; design violates the amplitude bound")
    hx = np.maximum(x @ h.T, 0.0)
    y = hx + receiver_noise(rng, hx, params)
    z = (y - h @ b) @ g.T
    return int(np.count_nonzero(slice_pam(z, const) != idx))


def wilson_interval(k: int, n: int, level: float = 0.95):
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def simulate_ser(spec: SimSpec) -> SerResult:
    """Symbol error rate with a 95% Wilson interval; bit-identical for identical specs."""
    h, p, b, g = equivalent_link(spec.design, spec.h, spec.scenario)
    sizes = [min(CHUNK, spec.n_trials - start) for start in range(0, spec.n_trials, CHUNK)]
    jobs = [(c, n, h, p, b, g, spec.params, spec.seed) for c, n in enumerate(sizes)]
    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            errors = sum(pool.map(_run_chunk, jobs))
    else:
        errors = sum(map(_run_chunk, jobs))
    n_sym = spec.n_trials * p.shape[1]
    lo, hi = wilson_interval(errors, n_sym)
    return SerResult(ser=errors / n_sym, ci_low=lo, ci_high=hi, n_errors=errors, n_symbols=n_sym)


def empirical_shot_covariance(p, b, h, n: int, seed: int, params: SystemParams | None = None,
                              antithetic: bool = False) -> np.ndarray:
    """Sample mean of ``diag(H P s + H b)`` over ``n`` uniform PAM symbol vectors.

    With ``antithetic`` the draws come in ``(s, -s)`` pairs, which cancels
    the symbol-dependent term exactly.
    """
    params = params or SystemParams()
    p, b, h = (np.asarray(a, dtype=float) for a in (p, b, h))
    const = params.constellation
    rng = np.random.default_rng(seed)
    m = (n + 1) // 2 if antithetic else n
    s = const.points[rng.integers(0, const.m, size=(m, p.shape[1]))]
    if antithetic:
        s = np.concatenate([s, -s])
    mean_signal = (s @ p.T @ h.T).mean(axis=0) if s.size else np.zeros(h.shape[0])
    return np.diag(mean_signal + h @ b)


# ----------------------------------------------------------------------------
# sweeps and result rows
# ----------------------------------------------------------------------------


def result_row(spec: SimSpec, res: SerResult | None, status: str = "ok") -> dict:
    p = spec.params
    row = {
        "scenario": spec.scenario,
        "case": spec.case,
        "scheme": spec.scheme,
        "sigma2": p.sigma2,
        "varsigma2": p.varsigma2,
        "p_total": p.p_total,
        "beta": p.beta,
        "n_trials": spec.n_trials,
        "seed": spec.seed,
        "ser": res.ser if res else float("nan"),
        "ci_low": res.ci_low if res else float("nan"),
        "ci_high": res.ci_high if res else float("nan"),
        "sum_mse_analytic": analytic_sum_mse(spec.design, spec.h, p, spec.scenario) if res else float("nan"),
    }
    row["status"] = status
    return row


_AXES = ("sigma2", "varsigma2", "p_total", "uncertainty_s")


def sweep(design_fn, h, params: SystemParams, axis: str, values, schemes, n_trials: int, seed: int,
          scenario: str = Scenario.P2P, case: str = "", sim_channel_fn=None) -> list[dict]:
    """Re-design and simulate every scheme at every axis value.

    ``design_fn(scheme, params, value)`` returns a design; a failure (for
    example an infeasible constraint set or a singular channel for a
    baseline) marks that row ``failed`` and the sweep continues.
    ``sim_channel_fn(value)``, when given, supplies the channel used for
    simulation (for example a perturbed channel on the ``uncertainty_s`` axis).
    """
    if axis not in _AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {_AXES}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    rows = []
    for v in values:
        pv = params if axis == "uncertainty_s" else params.with_(**{axis: float(v)})
        hs = sim_channel_fn(v) if sim_channel_fn else h
        for scheme in schemes:
            try:
                design = design_fn(scheme, pv, v)
                spec = SimSpec(design, hs, pv, n_trials, seed, scenario, case, scheme)
                row = result_row(spec, simulate_ser(spec))
            except (InfeasibleError, np.linalg.LinAlgError, ValueError) as exc:
                log.warning("sweep point %s=%s scheme %s failed: %s", axis, v, scheme, exc)
                spec = SimSpec(P2PDesign(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.nan), hs, pv,
                               n_trials, seed, scenario, case, scheme)
                row = result_row(spec, None, status=f"failed: {exc}")
            row["axis"] = axis
            row["value"] = float(v)
            rows.append(row)
    return rows


def monotonicity_flags(rows: list[dict], axis: str) -> dict:
    """Per scheme, whether SER moves in the expected direction along ``axis``.

    SER should not increase with ``p_total`` and should not decrease with
    ``sigma2``, ``varsigma2`` or ``uncertainty_s``.  A step counts as a
    violation only when the two 95% intervals are disjoint and ordered the
    wrong way.
    """
    sign = -1.0 if axis == "p_total" else 1.0
    flags = {}
    for scheme in dict.fromkeys(r["scheme"] for r in rows):
        pts = sorted((r["value"], r) for r in rows if r["scheme"] == scheme and r["status"] == "ok")
        ok = True
        for (_, a), (_, c) in zip(pts, pts[1:]):
            if sign > 0 and c["ci_high"] < a["ci_low"]:
                ok = False
            if sign < 0 and c["ci_low"] > a["ci_high"]:
                ok = False
        flags[scheme] = ok
    return flags


def append_results_csv(path, rows: list[dict]) -> None:
    """Append rows to the results CSV (header written once), replacing the file atomically."""
    path = Path(path)
    existing = path.read_text() if path.exists() else ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    if not existing:
        w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    atomic_write_text(path, existing + buf.getvalue())
