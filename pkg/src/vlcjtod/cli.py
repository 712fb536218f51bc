"""
Command-line front end.

Subcommands::

    reproduce CASE                       optimize a fixture case and diff it against reference values
    design {p2p,downlink,uplink,robust}  write a design to --out
    simulate                             Monte-Carlo SER, appended to the results CSV
    sweep                                SER along one parameter axis
    duality                              downlink/uplink duality check
    min-dimming                          smallest dimming level meeting an MSE target

Exit codes: 0 ok, 1 tolerance or check failure, 2 infeasible, 3 input error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .baselines import svd_design, zf_design, zf_downlink_design
from .channel import (
    CaseId,
    case_channel,
    load_channel_matrix,
    make_coc_matrix,
    make_overall_channel,
    sample_channel_error,
    uncertainty_ball,
)
from .matrixio import atomic_write_text, read_matrix, write_matrix
from .mse import MultiUserDesign, P2PDesign, mse_downlink_full, mse_uplink_full
from .multiuser import duality_map, equal_split_offset, jtod_downlink, jtod_uplink, shot_duality_gap
from .montecarlo import (
    Scenario,
    SimSpec,
    analytic_sum_mse,
    append_results_csv,
    monotonicity_flags,
    result_row,
    simulate_ser,
    sweep,
)
from .optimizer import OptimizerConfig, jtod_p2p, min_dimming
from .robust import robust_jtod
from .signal import InfeasibleError, SystemParams, lighting_constraints

__all__ = ["main", "RunConfig", "load_config", "ConfigError", "REFERENCE", "load_design", "write_design"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_TOL, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------

_SYSTEM_KEYS = {f.name for f in dataclasses.fields(SystemParams)}
_OPT_KEYS = {f.name for f in dataclasses.fields(OptimizerConfig)} | {
    "outer_iters", "uplink_mode", "robust_equalizer", "eps_mse", "dimming_tol"}
_CHANNEL_KEYS = {"case", "file", "xi", "s", "colored"}
_SIM_KEYS = {"scenario", "schemes", "n_trials", "seed", "axis", "values", "results", "workers"}
_SECTIONS = {"system": _SYSTEM_KEYS, "channel": _CHANNEL_KEYS, "optimizer": _OPT_KEYS, "simulation": _SIM_KEYS}


@dataclass
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    channel: dict = field(default_factory=lambda: {"case": "case1"})
    extra: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    source: str = ""

    def as_dict(self) -> dict:
        return {
            "system": dataclasses.asdict(self.params),
            "optimizer": dataclasses.asdict(self.optimizer),
            "channel": self.channel,
            "extra": self.extra,
            "simulation": self.simulation,
        }


def _key_line(text: str, section: str, key: str) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip().lower()
        elif cur == section and s.split("=")[0].split(":")[0].strip().lower() == key:
            return i
    return 0


def _parse_value(raw: str, kind):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind == "floats":
        return tuple(float(t) for t in raw.replace(",", " ").split())
    if kind == "words":
        return tuple(t for t in raw.replace(",", " ").split())
    return raw.strip()


_KINDS = {
    "m": int, "d": float, "sigma2": float, "varsigma2": float, "p_total": float, "beta": float,
    "b_bar": "floats", "delta": float,
    "eps_p": float, "eps_b": float, "max_iters": int, "step0": float, "shrink": float, "armijo_c": float,
    "max_backtracks": int, "spectral": bool, "extrapolation": float, "n_restarts": int, "seed": int,
    "mode": str, "record_trace": bool, "outer_iters": int, "uplink_mode": str, "robust_equalizer": str,
    "eps_mse": float, "dimming_tol": float,
    "case": str, "file": str, "xi": float, "s": float, "colored": bool,
    "scenario": str, "schemes": "words", "n_trials": int, "axis": str, "values": "floats", "results": str,
    "workers": int,
}


def load_config(path) -> RunConfig:
    """Parse an INI-style config; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    values = {}
    for section in cp.sections():
        sec = section.lower()
        if sec not in _SECTIONS:
            raise ConfigError(f"{path}:{_section_line(text, section)}: unknown section [{section}]")
        for key, raw in cp.items(section):
            line = _key_line(text, sec, key)
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"{path}:{line}: unknown key {key!r} in [{sec}]")
            try:
                values[(sec, key)] = _parse_value(raw, _KINDS[key])
            except ValueError as exc:
                raise ConfigError(f"{path}:{line}: bad value for {key!r}: {exc}") from None
    sysk = {k: v for (s, k), v in values.items() if s == "system"}
    optk = {k: v for (s, k), v in values.items() if s == "optimizer"}
    extra = {k: optk.pop(k) for k in list(optk) if k not in {f.name for f in dataclasses.fields(OptimizerConfig)}}
    try:
        params = SystemParams(**sysk)
        params.constellation  # validates m and d
        optimizer = OptimizerConfig(**optk)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    channel = {k: v for (s, k), v in values.items() if s == "channel"} or {"case": "case1"}
    sim = {k: v for (s, k), v in values.items() if s == "simulation"}
    return RunConfig(params=params, optimizer=optimizer, channel=channel, extra=extra, simulation=sim,
                     source=str(path))


def _section_line(text, section):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return i
    return 0


def resolve_channel(rc: RunConfig):
    """``(H, n_t, case_label)`` for the configured channel."""
    ch = rc.channel
    if "file" in ch:
        h = load_channel_matrix(Path(rc.source).parent / ch["file"] if rc.source else ch["file"])
        return h, h.shape[1] // 3 if h.shape[1] % 3 == 0 else None, Path(ch["file"]).stem
    try:
        case = CaseId(ch.get("case", "case1"))
    except ValueError:
        raise ConfigError(f"unknown channel case {ch.get('case')!r}; choose from {[c.value for c in CaseId]}") from None
    if case is CaseId.DOWNLINK4:
        return case_channel(case), None, case.value
    c = case_channel(case)
    if "xi" in ch:
        c = make_overall_channel(c.chc, make_coc_matrix(ch["xi"]))
    return c.overall, c.n_t, case.value


def _lc(rc, n_t, colored=True):
    return lighting_constraints(rc.params, colored=colored and rc.channel.get("colored", True) and n_t is not None,
                                n_t=n_t)


# ----------------------------------------------------------------------------
# design construction and I/O
# ----------------------------------------------------------------------------


def make_design(rc: RunConfig, scenario: str, scheme: str, h, n_t, params=None, s=None):
    params = params or rc.params
    rc_p = dataclasses.replace(rc, params=params)
    if scenario == Scenario.P2P:
        lc = _lc(rc_p, n_t)
        fn = {"jtod": lambda: jtod_p2p(h, params, lc, rc.optimizer),
              "zf": lambda: zf_design(h, params, lc), "svd": lambda: svd_design(h, params, lc)}
    elif scenario == Scenario.DOWNLINK:
        lc = _lc(rc_p, None, colored=False)
        s_val = rc.channel.get("s", 0.0) if s is None else s

        def robust():
            model = uncertainty_ball(h, s_val)
            return robust_jtod(model, params, lc, rc.extra.get("outer_iters", 20), rc.optimizer,
                               equalizer=rc.extra.get("robust_equalizer", "wiener"))

        fn = {"jtod": lambda: jtod_downlink(h, params, lc, rc.optimizer),
              "zf": lambda: zf_downlink_design(h, params, lc), "robust": robust}
    elif scenario == Scenario.UPLINK:
        lc = _lc(rc_p, None, colored=False)
        fn = {"jtod": lambda: jtod_uplink(h, params, lc, rc.optimizer, rc.extra.get("uplink_mode", "per_user"))}
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    if scheme not in fn:
        raise ConfigError(f"scheme {scheme!r} not available for {scenario}; choose from {sorted(fn)}")
    return fn[scheme]()


def _meta_lines(meta: dict):
    return ["meta " + json.dumps(meta, sort_keys=True, default=_json_default)]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def write_design(out_dir, design, meta: dict) -> list[Path]:
    """Write ``design_P.txt``, ``design_b.txt``, ``design_G.txt`` and ``design_meta.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comments = _meta_lines(meta)
    files = []
    for name, arr in (("P", design.p), ("b", design.b), ("G", design.g)):
        f = out / f"design_{name}.txt"
        write_matrix(f, arr, comments)
        files.append(f)
    info = {k: v for k, v in design.info.items() if k not in ("trace", "runs")}
    full = dict(meta, status=design.status, info=info,
                link=getattr(design, "link", "p2p"),
                mse=float(design.mse) if isinstance(design, P2PDesign) else design.per_user_mse.tolist())
    f = out / "design_meta.json"
    atomic_write_text(f, json.dumps(full, indent=2, sort_keys=True, default=_json_default) + "\n")
    files.append(f)
    return files


def load_design(out_dir):
    out = Path(out_dir)
    meta = json.loads((out / "design_meta.json").read_text())
    p, b, g = (read_matrix(out / f"design_{n}.txt") for n in ("P", "b", "G"))
    b = b[:, 0]
    link = meta.get("link", "p2p")
    if link == "p2p":
        return P2PDesign(p=p, b=b, g=g, mse=float(meta["mse"]), status=meta["status"]), meta
    if link == "uplink":
        p = p[:, 0]
    else:
        g = g[:, 0]
    return MultiUserDesign(p=p, b=b, g=g, per_user_mse=np.asarray(meta["mse"]), link=link,
                           status=meta["status"]), meta


# ----------------------------------------------------------------------------
# reference values for the fixture cases (printed to two decimals)
# ----------------------------------------------------------------------------


def _kron_i3(m):
    return np.kron(np.eye(3), np.asarray(m, dtype=float))


_CASE2_P = np.zeros((6, 6))
_CASE2_P[0, 5] = _CASE2_P[2, 1] = _CASE2_P[4, 3] = 10 / 3
_CASE2_G = np.zeros((6, 6))
_CASE2_G[1, 2] = _CASE2_G[3, 4] = _CASE2_G[5, 0] = 0.29
_CASE5_P = np.zeros((6, 6))
for _r, _c, _v in ((0, 0, 1.80), (1, 1, 1.54), (2, 3, 1.80), (3, 2, 1.54), (4, 4, 1.80), (5, 5, 1.54)):
    _CASE5_P[_r, _c] = _v

REFERENCE = {
    "case1": {"P": np.diag([1.67] * 6), "b": np.full(6, 5.0), "G": np.diag([0.59] * 6), "tol": 0.02},
    "case2": {"P": _CASE2_P, "b": np.array([10.0, 0, 10, 0, 10, 0]), "G": _CASE2_G, "tol": 0.05},
    "case3": {"P": np.diag([1.77, 1.56] * 3), "b": np.array([5.33, 4.67] * 3),
              "G": _kron_i3([[0.64, -0.32], [-0.18, 0.73]]), "tol": 0.05},
    "case4": {"P": np.diag([1.67] * 6), "b": np.full(6, 5.0),
              "G": np.array([[0.63, 0, -0.03, 0, 0, 0], [0, 0.63, 0, -0.03, 0, 0],
                             [-0.03, 0, 0.67, 0, -0.03, 0], [0, -0.03, 0, 0.67, 0, -0.03],
                             [0, 0, -0.03, 0, 0.63, 0], [0, 0, 0, -0.03, 0, 0.63]]), "tol": 0.02},
    "case5": {"P": _CASE5_P, "b": np.array([5.41, 4.59] * 3),
              "G": np.array([[0.66, -0.33, -0.04, 0.02, 0, 0], [-0.19, 0.77, -0.01, -0.04, 0, 0],
                             [0.01, -0.04, -0.20, 0.82, 0.01, -0.04], [-0.04, 0.02, 0.70, -0.35, -0.04, 0.02],
                             [0, 0, -0.04, 0.02, 0.66, -0.33], [0, 0, 0.01, -0.04, -0.19, 0.77]]), "tol": 0.05},
}


def align_streams(p, g, p_ref):
    """Permute and sign-flip streams (columns of P, rows of G) to best match ``p_ref``."""
    cost = np.abs(np.abs(p)[:, :, None] - np.abs(p_ref)[:, None, :]).sum(axis=0)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(p.shape[1], dtype=int)
    perm[cols] = rows
    p2, g2 = p[:, perm].copy(), g[perm].copy()
    for j in range(p2.shape[1]):
        lead = np.abs(p_ref[:, j]).argmax()
        if np.sign(p2[lead, j]) * np.sign(p_ref[lead, j]) < 0:
            p2[:, j] *= -1
            g2[j] *= -1
    return p2, g2


def _diff_table(name, ours, ref, tol):
    ours, ref = np.atleast_2d(ours), np.atleast_2d(ref)
    delta = np.round(ours, 2) - ref
    lines = [f"{name}: max |delta| = {np.abs(delta).max():.3f} (tolerance {tol})"]
    for o, rr, d in zip(ours, ref, delta):
        lines.append("  " + "  ".join(f"{a:6.2f}/{b:6.2f}/{c:+.2f}" for a, b, c in zip(o, rr, d)))
    return lines, bool(np.abs(delta).max() <= tol + 1e-9)


def cmd_reproduce(args) -> int:
    case = args.case
    if case not in REFERENCE:
        print(f"unknown case {case!r}; choose from {sorted(REFERENCE)}", file=sys.stderr)
        return EXIT_INPUT
    params = SystemParams()
    cfg = OptimizerConfig(seed=args.seed if args.seed is not None else 0)
    ch = case_channel(case)
    lc = lighting_constraints(params, n_t=ch.n_t)
    design = jtod_p2p(ch, params, lc, cfg)
    ref = REFERENCE[case]
    tol = args.tolerance if args.tolerance is not None else ref["tol"]
    p, g = align_streams(design.p, design.g, ref["P"])
    print(f"{case}: MSE {design.mse:.6f}, status {design.status}; entries shown as ours/reference/delta")
    ok = True
    for name, ours, rv in (("P", p, ref["P"]), ("b", design.b[None, :], ref["b"][None, :]), ("G", g, ref["G"])):
        lines, good = _diff_table(name, ours, rv, tol)
        ok &= good
        print("\n".join(lines))
    print("PASS" if ok else "FAIL")
    if args.out:
        write_design(args.out, design, {"case": case, "params": dataclasses.asdict(params),
                                        "optimizer": dataclasses.asdict(cfg)})
    return EXIT_OK if ok else EXIT_TOL


# ----------------------------------------------------------------------------
# other subcommands
# ----------------------------------------------------------------------------


def _apply_overrides(rc: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        rc.optimizer = rc.optimizer.with_(seed=args.seed)
        rc.simulation["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        rc.simulation["n_trials"] = args.trials
    return rc


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_design(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    h, n_t, label = resolve_channel(rc)
    scenario = "downlink" if args.scenario == "robust" else args.scenario
    scheme = "robust" if args.scenario == "robust" else rc.simulation.get("schemes", ("jtod",))[0]
    design = make_design(rc, scenario, scheme, h, n_t)
    meta = dict(rc.as_dict(), scenario=args.scenario, scheme=scheme, case=label)
    files = write_design(_out_dir(args), design, meta)
    summary = design.mse if isinstance(design, P2PDesign) else design.sum_mse
    print(f"{args.scenario} design for {label}: sum MSE {summary:.6g}, status {design.status}")
    if args.scenario == "robust":
        print(f"certified worst-case sum MSE {design.info['certified']:.6g}")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def _sim_settings(rc):
    sim = rc.simulation
    return (sim.get("scenario", "p2p"), sim.get("schemes", ("jtod",)), sim.get("n_trials", 100_000),
            sim.get("seed", 0), sim.get("results", "results.csv"))


def cmd_simulate(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    h, n_t, label = resolve_channel(rc)
    scenario, schemes, n_trials, seed, results = _sim_settings(rc)
    rows = []
    for scheme in schemes:
        design = make_design(rc, scenario, scheme, h, n_t)
        spec = SimSpec(design, h, rc.params, n_trials, seed, scenario, label, scheme,
                       workers=rc.simulation.get("workers", 1))
        res = simulate_ser(spec)
        rows.append(result_row(spec, res))
        print(f"{scheme:>7}: SER {res.ser:.3e}  95% CI [{res.ci_low:.3e}, {res.ci_high:.3e}]  "
              f"sum MSE {analytic_sum_mse(design, h, rc.params, scenario):.6g}")
    path = _out_dir(args) / results
    append_results_csv(path, rows)
    print(f"appended {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    h, n_t, label = resolve_channel(rc)
    scenario, schemes, n_trials, seed, results = _sim_settings(rc)
    axis = rc.simulation.get("axis")
    values = rc.simulation.get("values")
    if not axis or not values:
        raise ConfigError(f"{rc.source}: [simulation] needs 'axis' and 'values' for a sweep")

    def design_fn(scheme, params, v):
        return make_design(rc, scenario, scheme, h, n_t, params=params, s=v if axis == "uncertainty_s" else None)

    sim_channel = None
    if axis == "uncertainty_s":
        def sim_channel(v):
            model = uncertainty_ball(h, v)
            return h + sample_channel_error(model, seed, 1)[0]

    rows = sweep(design_fn, h, rc.params, axis, values, schemes, n_trials, seed, scenario, label, sim_channel)
    for row in rows:
        print(f"{axis}={row['value']:<8g} {row['scheme']:>7}: SER {row['ser']:.3e} "
              f"[{row['ci_low']:.3e}, {row['ci_high']:.3e}] {row['status']}")
    flags = monotonicity_flags(rows, axis)
    for scheme, ok in flags.items():
        print(f"monotone in {axis} ({scheme}): {'yes' if ok else 'NO'}")
    path = _out_dir(args) / results
    append_results_csv(path, rows)
    print(f"appended {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_duality(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    h, _, label = resolve_channel(rc)
    lc = lighting_constraints(rc.params, colored=False)
    ul = jtod_uplink(h, rc.params, lc, rc.optimizer, rc.extra.get("uplink_mode", "per_user"))
    alpha, p_dl, g_dl = duality_map(ul.g, ul.p, h, rc.params)
    b_dl = equal_split_offset(ul.b, h.shape[0])
    dl_sh, ul_sh, gap = shot_duality_gap(ul, h, b_dl, rc.params)
    thermal = rc.params.with_(varsigma2=0.0)
    mse_ul = mse_uplink_full(ul.g, ul.p, ul.b, h, thermal)
    mse_dl = mse_downlink_full(p_dl, b_dl, h, g_dl, thermal)
    print(f"duality on {label}: varsigma2 = {rc.params.varsigma2}, equal-split downlink offset {b_dl[0]:.6g}")
    print(f"{'user':>4} {'alpha':>12} {'MSE_UL(th)':>12} {'MSE_DL(th)':>12} {'shot_DL':>12} {'shot_UL':>12} {'gap':>12}")
    for k in range(h.shape[1]):
        print(f"{k:>4} {alpha[k]:12.6g} {mse_ul[k]:12.6g} {mse_dl[k]:12.6g} {dl_sh[k]:12.6g} {ul_sh[k]:12.6g} "
              f"{gap[k]:12.3e}")
    worst = float(np.abs(gap).max())
    parity = float(np.abs(mse_dl - mse_ul).max())
    if worst < 1e-8 and parity < 1e-8:
        print(f"PASS (max gap {worst:.3e}, thermal MSE parity {parity:.3e})")
        return EXIT_OK
    print(f"FAIL(gap={worst:.6g}; thermal MSE parity {parity:.3e})")
    return EXIT_TOL


def cmd_min_dimming(args) -> int:
    rc = _apply_overrides(load_config(args.config), args)
    h, n_t, label = resolve_channel(rc)
    eps = rc.extra.get("eps_mse")
    if eps is None:
        raise ConfigError(f"{rc.source}: [optimizer] needs 'eps_mse' for min-dimming")
    lc = _lc(rc, n_t)
    beta, design = min_dimming(h, rc.params, lc, eps, rc.optimizer, tol=rc.extra.get("dimming_tol", 1e-3))
    print(f"{label}: minimal dimming level {beta:.4f} for MSE <= {eps:g} (achieved {design.mse:.6g})")
    for bt, m in design.info["beta_grid"]:
        print(f"  beta {bt:.4f}  MSE {m:.6g}")
    if not design.info["monotone"]:
        print("warning: MSE is not monotone in beta on the evaluated grid")
    if args.out:
        write_design(args.out, design, dict(rc.as_dict(), case=label, beta_star=beta))
    return EXIT_OK


# ----------------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vlcjtod", description="Joint transceiver and offset design for VLC.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--tolerance", type=float)

    p = sub.add_parser("reproduce", help="optimize a fixture case and diff against reference values")
    p.add_argument("case", choices=sorted(REFERENCE))
    common(p, config=False)
    p.set_defaults(func=cmd_reproduce)
    p = sub.add_parser("design", help="compute and write a design")
    p.add_argument("scenario", choices=["p2p", "downlink", "uplink", "robust"])
    common(p)
    p.set_defaults(func=cmd_design)
    for name, fn, hlp in (("simulate", cmd_simulate, "Monte-Carlo SER"), ("sweep", cmd_sweep, "SER sweep"),
                          ("duality", cmd_duality, "downlink/uplink duality check"),
                          ("min-dimming", cmd_min_dimming, "minimal dimming level")):
        p = sub.add_parser(name, help=hlp)
        common(p)
        p.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
