"""Command line runner: ``driven-level {trace,adiabatic,audit,fig2} --config FILE --out DIR``.

Exit codes: 0 success, 2 invalid configuration (nothing written),
3 numerical failure (diagnostics on stderr; ``audit`` still writes
``audit.json`` describing the failed checks).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adiabatic import MASK_FRACTION, adiabatic_report, pointwise_joule_deviation
from .config import FORMATS, RUN_KINDS, ScenarioConfig, load_config
from .errors import ConfigError, DrivenLevelError, InvalidParams
from .flux import SCATTERING_MAX_ALPHA, charge_current, energy_flux_reservoir, trace_period
from .model import R_Q
from .scattering import build_smatrix, unitarity_defect

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

TRACE_HEADER = (
    "t_over_period,i_c,w_c,w_t,w_d,w_e,power,q_dot,q_tilde_dot,n_d,res_conservation,res_reactance"
)
SCATTER_HEADER = "i_c_squared,q_dot,q_tilde_dot,v_ac"
INSET_HEADER = "t_over_period,i_c,q_dot,q_tilde_dot,v_ac"

#: Bounds used by the audit (relative to the scale named in each entry).
UNITARITY_BOUND = 1e-6
DUAL_PATH_BOUND = 1e-6
REACTANCE_BOUND = 1e-6


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x) + 0.0, ".17g")  # no "-0"


def _table(header: str, columns) -> str:
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, Path):
            return str(o)
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _columns_json(header: str, columns) -> str:
    names = header.split(",")
    return _json({name: [None if v is None else float(v) for v in col] for name, col in zip(names, columns)})


def _params_dict(p) -> dict:
    return {name: getattr(p, name) for name in p.__dataclass_fields__}


# --- runs -----------------------------------------------------------------


def run_trace(cfg: ScenarioConfig) -> dict[str, str]:
    tr = trace_period(
        cfg.model, cfg.quadrature, n_times=cfg.n_times, pol=cfg.truncation, w_e_path=cfg.w_e_path, threads=cfg.threads
    )
    columns = [
        tr.t_over_period, tr.i_c, tr.w_c, tr.w_t, tr.w_d, tr.w_e, tr.power,
        tr.q_dot, tr.q_tilde_dot, tr.n_d, tr.residual_conservation, tr.residual_reactance,
    ]
    summary = {
        "params": _params_dict(cfg.model),
        "n_times": cfg.n_times,
        "averages": tr.averages,
        "max_abs": {name: float(np.max(np.abs(getattr(tr, name)))) for name in ("i_c", "w_c", "w_t", "w_d", "w_e", "power", "q_dot", "q_tilde_dot")},
        "max_residual_conservation": float(np.max(np.abs(tr.residual_conservation))),
        "max_residual_reactance": float(np.max(np.abs(tr.residual_reactance))),
        "min_q_dot": float(np.min(tr.q_dot)),
        "min_q_tilde_dot": float(np.min(tr.q_tilde_dot)),
        "tail_estimates": tr.tails,
        "w_e_source": tr.w_e_source,
        "checks": tr.checks(),
    }
    files = {"summary.json": _json(summary)}
    if cfg.output_format == "csv":
        files["trace.csv"] = _table(TRACE_HEADER, columns)
    else:
        files["trace.json"] = _columns_json(TRACE_HEADER, columns)
    return files


def run_fig2(cfg: ScenarioConfig) -> dict[str, str]:
    scatter = [[], [], [], []]
    inset = [[], [], [], [], []]
    fits = {}
    for v in cfg.amplitudes:
        p = cfg.model.replace(v_ac=v)
        tr = trace_period(p, cfg.quadrature, n_times=cfg.n_times, pol=cfg.truncation, w_e_path="identity", threads=cfg.threads)
        rep = adiabatic_report(p, cfg.quadrature, trace=tr)
        n = tr.times.size
        for col, vals in zip(scatter, (tr.i_c**2, tr.q_dot, tr.q_tilde_dot, np.full(n, v))):
            col.extend(vals)
        for col, vals in zip(inset, (tr.t_over_period, tr.i_c, tr.q_dot, tr.q_tilde_dot, np.full(n, v))):
            col.extend(vals)
        fits[_fmt(v)] = {
            "slope": rep.fit.slope,
            "intercept": rep.fit.intercept,
            "max_residual": rep.fit.max_residual,
            "relative_deviation": rep.fit.relative_deviation,
            "pointwise_deviation": pointwise_joule_deviation(tr.q_dot, tr.i_c),
            "min_q_dot": float(np.min(tr.q_dot)),
            "min_q_tilde_dot": float(np.min(tr.q_tilde_dot)),
        }
    fit = {
        "R_q": R_Q,
        "branches": fits,
        "slope": [fits[k]["slope"] for k in fits],
        "relative_deviation": max(fits[k]["relative_deviation"] for k in fits),
        "params": _params_dict(cfg.model),
        "amplitudes": list(cfg.amplitudes),
    }
    files = {"fit.json": _json(fit)}
    if cfg.output_format == "csv":
        files["fig2_scatter.csv"] = _table(SCATTER_HEADER, scatter)
        files["fig2_inset.csv"] = _table(INSET_HEADER, inset)
    else:
        files["fig2_scatter.json"] = _columns_json(SCATTER_HEADER, scatter)
        files["fig2_inset.json"] = _columns_json(INSET_HEADER, inset)
    return files


def run_adiabatic(cfg: ScenarioConfig) -> dict[str, str]:
    p = cfg.model
    tr = trace_period(p, cfg.quadrature, n_times=cfg.n_times, pol=cfg.truncation, w_e_path="identity", threads=cfg.threads)
    rep = adiabatic_report(p, cfg.quadrature, trace=tr)
    r_col = [x if ok else None for x, ok in zip(rep.r_tilde, rep.r_tilde_valid)]
    names = ("t_over_period",) + rep.COLUMNS + ("r_tilde",)
    columns = [tr.t_over_period] + [getattr(rep, c) for c in rep.COLUMNS] + [r_col]
    valid = rep.r_tilde[rep.r_tilde_valid]
    summary = {
        "params": _params_dict(p),
        "r_fit": rep.r_fit,
        "R_q": R_Q,
        "fit": {
            "slope": rep.fit.slope,
            "intercept": rep.fit.intercept,
            "max_residual": rep.fit.max_residual,
            "relative_deviation": rep.fit.relative_deviation,
        },
        "pointwise_deviation": pointwise_joule_deviation(tr.q_dot, tr.i_c),
        "r_tilde": {
            "min": float(valid.min()) if valid.size else None,
            "max": float(valid.max()) if valid.size else None,
            "median_abs": float(np.median(np.abs(valid))) if valid.size else None,
            "masked_points": int(np.count_nonzero(~rep.r_tilde_valid)),
            "mask_fraction": MASK_FRACTION,
        },
    }
    header = ",".join(names)
    files = {"adiabatic.json": _json(summary)}
    if cfg.output_format == "csv":
        files["adiabatic.csv"] = _table(header, columns)
    else:
        files["adiabatic_series.json"] = _columns_json(header, columns)
    return files


def _entry(residual, bound, message=""):
    status = "pass" if residual <= bound else "fail"
    return {"status": status, "residual": float(residual), "bound": float(bound), "message": message}


def _failed(message):
    return {"status": "fail", "residual": None, "bound": None, "message": message}


def _skipped(message):
    return {"status": "skipped", "residual": None, "bound": None, "message": message}


def run_audit(cfg: ScenarioConfig) -> tuple[dict[str, str], bool]:
    p, quad, pol = cfg.model, cfg.quadrature, cfg.truncation
    audits = {}
    moderate = p.alpha <= SCATTERING_MAX_ALPHA
    try:
        tr = trace_period(p, quad, n_times=cfg.n_times, pol=pol, w_e_path=cfg.w_e_path, threads=cfg.threads, validate=False)
    except DrivenLevelError as exc:
        tr = None
        msg = f"trace failed: {type(exc).__name__}: {exc}"
        for name in ("conservation", "reactance", "mean_w_t", "mean_q_dot_vs_power", "mean_q_dot_vs_q_tilde_dot"):
            audits[name] = _failed(msg)
    if tr is not None:
        checks = tr.checks(REACTANCE_BOUND)
        for name in ("conservation", "mean_w_t", "mean_q_dot_vs_power", "mean_q_dot_vs_q_tilde_dot"):
            audits[name] = _entry(checks[name]["residual"], checks[name]["bound"])
        if tr.w_e_source == "scattering":
            audits["reactance"] = _entry(checks["reactance"]["residual"], checks["reactance"]["bound"])
        else:
            audits["reactance"] = _skipped("W_E taken as W_C + W_T/2 (drive ratio too large for the S matrix)")

    if not moderate:
        reason = f"drive ratio {p.alpha:g} above {SCATTERING_MAX_ALPHA:g}"
        for name in ("unitarity", "dual_path_w_c", "dual_path_i_c"):
            audits[name] = _skipped(reason)
    else:
        from .green import harmonics

        try:
            s = build_smatrix(harmonics(p, pol))
            audits["unitarity"] = _entry(unitarity_defect(s), UNITARITY_BOUND)
        except DrivenLevelError as exc:
            audits["unitarity"] = _failed(f"unitarity check failed: {type(exc).__name__}: {exc}")
        t = p.period * np.arange(cfg.n_times) / cfg.n_times
        for name, func in (("dual_path_w_c", energy_flux_reservoir), ("dual_path_i_c", charge_current)):
            try:
                a = np.asarray(func(t, p, quad, pol, path="time"))
                b = np.asarray(func(t, p, quad, pol, path="harmonic"))
                scale = float(np.max(np.abs(a)))
                audits[name] = _entry(float(np.max(np.abs(a - b))), DUAL_PATH_BOUND * scale)
            except DrivenLevelError as exc:
                audits[name] = _failed(f"{type(exc).__name__}: {exc}")

    ok = all(a["status"] != "fail" for a in audits.values())
    report = {"params": _params_dict(p), "passed": ok, "audits": audits}
    return {"audit.json": _json(report)}, ok


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driven-level", description="Fluxes of a harmonically driven resonant level.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=RUN_KINDS)
    parser.add_argument("--config", help="INI scenario file (defaults reproduce the slow-driving scenario)")
    parser.add_argument("--out", help="output directory (overrides [output] directory)")
    parser.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    parser.add_argument("--format", choices=FORMATS, help="format of tabular outputs")
    return parser


def _write(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out_dir / name).write_text(files[name])


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        cfg = load_config(args.config) if args.config else ScenarioConfig()
        cfg = cfg.with_overrides(run=args.command, out=args.out, threads=args.threads, fmt=args.format)
    except (ConfigError, InvalidParams) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runners = {"trace": run_trace, "fig2": run_fig2, "adiabatic": run_adiabatic}
    try:
        if cfg.run == "audit":
            files, ok = run_audit(cfg)
        else:
            files, ok = runners[cfg.run](cfg), True
    except DrivenLevelError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    _write(cfg.output_dir, files)
    if not ok:
        print(f"audit failed; see {cfg.output_dir / 'audit.json'}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
