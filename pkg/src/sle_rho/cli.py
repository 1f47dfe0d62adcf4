"""Command-line front end: ``sle-rho <command> --config FILE [--seed N] [--threads K] [--out DIR]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 invalid configuration,
3 the run itself raised (domain, window or quadrature errors).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .cft import (
    all_rho,
    central_charge,
    charge_ledger,
    delta_from_rho,
    free_field_bc,
    kac_weight,
    rho_infinity,
)
from .chordal import run_path, trace_points
from .config import COMMANDS, RunConfig, config_from_dict, content_hash, parse_config
from .ensemble import run_chordal_ensemble
from .errors import ConfigError, SleError
from .io import write_band_svg, write_csv, write_curve_svg, write_json
from .observables import (
    F_observable,
    QuadratureSpec,
    left_passage_mc,
    martingale_check,
    raw_h_observable,
    side_probabilities,
    tilted_point_observable,
)
from .rng import fresh_seed
from .strip import chordal_to_strip, strip_from_increments
from .virasoro import det_zeros, gram_matrix, null_vector_residual, weight_table

STRIP_HORIZON = 2000.0
CHORDAL_HORIZON = 1.0
LEDGER_TOL = 1e-12
NULL_TOL = 1e-10
ZERO_TOL = 1e-8


@dataclass
class RunResult:
    exit_code: int
    verdicts: dict
    outputs: list
    summary: dict
    manifest: dict = field(default_factory=dict)


def _points(pairs):
    return [complex(a, b) for a, b in pairs]


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg.output.formats


# ---------------------------------------------------------------------------
# commands; each returns (verdicts, summary, outputs)


def _cmd_weights(cfg, out, threads):
    p = cfg.params.to_params()
    rhos = all_rho(p)
    ledger = charge_ledger(p)
    bc = free_field_bc(p)
    labels = [f"x{j + 1}" for j in range(p.n)] + ["inf"]
    summary = {
        "central_charge": central_charge(p.kappa),
        "h12": kac_weight(1, 2, p.kappa),
        "rho_infinity": rho_infinity(p),
        "deltas": dict(zip(labels, [delta_from_rho(r, p.kappa) for r in rhos])),
        "ledger": {
            "background": ledger.background,
            "interface": ledger.interface,
            "boundary": dict(zip(labels, ledger.boundary)),
            "total": ledger.total,
        },
        "free_field": {
            "coupling_g": bc.coupling_g,
            "angles": dict(zip(labels, bc.angles)),
            "jumps": dict(zip(labels, bc.jumps)),
            "critical_jump": bc.critical_jump,
            "total_angle": bc.total_angle,
        },
    }
    outputs = []
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "weights.json", summary))
    if _wants(cfg, "csv"):
        rows = [
            (lab, r, d, q, a)
            for lab, r, d, q, a in zip(labels, rhos, summary["deltas"].values(), ledger.boundary, bc.angles)
        ]
        outputs.append(write_csv(out / "weights.csv", ["point", "rho", "delta", "charge", "angle"], rows))
    return {"charge_neutrality": abs(ledger.total) < LEDGER_TOL}, summary, outputs


def _cmd_simulate(cfg, out, threads):
    p = cfg.params.to_params()
    num, mc = cfg.numerics, cfg.mc
    horizon = num.horizon or CHORDAL_HORIZON
    slices = mc.slice_times or np.linspace(0.0, horizon, num.n_samples).tolist()
    ens = run_chordal_ensemble(p, slices, max(mc.n_paths, 1), mc.seed, num.dt, guard=num.guard, threads=threads)
    summary = {
        "n_paths": int(ens.xi.shape[0]),
        "status_counts": {k: int((ens.status == v).sum()) for k, v in (("horizon", 0), ("collision", 1), ("budget", 2))},
        "mean_steps": float(ens.nsteps.mean()),
        "xi_final_mean": float(ens.xi[:, -1].mean()),
    }
    outputs = []
    if _wants(cfg, "csv"):
        header = ["path", "t", "xi"] + [f"X{j + 1}" for j in range(p.n)] + [f"Xprime{j + 1}" for j in range(p.n)]
        rows = (
            [i, t, ens.xi[i, k], *ens.X[i, k], *ens.Xprime[i, k]]
            for i in range(ens.xi.shape[0])
            for k, t in enumerate(ens.slice_times)
        )
        outputs.append(write_csv(out / "simulate.csv", header, rows))
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "simulate.json", {**summary, "t_stop": ens.t_stop, "status": ens.status}))
    return {}, summary, outputs


def _cmd_trace(cfg, out, threads):
    p = cfg.params.to_params()
    num = cfg.numerics
    horizon = num.horizon or CHORDAL_HORIZON
    state, path = run_path(p, horizon, cfg.mc.seed, num.dt, guard=num.guard)
    times = np.linspace(0.0, path.times[-1], num.n_samples)
    tr = trace_points(path, times, tip_offset=num.tip_offset)
    summary = {"t_end": float(path.times[-1]), "stopped": state.stopped, "stop_reason": state.stop_reason,
               "n_steps": len(path.steps), "tip_offset": tr.tip_offset}
    outputs = []
    if _wants(cfg, "csv"):
        rows = ((t, z.real, z.imag) for t, z in zip(tr.times, tr.points))
        outputs.append(write_csv(out / "trace.csv", ["t", "re", "im"], rows))
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "trace.json", summary))
    if _wants(cfg, "svg"):
        outputs.append(write_curve_svg(out / "trace.svg", tr.points, title=f"kappa = {p.kappa}"))
    return {}, summary, outputs


def _cmd_lpp(cfg, out, threads):
    p = cfg.params.to_params()
    num, mc = cfg.numerics, cfg.mc
    spec = QuadratureSpec.from_params(p, rel_tol=num.rel_tol)
    pts = _points(cfg.lpp.points)
    sides = [side_probabilities(w, spec) for w in pts]
    summary = {
        "points": pts,
        "p_left": [s.left for s in sides],
        "p_right": [s.right for s in sides],
        "p_swallowed": [s.swallowed for s in sides],
    }
    verdicts = {}
    report = None
    if mc.n_paths > 0:
        report = left_passage_mc(p, pts, mc.n_paths, mc.seed, ds=num.dt, L=num.L, guard=num.strip_guard,
                                 horizon=num.horizon or STRIP_HORIZON, threads=threads, spec=spec)
        summary["monte_carlo"] = report.to_dict()
        verdicts["mc_within_se"] = report.passed(cfg.lpp.n_se)
    outputs = []
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "lpp.json", summary))
    if _wants(cfg, "csv"):
        header = ["re", "im", "p_left", "p_right", "p_swallowed"]
        if report:
            header += ["freq_left", "se_left", "freq_right", "freq_swallowed", "freq_undecided", "z"]
        rows = []
        for i, (w, s) in enumerate(zip(pts, sides)):
            row = [w.real, w.imag, s.left, s.right, s.swallowed]
            if report:
                row += [report.freq_left[i], report.se_left[i], report.freq_right[i],
                        report.freq_swallowed[i], report.freq_undecided[i], report.z_scores[i]]
            rows.append(row)
        outputs.append(write_csv(out / "lpp.csv", header, rows))
    return verdicts, summary, outputs


def _cmd_martingale(cfg, out, threads):
    p = cfg.params.to_params()
    num, mc, opt = cfg.numerics, cfg.mc, cfg.martingale
    kw = dict(threshold=opt.threshold, policy=opt.policy, threads=threads)
    if opt.mode == "strip":
        horizon = num.horizon or 2.0
        w = complex(*opt.point)
        if opt.observable in ("F_re", "F_im"):
            obs = F_observable(QuadratureSpec.from_params(p, rel_tol=num.rel_tol), opt.observable[-2:])
        elif opt.observable in ("h_re", "h_im"):
            obs = raw_h_observable(opt.observable[-2:])
        elif opt.observable == "one":
            obs = lambda b: np.ones(len(b.h))
        else:
            raise ConfigError("martingale.observable 'tilted' requires martingale.mode 'chordal'")
        kw.update(w_points=[w], ds=num.dt, guard=num.strip_guard, L=num.L)
        sim = p
    else:
        horizon = num.horizon or CHORDAL_HORIZON
        if opt.observable == "tilted":
            sim, obs = tilted_point_observable(p, opt.y, opt.rho_y)
        elif opt.observable == "one":
            sim, obs = p, (lambda b: np.ones(len(b.xi)))
        else:
            raise ConfigError(f"martingale.observable {opt.observable!r} requires martingale.mode 'strip'")
        kw.update(ds=num.dt, guard=num.guard)
    slices = mc.slice_times or np.linspace(0.0, horizon, 6).tolist()
    rep = martingale_check(obs, sim, slices, mc.n_paths, mc.seed, mode=opt.mode, **kw)
    summary = json.loads(rep.to_json())
    summary["observable"] = opt.observable
    outputs = []
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "martingale.json", summary))
    if _wants(cfg, "csv"):
        rows = zip(rep.slice_times, rep.means, rep.std_errors, rep.deviations, rep.counts)
        outputs.append(write_csv(out / "martingale.csv", ["slice", "mean", "se", "deviation", "count"], rows))
    if _wants(cfg, "svg"):
        outputs.append(write_band_svg(out / "martingale.svg", rep.slice_times, rep.means, rep.std_errors,
                                      title=opt.observable))
    return {"constancy": rep.passed}, summary, outputs


def _cmd_virasoro(cfg, out, threads):
    k = cfg.params.kappa
    res = null_vector_residual(k)
    zeros = det_zeros(k)
    h12, h21 = kac_weight(1, 2, k), kac_weight(2, 1, k)
    c = central_charge(k)
    summary = {
        "central_charge": c,
        "h12": h12,
        "h21": h21,
        "null_vector": res.to_dict(),
        "gram_level2": gram_matrix(c, h12, 2),
        "det_zeros": zeros,
        "weight_table": weight_table(k, 3, 3),
    }
    near = lambda h: any(abs(z - h) < ZERO_TOL for z in zeros)
    verdicts = {
        "residual": res.residual < NULL_TOL,
        "relative_det": res.relative_det < NULL_TOL,
        "kac_zeros": near(h12) and near(h21),
    }
    outputs = []
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "virasoro.json", summary))
    if _wants(cfg, "csv"):
        tab = summary["weight_table"]
        rows = ([r + 1, s + 1, tab[r, s]] for r in range(tab.shape[0]) for s in range(tab.shape[1]))
        outputs.append(write_csv(out / "kac_table.csv", ["r", "s", "h"], rows))
    return verdicts, summary, outputs


def _cmd_strip_compare(cfg, out, threads):
    p = cfg.params.to_params()
    num, mc = cfg.numerics, cfg.mc
    horizon = num.horizon or 0.25
    pts = _points(cfg.strip_compare.points)
    devs, rows = [], []
    for i in range(max(mc.n_paths, 1)):
        _, path = run_path(p, horizon, mc.seed, num.dt, guard=num.guard, path_index=i)
        a = chordal_to_strip(path, p, pts)
        s, b = strip_from_increments(path, p, pts)
        devs.append(float(np.abs(a - b).max()))
        if i == 0:
            for k in range(len(s)):
                rows.append([path.times[k], s[k]] + [v for j in range(len(pts)) for v in (a[k, j].real, a[k, j].imag, b[k, j].real, b[k, j].imag)])
    bound = cfg.strip_compare.C * math.sqrt(num.dt)
    summary = {"max_deviation": max(devs), "deviations": devs, "bound": bound, "C": cfg.strip_compare.C,
               "ratio_to_sqrt_dt": max(devs) / math.sqrt(num.dt)}
    outputs = []
    if _wants(cfg, "json"):
        outputs.append(write_json(out / "strip_compare.json", summary))
    if _wants(cfg, "csv"):
        header = ["t", "s"] + [f"{k}{j}" for j in range(len(pts)) for k in ("chordal_re", "chordal_im", "strip_re", "strip_im")]
        outputs.append(write_csv(out / "strip_compare.csv", header, rows))
    return {"within_bound": max(devs) < bound}, summary, outputs


_DISPATCH = {
    "weights": _cmd_weights,
    "simulate": _cmd_simulate,
    "trace": _cmd_trace,
    "lpp": _cmd_lpp,
    "martingale": _cmd_martingale,
    "virasoro-check": _cmd_virasoro,
    "strip-compare": _cmd_strip_compare,
}


def run(cfg: RunConfig, threads: Optional[int] = None) -> RunResult:
    """Execute ``cfg`` and write artifacts plus ``manifest.json`` into the output directory."""
    if cfg.mc.seed is None:
        cfg = cfg.model_copy(update={"mc": cfg.mc.model_copy(update={"seed": fresh_seed()})})
    threads = threads or cfg.mc.threads
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        verdicts, summary, outputs = _DISPATCH[cfg.command](cfg, out, threads)
    except (SleError, ConfigError) as exc:
        failure = {"status": "error", "kind": type(exc).__name__, "message": str(exc), "command": cfg.command}
        write_json(out / "failure.json", failure)
        return RunResult(2 if isinstance(exc, ConfigError) else 3, {}, [], failure)
    wall = time.perf_counter() - t0
    passed = all(verdicts.values())
    manifest = {
        "manifest": {
            "schema_version": cfg.schema_version,
            "package_version": __version__,
            "command": cfg.command,
            "seed": cfg.mc.seed,
            "input_sha256": content_hash(cfg),
            "wall_time_s": wall,
            "outputs": sorted(Path(o).name for o in outputs),
            "verdicts": verdicts,
            "passed": passed,
        },
        "config": cfg.model_dump(mode="json"),
    }
    write_json(out / "manifest.json", manifest)
    if not passed:
        write_json(out / "failure.json", {"status": "fail", "command": cfg.command, "verdicts": verdicts})
    return RunResult(0 if passed else 1, verdicts, outputs, summary, manifest)


def _print_summary(command: str, res: RunResult):
    s = res.summary
    if command == "weights" and res.exit_code in (0, 1):
        for lab, d in s["deltas"].items():
            print(f"delta[{lab}] = {d:.12g}")
        print(f"rho_infinity = {s['rho_infinity']:.12g}")
        print(f"ledger sum = {s['ledger']['total']:.3g}")
        print("angles = " + ", ".join(f"{a:.12g}" for a in s["free_field"]["angles"].values()))
    status = {0: "pass", 1: "fail"}.get(res.exit_code, "error")
    print(json.dumps({"status": status, "verdicts": res.verdicts}, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sle-rho", description="SLE(kappa; rho) numerical experiments")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config or a previous manifest.json")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
        doc = cfg.model_dump()
        doc["command"] = args.command
        if args.seed is not None:
            doc["mc"]["seed"] = args.seed
        if args.out is not None:
            doc["output"]["directory"] = args.out
        cfg = config_from_dict(doc)
    except (OSError, ConfigError) as exc:
        print(json.dumps({"status": "error", "kind": "config", "message": str(exc)}))
        return 2
    res = run(cfg, threads=args.threads)
    if res.exit_code >= 2:
        print(json.dumps(res.summary, sort_keys=True))
        return res.exit_code
    _print_summary(args.command, res)
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
