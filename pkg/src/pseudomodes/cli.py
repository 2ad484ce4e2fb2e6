"""Command-line front end.

Usage: ``pseudomodes <command> --config cfg.json --output outdir``.  Every
command writes ``report.json`` (data and every numeric setting used), optional
CSV time series, and ``run_metadata.json`` with timing and versions.  Exit
status is 0 on success, 2 when a verification check fails and 1 on malformed
input or numerical errors.
"""
from __future__ import annotations

import argparse
import platform
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bath_models import CorrelationSeries, sample_correlation
from .config import (
    ConfigError,
    load_json,
    parse_grid,
    parse_model,
    parse_operator,
    parse_request,
    parse_spectral_density,
    parse_system,
    require,
    to_jsonable,
    write_csv,
    write_json,
)
from .exp_fitting import matrix_pencil_fit, to_pseudomodes
from .gkls_model import FreeBath, wick_four_point_check
from .oracles.dilation import refinement_ladder, verify_lemma1, verify_lemma2
from .oracles.theorem import HYPOTHESIS_TOL, SAFETY_FACTOR, verify_theorem
from .propagation import (
    PropagatorCache,
    dipole_correlation,
    multitime_gkls,
    spectrum_from_correlation,
    state_trajectory,
)

COMMANDS = ("fit-bath", "simulate", "multitime", "verify-lemma1", "verify-lemma2",
            "verify-theorem", "spectrum", "wick-check")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class _Run:
    def __init__(self, cfg: dict, base: Path, out: Path, threads: int, seed: int):
        self.cfg = cfg
        self.base = base
        self.out = out
        self.threads = threads
        self.seed = seed
        self.settings: dict = {}

    def setting(self, key, default):
        """Config value with default; every value used is echoed into the report."""
        val = self.cfg.get(key, default)
        self.settings[key] = val
        return val


def _strip_runtime(x, sink: dict, path: str = ""):
    if isinstance(x, dict):
        out = {}
        for k, v in x.items():
            if k == "runtime_s":
                sink[path or "total"] = v
            else:
                out[k] = _strip_runtime(v, sink, f"{path}.{k}" if path else k)
        return out
    if isinstance(x, list):
        return [_strip_runtime(v, sink, f"{path}[{i}]") for i, v in enumerate(x)]
    return x


def cmd_fit_bath(run: _Run):
    if "correlation_csv" in run.cfg:
        series = CorrelationSeries.from_csv(run.base / run.cfg["correlation_csv"])
    else:
        sd = parse_spectral_density(require(run.cfg, "spectral_density"), run.base)
        dt = float(run.setting("dt", 0.05))
        n = int(run.setting("samples", 401))
        series = sample_correlation(sd, dt * np.arange(n))
    order = int(require(run.cfg, "order"))
    n_max = int(run.setting("n_max", 4))
    es, rep = matrix_pencil_fit(series, order)
    fitted = es(series.grid)
    report = {"fit": es.to_dict(), "report": rep.__dict__, "order": order}
    try:
        params = to_pseudomodes(es, n_max=n_max)
        report["pseudomodes"] = [{"omega": m.omega, "gamma": m.gamma, "n_max": m.n_max, "g": g}
                                 for m, g in zip(params.modes, params.coupling(0))]
    except ValueError as exc:
        report["pseudomodes"] = None
        report["pseudomode_error"] = str(exc)
    write_csv(run.out / "correlation.csv", ["t", "re_c", "im_c", "re_fit", "im_fit"],
              zip(series.grid, series.values.real, series.values.imag, fitted.real, fitted.imag))
    return report, True


def cmd_simulate(run: _Run):
    m = parse_model(run.cfg)
    times = parse_grid(require(run.cfg, "times"), "times")
    traj = state_trajectory(m, times)
    d = m.system.dim
    header = ["t"] + [f"{part}_rho_{i}{j}" for i in range(d) for j in range(d) for part in ("re", "im")]
    rows = [[t] + [v for z in rho.ravel() for v in (z.real, z.imag)] for t, rho in zip(times, traj)]
    write_csv(run.out / "trajectory.csv", header, rows)
    return {"times": times, "final_state": traj[-1], "layout": m.layout.labels}, True


def cmd_multitime(run: _Run):
    m = parse_model(run.cfg)
    reqs = [parse_request(r, m.system.dim, f"requests[{i}]") for i, r in enumerate(require(run.cfg, "requests"))]
    cache = PropagatorCache(m)
    with ThreadPoolExecutor(max_workers=max(1, run.threads)) as pool:
        values = list(pool.map(lambda r: multitime_gkls(m, r, cache), reqs))
    write_csv(run.out / "multitime.csv", ["index", "re", "im"],
              [(i, v.real, v.imag) for i, v in enumerate(values)])
    return {"values": values, "count": len(values)}, True


def _ladder(run: _Run):
    dil = require(run.cfg, "dilation")
    ladder = require(dil, "ladder", "dilation")
    levels = []
    for i, lv in enumerate(ladder):
        if isinstance(lv, (int, float)):
            levels.append((float(require(dil, "halfwidth", "dilation")), int(lv)))
        elif isinstance(lv, list) and len(lv) == 2:
            levels.append((float(lv[0]), int(lv[1])))
        else:
            raise ConfigError(f"dilation.ladder[{i}] must be M or [halfwidth, M]")
    opts = {"n_max_tilde": int(dil.get("n_max_tilde", 2)), "budget": dil.get("budget", 1)}
    run.settings["dilation"] = {"ladder": [list(x) for x in levels], **opts}
    return levels, opts


def cmd_verify_lemma1(run: _Run):
    m = parse_model(run.cfg)
    levels, opts = _ladder(run)
    times = parse_grid(require(run.cfg, "times"), "times")
    threshold = float(run.setting("threshold", 2e-2))
    res = refinement_ladder(verify_lemma1, m, levels, "max_trace_distance", times=times, **opts)
    ok = res["monotone"] and res["values"][-1] < threshold
    return {**res, "threshold": threshold, "passed": ok}, ok


def cmd_verify_lemma2(run: _Run):
    m = parse_model(run.cfg)
    levels, opts = _ladder(run)
    t_grid = parse_grid(require(run.cfg, "t_grid"), "t_grid")
    s_values = [float(s) for s in run.setting("s_values", [0.0])]
    channels = tuple(int(c) for c in run.setting("channels", [0, 0]))
    threshold = float(run.setting("threshold", 2e-2))
    pairs = [(float(t), s) for s in s_values for t in t_grid]
    res = refinement_ladder(verify_lemma2, m, levels, "sup_difference", pairs=pairs, channels=channels, **opts)
    ok = res["monotone"] and res["values"][-1] < threshold
    return {**res, "threshold": threshold, "passed": ok}, ok


def cmd_verify_theorem(run: _Run):
    sd = parse_spectral_density(require(run.cfg, "spectral_density"), run.base)
    system = parse_system(require(run.cfg, "system"))
    req = parse_request(require(run.cfg, "request"), system.dim)
    disc = require(run.cfg, "discretization")
    kwargs = {
        "fit_dt": float(run.setting("fit_dt", 0.05)),
        "fit_samples": int(run.setting("fit_samples", 401)),
        "pseudomode_n_max": int(run.setting("pseudomode_n_max", 8)),
        "gamma_scale": float(run.setting("gamma_scale", 1.0)),
        "safety_factor": float(run.setting("safety_factor", SAFETY_FACTOR)),
        "oracle_n_max": int(disc.get("n_max", 4)),
        "budget": disc.get("budget", 1),
        "min_mass_fraction": float(disc.get("min_mass_fraction", 1 - 1e-3)),
    }
    hyp_tol = float(run.setting("hypothesis_tol", HYPOTHESIS_TOL))
    window = tuple(float(x) for x in require(disc, "window", "discretization"))
    M = int(require(disc, "M", "discretization"))
    order = int(require(run.cfg, "order"))
    rep = verify_theorem(sd, order, req, system, window, M, **kwargs)
    rep["hypothesis_tol"] = hyp_tol
    rep["hypothesis_satisfied"] = bool(rep["hypothesis_residual"] <= hyp_tol)
    ok = rep["hypothesis_satisfied"] and rep["consistent"]
    return {**rep, "passed": ok}, ok


def cmd_spectrum(run: _Run):
    m = parse_model(run.cfg)
    dipole = parse_operator(require(run.cfg, "dipole"), m.system.dim, "dipole")
    t_ss = float(run.setting("t_ss", 0.0))
    tau_cfg = require(run.cfg, "tau")
    tau = float(require(tau_cfg, "dt", "tau")) * np.arange(int(require(tau_cfg, "samples", "tau")))
    freqs = parse_grid(require(run.cfg, "frequencies"), "frequencies")
    cache = PropagatorCache(m)
    corr = dipole_correlation(m, dipole, t_ss, tau, cache)
    spec = spectrum_from_correlation(corr, tau, freqs)
    write_csv(run.out / "correlation.csv", ["tau", "re", "im"], zip(tau, corr.real, corr.imag))
    write_csv(run.out / "spectrum.csv", ["omega", "s"], zip(freqs, spec))
    peak = int(np.argmax(spec))
    return {"peak_frequency": freqs[peak], "peak_value": spec[peak], "t_ss": t_ss}, True


def cmd_wick_check(run: _Run):
    m = parse_model(run.cfg)
    channel = int(run.setting("channel", 0))
    tol = float(run.setting("tolerance", 1e-8))
    if "quadruples" in run.cfg:
        quads = [sorted(float(x) for x in q) for q in run.cfg["quadruples"]]
    else:
        rng = np.random.default_rng(run.seed)
        n = int(run.setting("random", 20))
        t_max = float(run.setting("t_max", 5.0))
        quads = [sorted(rng.uniform(0, t_max, 4).tolist()) for _ in range(n)]
    fb = FreeBath(m)
    rows, worst = [], 0.0
    for q in quads:
        lhs, rhs = wick_four_point_check(m, channel, q, fb)
        worst = max(worst, abs(lhs - rhs))
        rows.append({"times": q, "lhs": lhs, "rhs": rhs, "difference": abs(lhs - rhs)})
    ok = worst <= tol
    return {"checks": rows, "max_difference": worst, "tolerance": tol, "seed": run.seed, "passed": ok}, ok


HANDLERS = {
    "fit-bath": cmd_fit_bath,
    "simulate": cmd_simulate,
    "multitime": cmd_multitime,
    "verify-lemma1": cmd_verify_lemma1,
    "verify-lemma2": cmd_verify_lemma2,
    "verify-theorem": cmd_verify_theorem,
    "spectrum": cmd_spectrum,
    "wick-check": cmd_wick_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudomodes", description="Pseudomode open-system toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for batch requests")
    p.add_argument("--seed", type=int, default=0, help="seed for randomly drawn test points")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.output)
    t0 = time.perf_counter()
    caught: list[str] = []
    try:
        cfg_path = Path(args.config)
        cfg = load_json(cfg_path)
        out.mkdir(parents=True, exist_ok=True)
        r = _Run(cfg, cfg_path.parent, out, args.threads, args.seed)
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always")
            report, ok = HANDLERS[args.command](r)
        caught = sorted({f"{w.category.__name__}: {w.message}" for w in wlist})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, ArithmeticError, OSError, KeyError) as exc:
        print(f"error in {args.command} ({type(exc).__module__}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_ERROR

    timings: dict = {}
    report = _strip_runtime(to_jsonable(report), timings)
    write_json(out / "report.json", {"command": args.command, "settings": r.settings, "result": report,
                                     "warnings": caught})
    write_json(out / "run_metadata.json", {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_time_s": time.perf_counter() - t0,
        "timings_s": timings,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "threads": args.threads,
        "seed": args.seed,
        "config": str(Path(args.config).resolve()),
    })
    for w in caught:
        print(f"warning: {w}", file=sys.stderr)
    status = "passed" if ok else "FAILED"
    print(f"{args.command}: {status} (report in {out / 'report.json'})")
    return EXIT_OK if ok else EXIT_FAILED


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
