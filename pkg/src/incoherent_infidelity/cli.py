"""Command-line experiment runner.

Subcommands ``ghz``, ``cnot-average``, ``irb`` and ``bounds`` each read a
config file and write plot-ready CSV files plus a ``manifest.json`` into the
output directory.  Exit status is 0 on success, 2 for configuration errors and
3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .bounds import compute_bounds, verify_bounds
from .circuits import ErrorParams, cnot_circuit, ghz_circuit
from .config import SCHEMA_VERSION, ExperimentConfig, load_config
from .estimator import (
    clifford_averaged_estimate,
    cycle_superoperator,
    estimate_series,
    exact_incoherent_infidelity,
)
from .exceptions import ConfigError, FitError, NumericalError
from .irb import RbConfig, run_interleaved
from .liouville import ground_state_vector
from .spam import FiducialSpec, PovmSpec, SpamModel

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
SUBCOMMANDS = {"ghz": "ghz_infidelity", "cnot-average": "cnot_average", "irb": "irb", "bounds": "bounds"}


def _params(cfg: ExperimentConfig, eta_T: float | None = None) -> ErrorParams:
    return ErrorParams.from_products(cfg.eta_T if eta_T is None else eta_T, cfg.xi_T,
                                     cfg.theta, cfg.noise_weights)


def _spam(cfg: ExperimentConfig) -> SpamModel | None:
    if cfg.spam is None:
        return None
    return SpamModel(FiducialSpec.uniform(*cfg.spam.fiducial_angles), PovmSpec(cfg.spam.povm))


def _rb_config(cfg: ExperimentConfig) -> RbConfig:
    return RbConfig(cfg.irb.lengths, cfg.irb.samples_per_length, cfg.irb.shots)


def _csv(rows: list, header: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _rel(est: float, ref: float) -> float:
    return abs(est - ref) / ref if ref else (0.0 if est == 0 else float("inf"))


def run_ghz(cfg: ExperimentConfig) -> dict:
    """Per-order estimates for the GHZ preparation circuit against the exact oracle."""
    c = ghz_circuit(_params(cfg))
    rho0 = ground_state_vector(c.n_qubits)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    reports = estimate_series(c, rho0, n_max=cfg.n_max, precision=cfg.precision,
                              shots=cfg.shots, rng=rng, cycle=cycle_superoperator(c))
    oracle = exact_incoherent_infidelity(c, rho0)
    rows = [(r.n, r.estimate, oracle, _rel(r.estimate, oracle), r.sigma, r.variance)
            for r in reports]
    files = {"ghz_estimates.csv": _csv(rows, ["n", "estimate", "oracle_eps_inc",
                                              "relative_error", "sigma", "variance"])}
    summary = {"oracle_eps_inc": oracle,
               "estimates": {str(r.n): r.estimate for r in reports},
               "r_values": reports[-1].r_values}
    return {"files": files, "summary": summary}


def _cnot_point(cfg: ExperimentConfig, phi: float, seq: np.random.SeedSequence) -> dict:
    p = _params(cfg, phi)
    target = cnot_circuit(0, 1, 2, p)
    prep_seq, shot_seq, irb_seq = seq.spawn(3)
    shot_rngs = [np.random.default_rng(s) for s in shot_seq.spawn(cfg.M)]
    spam = _spam(cfg)
    avg = clifford_averaged_estimate(target, cfg.M, list(cfg.orders), p,
                                     np.random.default_rng(prep_seq), spam=spam,
                                     shots=cfg.shots, shot_rngs=shot_rngs)
    out = {"phi": phi, "avg": avg, "irb": None}
    if cfg.irb.enabled:
        out["irb"] = run_interleaved(target, p, _rb_config(cfg), np.random.default_rng(irb_seq), spam)
    return out


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda it: fn(*it), items))


def run_cnot_average(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Sweep of the ZZ angle for a CNOT target: Clifford-averaged estimates, oracles and IRB."""
    seqs = np.random.SeedSequence(cfg.seed).spawn(len(cfg.phi))
    points = _pool_map(lambda phi, s: _cnot_point(cfg, phi, s), list(zip(cfg.phi, seqs)), threads)
    header = ["phi", "theta", "xi_T"]
    for n in cfg.orders:
        header += [f"estimate_n{n}", f"single_shot_std_n{n}"]
    header += ["oracle_eps_inc", "oracle_eps_total", "irb_r", "irb_r_err"]
    rows, per_rows, fit_rows, curve_rows = [], [], [], []
    for pt in points:
        avg = pt["avg"]
        row = [pt["phi"], cfg.theta, cfg.xi_T]
        for n in cfg.orders:
            row += [avg.mean_estimate[n], avg.single_shot_std[n]]
        irb = pt["irb"]
        row += [avg.oracle_incoherent, avg.oracle_total,
                irb.estimate.r if irb else "", irb.estimate.r_err if irb else ""]
        rows.append(row)
        for m, idx in enumerate(avg.prep_indices):
            per_rows.append([pt["phi"], m, idx] + [avg.per_preparation[n][m] for n in cfg.orders])
        if irb:
            for name, curve, fit in (("reference", irb.reference_curve, irb.reference_fit),
                                     ("interleaved", irb.interleaved_curve, irb.interleaved_fit)):
                fit_rows.append([pt["phi"], name, fit.A, fit.B, fit.alpha, fit.alpha_err, fit.rms,
                                 fit.degenerate])
                for l, F in curve:
                    curve_rows.append([pt["phi"], name, l, F, float(fit.predict(l))])
    files = {
        "cnot_average.csv": _csv(rows, header),
        "cnot_per_preparation.csv": _csv(
            per_rows, ["phi", "m", "clifford_index"] + [f"estimate_n{n}" for n in cfg.orders]),
    }
    if cfg.irb.enabled:
        files["irb_curves.csv"] = _csv(curve_rows, ["phi", "curve", "l", "F", "fit"])
        files["irb_fits.csv"] = _csv(fit_rows, ["phi", "curve", "A", "B", "alpha", "alpha_err",
                                                "rms", "degenerate"])
    summary = {"rows": [dict(zip(header, r)) for r in rows]}
    return {"files": files, "summary": summary}


def run_irb(cfg: ExperimentConfig) -> dict:
    """Reference and interleaved decay curves for a noisy CNOT, with fits."""
    p = _params(cfg)
    target = cnot_circuit(0, 1, 2, p)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    res = run_interleaved(target, p, _rb_config(cfg), rng, _spam(cfg))
    curve_rows, fit_rows = [], []
    for name, curve, fit in (("reference", res.reference_curve, res.reference_fit),
                             ("interleaved", res.interleaved_curve, res.interleaved_fit)):
        fit_rows.append([name, fit.A, fit.B, fit.alpha, fit.alpha_err, fit.rms, fit.degenerate])
        for l, F in curve:
            curve_rows.append([name, l, F, float(fit.predict(l))])
    files = {
        "irb_curves.csv": _csv(curve_rows, ["curve", "l", "F", "fit"]),
        "irb_fits.csv": _csv(fit_rows, ["curve", "A", "B", "alpha", "alpha_err", "rms", "degenerate"]),
    }
    e = res.estimate
    summary = {"r": e.r, "r_err": e.r_err, "r_ave_reference": e.r_ave_reference,
               "r_ave_interleaved": e.r_ave_interleaved,
               "reference_rms": res.reference_fit.rms, "interleaved_rms": res.interleaved_fit.rms,
               "degenerate": res.reference_fit.degenerate or res.interleaved_fit.degenerate}
    return {"files": files, "summary": summary}


def run_bounds(cfg: ExperimentConfig) -> dict:
    """Bound report and exact left-hand sides for the GHZ or CNOT circuit."""
    p = _params(cfg)
    c = ghz_circuit(p) if cfg.bounds_circuit == "ghz" else cnot_circuit(0, 1, 2, p)
    rep = compute_bounds(c)
    chk = verify_bounds(c, ground_state_vector(c.n_qubits), rep, cfg.quadrature_order)
    header = ["circuit", "noise_integral", "total_integral", "linearization_bound", "cycle_bound",
              "lhs_linear", "lhs_cycle", "linear_holds", "cycle_holds"]
    row = [cfg.bounds_circuit, rep.noise_integral, rep.total_integral, rep.linearization_bound,
           rep.cycle_bound, chk.lhs_linear, chk.lhs_cycle, chk.linear_holds, chk.cycle_holds]
    summary = dict(zip(header, row))
    table = "\n".join(f"{k:>20}  {v}" for k, v in summary.items())
    return {"files": {"bounds.csv": _csv([row], header)}, "summary": summary, "table": table}


RUNNERS = {"ghz_infidelity": run_ghz, "cnot_average": run_cnot_average,
           "irb": run_irb, "bounds": run_bounds}


def _versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("scipy", "pyyaml"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    try:
        out["artifact"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["artifact"] = None
    return out


def run_experiment(cfg: ExperimentConfig, out_dir: Path, threads: int = 1) -> dict:
    """Run, then write outputs and a manifest.  Returns the manifest."""
    start = time.perf_counter()
    runner = RUNNERS[cfg.experiment]
    result = runner(cfg, threads) if cfg.experiment == "cnot_average" else runner(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in sorted(result["files"].items()):
        (out_dir / name).write_text(text)
        hashes[name] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "outputs": hashes,
        "summary": result["summary"],
    }
    if cfg.record_wall_time:
        manifest["wall_time_s"] = time.perf_counter() - start
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if "table" in result:
        print(result["table"])
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incoherent-infidelity", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML or JSON experiment config")
        p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--shots", help="shots per circuit, or 'exact'")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    return parser


def _parse_shots(text: str):
    if text == "exact":
        return "exact"
    try:
        n = int(text)
    except ValueError:
        raise ConfigError(f"--shots must be a positive integer or 'exact', got {text!r}") from None
    if n < 1:
        raise ConfigError(f"--shots must be positive, got {n}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        expected = SUBCOMMANDS[args.command]
        if cfg.experiment != expected:
            raise ConfigError(f"config is for '{cfg.experiment}', not '{expected}'")
        if args.shots is not None:
            cfg = replace(cfg, shots=_parse_shots(args.shots))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out_dir = Path(args.out if args.out else cfg.output_dir)
        run_experiment(cfg, out_dir, args.threads)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FitError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
