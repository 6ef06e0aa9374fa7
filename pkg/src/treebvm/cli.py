"""Command-line entry point: ``treebvm <subcommand> CONFIG [--set path=value ...]``.

Exit status: 0 success, 1 I/O error, 2 invalid configuration, 3 the run
finished but failed the effective-sample-size gate.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .approx import self_similarity_certificate
from .bvm import (
    ESS_GATE,
    bvm_experiment,
    coverage_experiment,
    laplace_concentration_check,
    write_tau_csv,
    write_tau_svg,
)
from .config import MODES, apply_overrides, build_sampler, build_setup, content_hash, load_config, resolve, validate
from .dataset import check_design_regularity, make_grid_design, save_json, spawn_rng, to_csv
from .errors import ConfigInvalid, TreeBvmError
from .mcmc import run_chain, write_draws_csv, write_forests_jsonl

__all__ = ["main", "run"]

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write_report(out_dir: Path, mode: str, cfg: dict, result: dict, status: str) -> Path:
    report = {
        "mode": mode,
        "status": status,
        "version": __version__,
        "input_hash": content_hash(cfg),
        "config": cfg,
        "result": result,
    }
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


# ---------------------------------------------------------------------------
# modes


def _mode_generate(cfg, out, threads):
    setup = build_setup(cfg)
    data, truth, _ = setup.simulate()
    save_json(out / "dataset.json", data, truth)
    to_csv(data, truth, out / "dataset.csv")
    return {"n": data.n, "p": data.p, "files": ["dataset.json", "dataset.csv"]}, "ok"


def _mode_sample(cfg, out, threads):
    setup = build_setup(cfg)
    data, truth, weight = setup.simulate()
    keep = "full" if cfg["experiment"]["keep_forests"] else "summary"
    draws, diag = run_chain(build_sampler(cfg), data, weight, keep=keep)
    write_draws_csv(draws, out / "draws.csv")
    files = ["draws.csv"]
    if keep == "full":
        write_forests_jsonl(draws, out / "forests.jsonl")
        files.append("forests.jsonl")
    psi_vals = np.array([d.psi_value for d in draws]) if draws else np.array([])
    result = {
        "n_draws": diag.n_draws,
        "acceptance_rates": diag.acceptance_rates,
        "proposals": diag.proposals,
        "ess": diag.effective_sample_size,
        "leaf_counts": diag.leaf_count_summary,
        "psi_mean": float(psi_vals.mean()) if psi_vals.size else None,
        "psi_sd": float(psi_vals.std()) if psi_vals.size else None,
        "files": files,
    }
    return result, "ok"


def _mode_bvm(cfg, out, threads):
    e = cfg["experiment"]
    report = bvm_experiment(build_setup(cfg), e["centering_mode"], e.get("M") or 1.0, e["M_n"], e["M2"])
    write_tau_csv(report.tau_draws, report.V0, out / "tau_hist.csv", out / "tau_qq.csv")
    files = ["tau_hist.csv", "tau_qq.csv"]
    if cfg["output"]["svg"]:
        write_tau_svg(report.tau_draws, report.V0, out / "tau.svg")
        files.append("tau.svg")
    result = report.to_dict()
    result["files"] = files
    return result, "inconclusive" if report.inconclusive else "ok"


def _mode_coverage(cfg, out, threads):
    e = cfg["experiment"]
    res = coverage_experiment(build_setup(cfg), e["nominal_level"], e["n_reps"], threads=threads)
    return res.to_dict(), "inconclusive" if res.inconclusive else "ok"


def _mode_selfsim(cfg, out, threads):
    e = cfg["experiment"]
    setup = build_setup(cfg)
    data, truth, _ = setup.simulate()
    rng = spawn_rng(setup.seed, 8)
    cert = self_similarity_certificate(truth, data.x, setup.alpha, e["M"], e["D"], e["partition_budget"], rng,
                                       max_depth=cfg["sampler"]["max_depth"])
    result = {
        "alpha": cert.alpha,
        "M": cert.M,
        "D": cert.D,
        "tested_partitions": cert.tested_partitions,
        "min_ratio": None if math.isinf(cert.min_ratio) else cert.min_ratio,
        "verdict": cert.verdict,
        "family_counts": cert.family_counts,
        "worst": cert.worst,
    }
    return result, "ok"


def _mode_concentration(cfg, out, threads):
    e = cfg["experiment"]
    rows = laplace_concentration_check(e["grid_of_n"], build_setup(cfg), e["n_datasets"])
    with open(out / "concentration.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    errs = [r["mean_error"] for r in rows]
    result = {
        "rows": rows,
        "error_decreasing": all(a > b for a, b in zip(errs, errs[1:])),
        "files": ["concentration.csv"],
    }
    status = "inconclusive" if min(r["ess"] for r in rows) < ESS_GATE else "ok"
    return result, status


def _mode_regularity(cfg, out, threads):
    e = cfg["experiment"]
    ds = cfg["dataset"]
    verdict = check_design_regularity(make_grid_design(ds["n"], ds["p"]), e["max_depth_s"], e["M"])
    result = {
        "regular": verdict.regular,
        "first_failure": verdict.first_failure,
        "checks": [{"s": s, "max_diameter": d, "typical_diameter": t, "ok": ok} for s, d, t, ok in verdict.checks],
        "skipped": list(verdict.skipped),
    }
    return result, "ok"


_RUNNERS = {
    "generate": _mode_generate,
    "sample": _mode_sample,
    "bvm": _mode_bvm,
    "coverage": _mode_coverage,
    "selfsim": _mode_selfsim,
    "concentration": _mode_concentration,
    "regularity": _mode_regularity,
}


def run(config_path, overrides=(), mode: str | None = None, out_dir=None, threads: int = 1,
        stdout=None, stderr=None) -> int:
    """Execute one subcommand; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        raw = apply_overrides(load_config(config_path), overrides)
        # generate shares the dataset schema with sample
        check_mode = "sample" if mode == "generate" else mode
        diags = validate(raw, check_mode)
        if diags:
            raise ConfigInvalid(diags)
        cfg = resolve(raw, check_mode)
        effective_mode = mode or cfg["experiment"]["mode"]
        out = Path(out_dir or cfg["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        result, status = _RUNNERS[effective_mode](cfg, out, threads)
        path = _write_report(out, effective_mode, cfg, result, status)
    except ConfigInvalid as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_IO
    except TreeBvmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INVALID
    print(f"{effective_mode}: {status}, report written to {path}", file=stdout)
    return EXIT_INCONCLUSIVE if status == "inconclusive" else EXIT_OK


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TREEBVM_THREADS", "1")))
    except ValueError:
        return 1


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treebvm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"treebvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "generate", *MODES, "validate"):
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                       help="override a config field, e.g. dataset.seed=7")
        if name != "validate":
            p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
            p.add_argument("--threads", type=int, default=_default_threads(),
                           help="worker processes for replications (default: $TREEBVM_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        try:
            diags = validate(apply_overrides(load_config(args.config), args.set))
        except ConfigInvalid as exc:
            diags = exc.diagnostics
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        for d in diags:
            print(f"error: {d}")
        if not diags:
            print("config is valid")
        return EXIT_INVALID if diags else EXIT_OK
    mode = None if args.command == "run" else args.command
    return run(args.config, args.set, mode, args.out, max(1, args.threads))


if __name__ == "__main__":
    sys.exit(main())
