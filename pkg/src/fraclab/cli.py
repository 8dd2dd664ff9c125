"""Command line runner.

    fraclab run --config PATH [--out DIR] [--seed N]
    fraclab corpus DIR [--out DIR] [--threads N] [--seed N]
    fraclab radial --s 0.5 --c 4 [--n 1] [--r0 1] [--rmax 256] [--out DIR]

Exit status: 0 success, 2 validation error, 3 numerical accuracy failure,
4 comparison violation (1 for unexpected internal errors).
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import copy
import json
from pathlib import Path
import sys

from threadpoolctl import threadpool_limits

from . import __version__, io
from .config import load_config, parse_config
from .errors import (
    AccuracyError,
    CoefficientViolationError,
    ConvergenceError,
    DivisionHazardError,
    FracLabError,
    IntegrationError,
    InvalidArgumentError,
    PoleError,
    SingularMassError,
)
from .pipelines import PIPELINES, tolerances

__all__ = ["main", "run_config", "run_corpus", "exit_code_for"]

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_ACCURACY = 3
EXIT_VIOLATION = 4

_VALIDATION = (InvalidArgumentError, CoefficientViolationError, PoleError, DivisionHazardError)
_ACCURACY = (AccuracyError, ConvergenceError, IntegrationError, SingularMassError)


def exit_code_for(exc):
    if isinstance(exc, _VALIDATION):
        return EXIT_VALIDATION
    if isinstance(exc, _ACCURACY):
        return EXIT_ACCURACY
    return EXIT_INTERNAL


def _error_payload(exc):
    if isinstance(exc, FracLabError):
        return exc.to_dict()
    return {"code": "internal", "message": f"{type(exc).__name__}: {exc}"}


def _provenance(cfg=None, raw_hash=None):
    prov = {"version": __version__}
    if cfg is not None:
        prov.update({"config_sha256": cfg.hash, "seed": cfg.seed, "tolerances": tolerances(cfg)})
    elif raw_hash is not None:
        prov["config_sha256"] = raw_hash
    return prov


def run_config(cfg, outdir):
    """Run one validated configuration; returns (exit code, report dict)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = {"name": cfg.name, "command": cfg.command, "provenance": _provenance(cfg)}
    try:
        results, summary = PIPELINES[cfg.command](cfg, outdir)
    except Exception as exc:  # noqa: BLE001 - reported, never swallowed silently
        code = exit_code_for(exc)
        report.update({"status": "error", "exit_code": code, "error": _error_payload(exc)})
        io.write_json(outdir / "report.json", report)
        return code, report
    code = EXIT_VIOLATION if summary["verdict"] == "violation" else EXIT_OK
    report.update({
        "status": "violation" if code else "ok",
        "exit_code": code,
        "summary": summary,
        "results": results,
    })
    io.write_json(outdir / "report.json", report)
    return code, report


def _load(path, seed=None):
    cfg = load_config(path)
    if seed is not None:
        raw = copy.deepcopy(cfg.raw)
        raw["seed"] = int(seed)
        cfg = parse_config(raw, name=Path(path).stem)
    return cfg


def _run_path(path, outdir, seed=None):
    """Load, validate and run one config file; validation errors become reports."""
    try:
        cfg = _load(path, seed)
    except Exception as exc:  # noqa: BLE001
        code = exit_code_for(exc)
        report = {
            "name": Path(path).stem,
            "command": None,
            "status": "error",
            "exit_code": code,
            "error": _error_payload(exc),
            "provenance": _provenance(),
        }
        Path(outdir).mkdir(parents=True, exist_ok=True)
        io.write_json(Path(outdir) / "report.json", report)
        return code, report
    return run_config(cfg, outdir)


def run_corpus(directory, outdir, threads=1, seed=None):
    """Run every ``*.json`` config in ``directory``; returns (exit code, rows).

    Scenarios run in a thread pool with BLAS pinned to one thread, so the
    outputs do not depend on ``threads``. Results are aggregated in file name
    order. The exit code is the largest per-scenario code.
    """
    directory, outdir = Path(directory), Path(outdir)
    if not directory.is_dir():
        raise InvalidArgumentError(f"corpus directory {str(directory)!r} does not exist",
                                   code="io_error")
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise InvalidArgumentError(f"no *.json configs in {directory.name!r}",
                                   code="empty_corpus")
    threads = max(1, int(threads))
    with threadpool_limits(limits=1):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda p: _run_path(p, outdir / p.stem, seed), paths))
    rows = []
    for path, (code, rep) in zip(paths, outcomes):
        summary = rep.get("summary", {})
        rows.append([
            path.stem,
            rep.get("command") or "",
            rep["status"],
            code,
            summary.get("verdict", ""),
            summary.get("metric", ""),
            summary.get("value", ""),
            rep.get("error", {}).get("code", ""),
            rep["provenance"].get("config_sha256", ""),
        ])
    io.write_csv(outdir / "summary.csv",
                 ["scenario", "command", "status", "exit_code", "verdict", "metric", "value",
                  "error_code", "config_sha256"], rows)
    return max(code for code, _ in outcomes), rows


def _emit_error(exc):
    print(json.dumps({"status": "error", "exit_code": exit_code_for(exc),
                      "error": io.to_jsonable(_error_payload(exc))}, sort_keys=True),
          file=sys.stderr)
    return exit_code_for(exc)


def _print_report(report):
    keep = {k: report[k] for k in ("name", "command", "status", "exit_code") if k in report}
    for k in ("summary", "error"):
        if k in report:
            keep[k] = report[k]
    print(json.dumps(io.to_jsonable(keep), sort_keys=True))


def build_parser():
    parser = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fraclab {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one JSON configuration")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--out", type=Path, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=1,
                       help="accepted for symmetry with corpus; a single run is serial")

    p_corpus = sub.add_parser("corpus", help="run every config in a directory")
    p_corpus.add_argument("directory", type=Path)
    p_corpus.add_argument("--out", type=Path, default=Path("corpus_out"))
    p_corpus.add_argument("--threads", type=int, default=1)
    p_corpus.add_argument("--seed", type=int, default=None)

    p_rad = sub.add_parser("radial", help="radial oscillation evidence from flags")
    p_rad.add_argument("--s", type=float, required=True)
    p_rad.add_argument("--c", type=float, default=4.0)
    p_rad.add_argument("--n", type=int, default=1)
    p_rad.add_argument("--r0", type=float, default=1.0)
    p_rad.add_argument("--rmax", type=float, default=256.0)
    p_rad.add_argument("--windows", type=int, default=None)
    p_rad.add_argument("--out", type=Path, default=Path("radial_out"))
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            cfg = _load(args.config, args.seed)
            out = args.out or Path(cfg.raw.get("out", Path("out") / cfg.name))
            code, report = run_config(cfg, out)
            _print_report(report)
            return code
        if args.cmd == "corpus":
            code, rows = run_corpus(args.directory, args.out, args.threads, args.seed)
            print(json.dumps({"scenarios": len(rows), "exit_code": code,
                              "summary": str(args.out / "summary.csv")}, sort_keys=True))
            return code
        raw = {"command": "radial", "name": "radial", "s": args.s, "c": args.c, "n": args.n,
               "r0": args.r0, "rmax": args.rmax}
        if args.windows is not None:
            raw["windows"] = args.windows
        code, report = run_config(parse_config(raw), args.out)
        _print_report(report)
        return code
    except Exception as exc:  # noqa: BLE001
        return _emit_error(exc)


if __name__ == "__main__":
    sys.exit(main())
