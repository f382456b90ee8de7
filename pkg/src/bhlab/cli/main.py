"""``bhlab`` command line entry point.

Exit codes: 0 when every check passes, 1 when a check fails (or the run
aborts), 2 on configuration or output-directory errors.  The thread cap
comes from ``--threads``, else the config's ``threads``, else the
``BHLAB_THREADS`` environment variable; it is exported to the BLAS/OpenMP
variables before numpy is imported.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from .config import ConfigError, config_hash, load_config

__all__ = ["main", "build_parser", "THREAD_ENV"]

THREAD_ENV = "BHLAB_THREADS"
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
COMMANDS = ("solve", "barrier-verify", "estimate", "sweep", "report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhlab", description="Boundary-estimate experiments on lattice solutions.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=None, help=f"thread cap (else ${THREAD_ENV})")
        p.add_argument("--timings", action="store_true",
                       help="record wall-clock timings in the manifest (breaks byte reproducibility)")
    return ap


def _apply_thread_cap(n) -> None:
    if n is None:
        return
    for var in _THREAD_VARS:
        os.environ[var] = str(int(n))


def _err(msg: str) -> None:
    print(f"bhlab: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as exc:
        _err(str(exc))
        return 2
    if args.threads is not None and args.threads < 1:
        _err("--threads must be positive")
        return 2
    env_threads = os.environ.get(THREAD_ENV)
    threads = args.threads or cfg.get("threads") or (int(env_threads) if env_threads else None)
    _apply_thread_cap(threads)

    from .artifacts import OutputDir, OutputError
    from .runner import code_version, run_command

    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    resolved = {k: v for k, v in cfg.items() if k != "threads"}
    resolved["seed"] = seed
    resolved["command"] = args.command
    out = OutputDir(args.out)
    try:
        out.prepare()
    except (OutputError, OSError) as exc:
        _err(str(exc))
        return 2
    info = {"format": "bhlab-manifest v1", "command": args.command, "config_sha256": config_hash(resolved),
            "code_version": code_version(), "seed": seed}
    t0 = time.perf_counter()
    timings = {}
    code, status = 1, "error"
    try:
        passed, artifacts = run_command(args.command, cfg, seed, Path(args.config).resolve().parent)
        timings["compute"] = time.perf_counter() - t0
        for name in sorted(artifacts):
            out.write(name, artifacts[name])
        code, status = (0, "pass") if passed else (1, "fail")
        if not passed:
            _err("one or more checks failed; see the reports in " + str(out.root))
    except ConfigError as exc:
        _err(str(exc))
        code, status = 2, "config_error"
    except OSError as exc:
        _err(f"I/O failure: {exc}")
        code, status = 2, "io_error"
    except Exception as exc:  # numerical failure: report, keep the directory consistent
        _err(f"{type(exc).__name__}: {exc}")
        code, status = 1, "error"
    finally:
        if args.timings:
            timings["total"] = time.perf_counter() - t0
            info["timings"] = timings
        out.write_manifest({**info, "status": status, "exit_code": code})
    return code


if __name__ == "__main__":
    sys.exit(main())
