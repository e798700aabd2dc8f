"""Command-line entry points: run, suite, cost, serve.

Errors exit nonzero with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .bench import ConfigError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override: run this single seed")
    parser.add_argument("--out", default=None, help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prefbo")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="episodes for the first configured policy")
    _add_common(run)

    suite = sub.add_parser("suite", help="episodes for every configured policy and seed")
    _add_common(suite)

    cost = sub.add_parser("cost", help="cost-adjusted preference vs scalar table")
    _add_common(cost)
    cost.add_argument(
        "--xi", type=int, nargs="+", default=[1, 3, 5, 7],
        help="cost of one scalar observation in preference units",
    )
    cost.add_argument("--step", type=int, default=25, help="budget ladder step")

    serve = sub.add_parser("serve", help="start the interactive session service")
    serve.add_argument("--port", type=int, default=8422)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--store-path", default="sessions", help="session snapshot directory")
    return parser


def _load_config(args) -> bench.RunConfig:
    cfg = bench.load_config(args.config)
    if args.seed is not None:
        cfg.seeds = (args.seed,)
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    cfg.policies = cfg.policies[:1]
    suite = bench.run_suite(cfg)
    written = bench.emit(cfg, suite, cfg.out)
    print("\n".join(str(path) for path in written.values()))
    return 0


def _cmd_suite(args) -> int:
    cfg = _load_config(args)
    suite = bench.run_suite(cfg)
    written = bench.emit(cfg, suite, cfg.out)
    print("\n".join(str(path) for path in written.values()))
    return 0


def _cmd_cost(args) -> int:
    cfg = _load_config(args)
    names = {policy.name for policy in cfg.policies}
    if "pfts" not in names or "gpts" not in names:
        raise ConfigError("cost comparison needs both pfts and gpts policies configured")
    suite = bench.run_suite(cfg)
    rows = bench.cost_adjusted(suite["traces"], args.xi, cfg.horizon, step=args.step)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.emit(cfg, suite, out)
    path = out / "cost.csv"
    path.write_text(bench.cost_csv_text(rows), encoding="utf-8")
    print(path)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .session import create_app

    uvicorn.run(create_app(args.store_path), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "suite": _cmd_suite,
        "cost": _cmd_cost,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, OSError, ValueError) as exc:
        json.dump(
            {"code": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
