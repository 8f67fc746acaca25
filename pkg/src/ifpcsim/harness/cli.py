"""Command line entry point: ``ifpcsim <subcommand> [flags]``.

Exit codes: 0 success, 1 assertion or acceptance failure, 2 config error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .. import attack, ifpc
from . import calibrate as cal
from .config import ConfigError, ExperimentConfig
from .experiment import run_experiment

GAME_KINDS = ("ifpc-game", "nifpc", "attack", "privacy-attack", "real-vs-ideal", "verify-lemmas")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags override its fields")
    p.add_argument("--seed", type=int, dest="base_seed", help="base seed (trial k uses seed + k)")
    p.add_argument("--trials", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--mode", choices=("paper", "scaled"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--ell", type=int)
    p.add_argument("--pirate", help="pirate spec, e.g. noisy_mean:0.5")
    p.add_argument("--oracle", help="oracle spec, e.g. gaussian_noise:2")
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--scheme", choices=("prf", "otp"))
    p.add_argument("--coalition-size", type=int)
    p.add_argument("--d", type=int, help="record length in bits")


def _grid(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifpcsim", description="Interactive fingerprinting code simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print derived code parameters")
    _common(p)
    p.add_argument("--kind", choices=("ifpc", "attack", "privacy"), default="ifpc")

    for kind in GAME_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        _common(p)
        p.add_argument("--workers", type=int, default=1)

    for name in ("calibrate", "scaling-study"):
        p = sub.add_parser(name, help=f"run the {name} search")
        p.add_argument("--n-grid", type=_grid, default=[4, 8, 16])
        p.add_argument("--beta", type=float, default=0.0)
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--pirates", default=None, help="comma separated pirate specs")
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--users-per-n", type=int, default=10)
        p.add_argument("--seed", type=int, default=cal.CALIBRATION_SEED)
        p.add_argument("--out-dir")
        if name == "calibrate":
            p.add_argument("--write-table", action="store_true", help="merge the entry into the packaged table")
        p.add_argument("--quiet", action="store_true")
    return parser


def config_from_args(kind: str, args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text()) if Path(args.config).exists() else None
        if data is None:
            raise ConfigError(f"config file {args.config} not found")
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("kind", kind) != kind:
            raise ConfigError(f"config kind {data.get('kind')!r} does not match subcommand {kind!r}")
    data["kind"] = kind
    names = {f.name for f in fields(ExperimentConfig)}
    for key, value in vars(args).items():
        if key in names and value is not None:
            data[key] = value
    return ExperimentConfig.from_dict(data)


def _params(args) -> dict:
    n = args.n or 8
    mode = args.mode or "scaled"
    if args.kind == "attack":
        factor = None if args.N is None else args.N // n
        prm = attack.attack_params(n, args.beta or 0.0, args.delta, mode, factor, args.sigma, args.ell)
    elif args.kind == "privacy":
        prm = attack.privacy_params(n, args.beta or 0.0, args.delta, mode, args.sigma, args.ell)
    else:
        N = args.N if args.N is not None else 10 * n
        delta = 0.1 if args.delta is None else args.delta
        prm = ifpc.derive_params(n, N, args.beta or 0.0, delta, mode, sigma=args.sigma, ell=args.ell)
    return prm.to_dict()


def _search(args) -> int:
    pirates = tuple(args.pirates.split(",")) if args.pirates else None
    log = None if args.quiet else (lambda m: print(m, file=sys.stderr))
    if args.command == "calibrate":
        entry = cal.calibrate(args.n_grid, args.beta, args.delta, pirates or cal.DEFAULT_PIRATES, args.trials,
                              args.users_per_n, args.seed, log=log)
        if args.out_dir:
            cal.write_table([entry], Path(args.out_dir) / "calibration.json")
        if args.write_table:
            cal.write_table([entry])
        print(json.dumps(entry, indent=2, sort_keys=True))
        return EXIT_OK
    out_csv = Path(args.out_dir) / "scaling.csv" if args.out_dir else None
    rows = cal.scaling_study(args.n_grid, args.beta, args.delta, pirates or cal.BINDING_PIRATES, args.trials,
                             args.users_per_n, args.seed, out_csv=out_csv, log=log)
    report = {"rows": rows}
    if len(rows) > 1:
        report["fitted_exponent"] = cal.fitted_exponent([r["n"] for r in rows], [r["minimal_ell"] for r in rows])
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "params":
            print(json.dumps(_params(args), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command in ("calibrate", "scaling-study"):
            return _search(args)
        cfg = config_from_args(args.command, args)
        result = run_experiment(cfg, workers=args.workers)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssertionError, cal.CalibrationError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps(result.aggregate, indent=2, sort_keys=True))
    if cfg.kind == "verify-lemmas" and result.aggregate["failed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
