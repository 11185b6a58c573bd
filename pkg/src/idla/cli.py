"""Command-line entry point: ``idla <subcommand> [options]``.

Exit status is 0 on success, 1 when ``validate`` reports a failure and 2 on
a configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, render, run_experiment
from .validate import CHECKS, ValidateOptions, run_checks

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2 as well; keep the message format
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or comma list, got {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a float or comma list, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    d = ExperimentConfig()
    p.add_argument("--n", type=_ints, default=None, help="cylinder width, or a comma-separated sweep")
    p.add_argument("--steps", type=int, default=None, help="particles per run (experiment-specific default)")
    p.add_argument("--replicates", type=int, default=d.replicates)
    p.add_argument("--seed", type=_seed, default=d.seed)
    p.add_argument("--eta", type=float, default=d.eta)
    p.add_argument("--delta", type=float, default=d.delta)
    p.add_argument("--phi", default=d.phi, help='test function modes, e.g. "1:0,-0.5 -1:0,0.5" for sin(2 pi x)')
    p.add_argument("--burnin-mult", type=float, default=d.burnin_mult, help="burn-in = mult * N^2 ln N")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", dest="fmt", choices=("csv", "jsonl"), default=d.fmt)
    p.add_argument("--threads", type=int, default=None, help="worker threads (fallback: IDLA_THREADS, then 1)")
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.add_argument("--d", type=_floats, default=d.d, help="coupling: t_water multipliers")
    p.add_argument("--alpha", type=float, default=d.alpha, help="imbalance: evolve alpha * N^2 steps")
    p.add_argument("--y0", type=float, default=d.y0, help="gff: T = y0 * N^2")
    p.add_argument("--stationary", action="store_true", help="gff: stationary variant")
    p.add_argument("--b", type=float, default=d.b, help="fluctuations: threshold b * ln N")
    p.add_argument("--samples", type=int, default=d.samples, help="stationary: samples per chain")
    p.add_argument("--init-mult", type=float, default=d.init_mult, help="coupling: initial runs of mult * N^2")
    p.add_argument("--log-time", action="store_true", help="fluctuations: also check t = N^2 ln N")


_DEFAULT_N = {"fluctuations": (16, 32, 64, 128), "stationary": (16, 32, 64), "coupling": (32,), "imbalance": (64,), "gff": (64,)}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idla", description="Internal DLA on the cylinder Z_N x Z: experiments and self-checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "fluctuations": "flat-start fluctuation ensembles",
        "coupling": "water-level coupling frequency versus t_water",
        "imbalance": "imbalance statistic of stationary pairs",
        "gff": "discrepancy functional samples and analytic variance",
        "stationary": "shifted-chain height, excess and imbalance series",
    }
    for name in EXPERIMENTS:
        _common(sub.add_parser(name, help=helps.get(name)))
    v = sub.add_parser("validate", help="run the oracle-backed check battery")
    v.add_argument("--seed", type=_seed, default=0)
    v.add_argument("--samples", type=int, default=ValidateOptions.samples)
    v.add_argument("--only", default=None, help="comma-separated subset of: " + ", ".join(CHECKS))
    v.add_argument("--corrupt-return", action="store_true", help=argparse.SUPPRESS)
    return parser


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("IDLA_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"IDLA_THREADS={env!r} is not an integer") from None
    return 1


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        n=ns.n if ns.n is not None else _DEFAULT_N[ns.command],
        steps=ns.steps,
        replicates=ns.replicates,
        seed=ns.seed,
        eta=ns.eta,
        delta=ns.delta,
        phi=ns.phi,
        burnin_mult=ns.burnin_mult,
        out=ns.out,
        fmt=ns.fmt,
        threads=_threads(ns.threads),
        checkpoint_every=ns.checkpoint_every,
        d=ns.d,
        alpha=ns.alpha,
        y0=ns.y0,
        stationary=ns.stationary,
        b=ns.b,
        samples=ns.samples,
        init_mult=ns.init_mult,
        log_time=ns.log_time,
    ).validate()


def _validate(ns: argparse.Namespace) -> int:
    if ns.samples < 100:
        raise ConfigError("validate needs --samples >= 100")
    only = [s.strip() for s in ns.only.split(",")] if ns.only else None
    if only:
        unknown = [s for s in only if s not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    opts = ValidateOptions(seed=ns.seed, samples=ns.samples, corrupt_return=ns.corrupt_return)
    results = run_checks(opts, only)
    for r in results:
        print(r.line(), flush=True)
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if ns.command == "validate":
            return _validate(ns)
        cfg = config_from_args(ns)
        text = render(ns.command, cfg, run_experiment(ns.command, cfg))
    except ConfigError as e:
        print(f"idla: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
