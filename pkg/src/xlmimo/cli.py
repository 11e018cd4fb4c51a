"""Command-line front end.

Subcommands:
  run              Monte Carlo SER experiment, CSV output
  complexity       print the operation-count table for given dimensions
  inspect-channel  dump one channel realization and the VR masks

Every config-file key has a flag of the same name that overrides it; the
worker count defaults to the XLMIMO_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .channel import draw_user_specs, dump_matrix, generate_realization
from .complexity import complexity_estimates
from .config import SystemConfig, config_keys, load_config
from .harness import (RECEIVERS, run_monte_carlo, write_lr_trace,
                      write_results)
from .model import ConfigError, Constellation

_FLAG_TYPES = {
    "M": int, "K": int, "B": int, "J": int, "T": int, "seed": int,
    "cov_refresh": int, "j_central": int, "readout_lpu": int,
    "delta": float, "gamma_thr": float, "mu_l": float, "sigma2_l": float,
    "antenna_spacing": float, "vr_length_scale": float,
    "schedule": str, "lambda_init": str, "vr_length_mode": str,
    "bound_noise": str,
}


def _snr_list(raw: str):
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH",
                        help="flat key=value config file")
    for key in config_keys():
        if key == "snr_db":
            parser.add_argument("--snr_db", "--snr", dest="snr_db",
                                type=_snr_list, metavar="A,B,C",
                                help="SNR points in dB (config key snr_db); "
                                     "use --snr=-10,-5,0 for negative values")
        else:
            parser.add_argument(f"--{key}", type=_FLAG_TYPES[key],
                                help=f"override config key {key}")


def _build_config(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    overrides = {k: getattr(args, k) for k in config_keys()
                 if getattr(args, k, None) is not None}
    return replace(cfg, **overrides) if overrides else cfg


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xlmimo",
                                description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo SER experiment")
    _add_config_flags(run)
    run.add_argument("--trials", type=int, default=1000,
                     help="channel realizations per SNR point")
    run.add_argument("--receivers", default="mfbp,zf,cvmp,bound",
                     help=f"comma list from {','.join(RECEIVERS)}")
    run.add_argument("--out", metavar="PATH", default="results.csv",
                     help="output CSV (config snapshot goes beside it)")
    run.add_argument("--workers", type=int,
                     default=int(os.environ.get("XLMIMO_WORKERS", "1")),
                     help="parallel worker processes (env XLMIMO_WORKERS)")
    run.add_argument("--strict", action="store_true",
                     help="exit nonzero if any receiver failed on any trial")
    run.add_argument("--trace", metavar="PATH",
                     help="write per-sweep SIC diagnostics CSV (large)")

    comp = sub.add_parser("complexity", help="operation-count table")
    comp.add_argument("--M", type=int, required=True)
    comp.add_argument("--K", type=int, required=True)
    comp.add_argument("--B", type=int, required=True)
    comp.add_argument("--mod", type=int, default=4, help="constellation size")
    comp.add_argument("--J", type=int, default=2)
    comp.add_argument("--T", type=int, default=10)

    insp = sub.add_parser("inspect-channel",
                          help="print VR masks and one realization")
    _add_config_flags(insp)
    insp.add_argument("--dump", metavar="PATH",
                      help="write H to a matrix dump (.txt for text)")
    return p


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    if args.trials < 1:
        print(f"error: --trials must be >= 1, got {args.trials}", file=sys.stderr)
        return 2
    receivers = tuple(r.strip() for r in args.receivers.split(",") if r.strip())
    for r in receivers:
        if r not in RECEIVERS:
            print(f"error: unknown receiver '{r}' (choose from "
                  f"{','.join(RECEIVERS)})", file=sys.stderr)
            return 2
    result = run_monte_carlo(cfg, receivers, args.trials,
                             workers=max(1, args.workers),
                             record_lr=bool(args.trace))
    write_results(result, args.out)
    if args.trace:
        write_lr_trace(result.lr_rows, args.trace)
    for name in receivers:
        for snr in cfg.snr_db:
            s = result.stats(name, snr)
            print(f"{name:>6s}  snr {snr:+6.1f} dB  ser {s.ser:.6g} "
                  f"(+-{s.stderr:.2g})  errors {s.errors}/{s.symbols}"
                  + (f"  failures {s.failures}" if s.failures else ""))
    print(f"wrote {args.out} ({result.n_trials} trials/point, "
          f"{result.wall_clock:.1f}s)")
    if args.strict and result.total_failures > 0:
        print(f"error: {result.total_failures} receiver failures",
              file=sys.stderr)
        return 1
    return 0


def _cmd_complexity(args) -> int:
    table = complexity_estimates(args.M, args.K, args.B, args.mod,
                                 args.J, args.T)
    width = max(len(k) for k in table)
    for key, value in table.items():
        print(f"{key:<{width}s}  {value:.6g}")
    return 0


def _cmd_inspect(args) -> int:
    cfg = _build_config(args)
    rng = np.random.default_rng(cfg.seed)
    constellation = Constellation.qpsk()
    specs = draw_user_specs(cfg, rng)
    x_true = rng.integers(0, constellation.size, cfg.K)
    snr = cfg.snr_db[0]
    trial = generate_realization(cfg, specs, x_true, snr, rng, constellation)
    print(f"M={cfg.M} K={cfg.K} B={cfg.B} snr={snr:g} dB "
          f"sigma2_n={trial.sigma2_n:.6g}")
    cols = 64
    step = max(1, cfg.M // cols)
    for k, spec in enumerate(specs):
        bins = [spec.vr_mask[i:i + step].any() for i in range(0, cfg.M, step)]
        bar = "".join("#" if b else "." for b in bins)
        power = float(np.sum(np.abs(trial.H[:, k]) ** 2))
        print(f"user {k:3d}  theta {spec.theta:+8.4f}  "
              f"vr [{spec.vr_center:4d} len {spec.vr_length:4d}]  "
              f"|h|^2 {power:8.3f}  {bar}")
    if args.dump:
        dump_matrix(args.dump, trial.H)
        print(f"wrote {args.dump}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "complexity":
            return _cmd_complexity(args)
        if args.command == "inspect-channel":
            return _cmd_inspect(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
