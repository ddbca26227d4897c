"""Command-line entry point: ``hybridce {mse-sweep,se-sweep,covest,design}``."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import sweep
from .config import KEYS, parse_config
from .covest import CovEstConfig, estimate_covariance
from .errors import ConfigError, HybridCEError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", help="master seed (unsigned 64-bit)")
    p.add_argument("--out", default="-", help="output path (default: stdout)")
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    for key in KEYS:
        if key != "seed":
            p.add_argument(f"--{key}", dest=key, metavar="VALUE")


def build_parser():
    parser = argparse.ArgumentParser(prog="hybridce", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("mse-sweep", "empirical and analytic NMSE over SNR and design methods"),
        ("se-sweep", "multi-user downlink spectral efficiency with estimated CSI"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--timing", action="store_true", help="fill the wall_ms column")

    p = sub.add_parser("covest", help="covariance-estimation error trajectory")
    _common(p)

    p = sub.add_parser("design", help="dump the combiners of one method at one SNR")
    _common(p)
    p.add_argument("--user", type=int, default=0)
    return parser


def _config(args):
    overrides = {key: getattr(args, key, None) for key in KEYS}
    return parse_config(args.config, overrides)


def _covest(cfg, out):
    if cfg.n_c < 1:
        raise ConfigError("n_c: covest needs n_c >= 1", field="n_c")
    if cfg.m % cfg.l:
        raise ConfigError("l: covariance estimation needs l to divide m", field="l")
    rho_db = 10.0 if cfg.rho_db is None else cfg.rho_db
    ce = CovEstConfig(M=cfg.m, L=cfg.l, rho=10.0 ** (rho_db / 10.0), n_c=cfg.n_c)
    est = estimate_covariance(sweep.user_covariance(cfg, 0), ce, cfg.seed, trajectory=True)
    fh = sys.stdout if out == "-" else open(out, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("interval", "rel_frob_error"))
        for i, e in enumerate(est.rel_errors, start=1):
            w.writerow((i, format(float(e), ".9g")))
    finally:
        if fh is not sys.stdout:
            fh.close()


def _design(cfg, args):
    if len(cfg.methods) != 1:
        raise ConfigError("methods: design needs exactly one method", field="methods")
    if len(cfg.snr_db) != 1:
        raise ConfigError("snr_db: design needs exactly one SNR value", field="snr_db")
    if not 0 <= args.user < cfg.k:
        raise ConfigError(f"user: must lie in [0, k), got {args.user}", field="user")
    method, snr = cfg.methods[0], cfg.snr_db[0]
    cs = sweep.design_table(cfg, method, snr, user=args.user)
    sweep.write_design(cs, cfg, method, snr, args.out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.threads < 0:
            raise ConfigError("threads: must be >= 0", field="threads")
        if args.command == "mse-sweep":
            sweep.write_csv(sweep.run_mse_sweep(cfg, args.threads, args.timing), args.out)
        elif args.command == "se-sweep":
            sweep.write_csv(sweep.run_se_sweep(cfg, args.threads, args.timing), args.out)
        elif args.command == "covest":
            _covest(cfg, args.out)
        else:
            _design(cfg, args)
    except ConfigError as exc:
        print(f"hybridce: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HybridCEError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"hybridce: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
