"""Command-line interface.

Subcommands: rates, simulate, sweep, check-design, oracle-check.
Exit codes: 0 success, 2 validation failure, 3 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

from .harness import (
    CheckFailure,
    ExperimentConfig,
    run_design_check,
    run_oracle_check,
    run_rates,
    run_simulation,
    run_sweep,
    write_csv,
)

EXIT_OK, EXIT_VALIDATION, EXIT_CHECK = 0, 2, 3


def _add_common(sp):
    sp.add_argument("--config", help="key=value config file; flags override it")
    sp.add_argument("--channel", help='"p00,p01,p10,p11", "bsc:<p>", or "z:<p11>"')
    sp.add_argument("--n", type=int)
    sp.add_argument("--theta", help="scalar (simulate) or lo:hi:step grid (rates/sweep)")
    sp.add_argument("--k", type=int, help="override k = ceil(n^theta)")
    sp.add_argument("--c-mult", type=float, dest="c_mult",
                    help="test budget multiplier over the target baseline")
    sp.add_argument("--target", choices=["sparc", "spex", "dd"])
    sp.add_argument("--design", choices=["cc", "sc"])
    sp.add_argument("--decoder", choices=["dd", "sparc", "spex", "bp", "map"])
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int, dest="master_seed")
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--out", help="CSV output path ('-' for stdout)")
    sp.add_argument("--d", type=float, dest="d_override", help="override test density d")
    sp.add_argument("--zeta", type=float, help="override the score slack")
    sp.add_argument("--vplus-mult", type=float, dest="vplus_multiplier")
    sp.add_argument("--checks", type=int, help="instance/construction count for checks")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="noisygt",
        description="Noisy group testing: rate thresholds, coupled designs, decoders",
    )
    sub = ap.add_subparsers(dest="mode", required=True)

    sp = sub.add_parser("rates", help="threshold table over a theta grid")
    _add_common(sp)
    sp.add_argument("--dd", action="store_true", dest="with_dd",
                    help="also optimize the DD constant per grid point")
    sp.add_argument("--cs-check", action="store_true", dest="cs_check",
                    help="verify the symmetric-channel cross-check per point")

    sp = sub.add_parser("simulate", help="Monte Carlo decoding trials")
    _add_common(sp)

    sp = sub.add_parser("sweep", help="grid over theta x c_mult")
    _add_common(sp)
    sp.add_argument("--c-mult-grid", dest="c_mult_grid", help="lo:hi:step")

    sp = sub.add_parser("check-design", help="degree audits and concentration bands")
    _add_common(sp)

    sp = sub.add_parser("oracle-check", help="small-instance posterior/BP oracle suite")
    _add_common(sp)
    return ap


def config_from_args(args):
    mode = args.mode.replace("-", "_")
    overrides = {"mode": mode}
    valid = {f.name for f in fields(ExperimentConfig)}
    for key, val in vars(args).items():
        if key in ("mode", "config") or val is None:
            continue
        if key == "theta":
            # grids contain ':'; scalars apply to theta itself
            if ":" in str(val):
                overrides["theta_grid"] = val
            else:
                overrides["theta"] = float(val)
            continue
        if key in valid:
            overrides[key] = val
    if getattr(args, "config", None):
        return ExperimentConfig.from_file(args.config, **overrides)
    return replace(ExperimentConfig(), **overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        if config.mode == "rates":
            write_csv(config.out, run_rates, config)
        elif config.mode == "simulate":
            write_csv(config.out, run_simulation, config)
        elif config.mode == "sweep":
            write_csv(config.out, run_sweep, config)
        elif config.mode == "check_design":
            run_design_check(config)
        elif config.mode == "oracle_check":
            run_oracle_check(config)
        else:
            raise ValueError(f"unknown mode {config.mode!r}")
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
