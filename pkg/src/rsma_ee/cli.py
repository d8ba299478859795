"""Command-line interface: optimize, sweep, validate-de, compare-orders,
compare-schemes. Outputs land in --out (default ./out)."""

import argparse
import json
import sys
from pathlib import Path

from .experiments import (ExperimentConfig, ExperimentError, compare_orders,
                          run_sweep, validate_de)


def _add_common(parser):
    parser.add_argument("--config", type=str, default=None,
                        help="experiment JSON; defaults to the built-in scenario")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel sweep workers")
    parser.add_argument("--method", type=str, default=None,
                        choices=["greedy", "exhaustive", "fixed"],
                        help="decoding order selection")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering")


def _load_config(args, force_no_sweep=False) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    if force_no_sweep:
        doc = dict(doc)
        doc["sweep"] = None
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "ordering_method": args.method,
    }
    if args.no_figures:
        overrides["figures"] = False
    return ExperimentConfig.from_dict(doc, **overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rsma-ee",
        description="Energy-efficient uplink covariance and decoding-order design "
                    "under power and exposure budgets.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("optimize", "solve a single instance and write solution.json"),
        ("sweep", "run the configured parameter sweep"),
        ("validate-de", "compare deterministic rates against Monte-Carlo"),
        ("compare-orders", "greedy vs exhaustive vs reverse vs random ordering"),
        ("compare-schemes", "run every configured scheme over the sweep"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_common(p)
    args = parser.parse_args(argv)
    out = Path(args.out)

    try:
        if args.command == "optimize":
            cfg = _load_config(args, force_no_sweep=True)
            rows = run_sweep(cfg, out_dir=out)
            for r in rows:
                print(f"{r.scheme}: EE = {r.ee_bits_per_joule:.6g} bits/J, "
                      f"sum rate = {r.sum_rate_bps:.6g} bit/s")
            return 0

        if args.command in ("sweep", "compare-schemes"):
            cfg = _load_config(args)
            if args.command == "compare-schemes" and len(cfg.schemes) < 2:
                print("compare-schemes needs at least two schemes in the config",
                      file=sys.stderr)
                return 2
            rows = run_sweep(cfg, out_dir=out)
            for r in rows:
                print(f"{r.sweep_parameter}={r.sweep_value} {r.scheme}: "
                      f"EE = {r.ee_bits_per_joule:.6g} bits/J")
            return 0

        if args.command == "validate-de":
            cfg = _load_config(args)
            rows, summary = validate_de(cfg, out_dir=out)
            for r in rows:
                print(f"sweep={r['sweep_value']}: DE = {r['de_ee_bits_per_joule']:.6g}, "
                      f"MC = {r['mc_ee_bits_per_joule']:.6g}, "
                      f"rel err = {100 * r['rel_error']:.3f}%")
            verdict = "PASS" if summary["passed"] else "FAIL"
            print(f"{verdict}: max rel err {100 * summary['max_rel_error']:.3f}% "
                  f"(threshold {100 * summary['threshold']:.1f}%)")
            return 0 if summary["passed"] else 1

        if args.command == "compare-orders":
            cfg = _load_config(args)
            rows = compare_orders(cfg, out_dir=out, strict=False)
            ok = True
            for r in rows:
                print(f"sweep={r['sweep_value']}: exhaustive={r['exhaustive']:.6g} "
                      f"greedy={r['greedy']:.6g} reverse={r['reverse']:.6g} "
                      f"random={r['random']:.6g} chain_ok={r['chain_ok']}")
                ok = ok and r["chain_ok"]
            return 0 if ok else 1
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
