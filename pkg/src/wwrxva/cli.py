"""Command-line entry point: synth, calibrate, price, crossover, oracle."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .calibration import (
    CalibrationConfig, calibrate_many, crossover_tenor, read_calibration, write_calibration,
)
from .errors import DataError, DomainError, InputError, WwrError
from .oracle import CHECK_NAMES, run_suite
from .pricing import Portfolio, default_trade_grid, read_portfolio, write_portfolio
from .reporting import NET_LABEL, price_report, write_report
from .snapshots import read_history, read_snapshot, write_history
from .synthetic import RegimeConfig, generate, manifest

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("wwrxva")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _window(text: str) -> tuple[dt.date, dt.date]:
    try:
        a, b = text.split(":")
        return dt.date.fromisoformat(a), dt.date.fromisoformat(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END as YYYY-MM-DD:YYYY-MM-DD, got {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _portfolios(path: Path, netting: str) -> dict[str, Portfolio]:
    trades = read_portfolio(path)
    ids = [t.trade_id for t in trades]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: trade_id values must be unique")
    if netting == "portfolio":
        return {NET_LABEL: Portfolio(tuple(trades), NET_LABEL)}
    return {t.trade_id: Portfolio((t,), t.trade_id) for t in trades}


def cmd_synth(args) -> int:
    cfg = RegimeConfig.from_json(args.config) if args.config else RegimeConfig()
    if args.seed is not None:
        cfg = RegimeConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    history = generate(cfg)
    files = {"history.csv": write_history(history, out / "history.csv")}
    if not args.no_portfolio:
        write_portfolio(default_trade_grid(), out / "portfolio.csv")
        files["portfolio.csv"] = out / "portfolio.csv"
    man = manifest(cfg, history, files)
    (out / "manifest.json").write_text(json.dumps(man, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(history)} snapshots {man['first_date']}..{man['last_date']} to {out} "
          f"(config sha256 {man['config_sha256'][:12]})")
    return EXIT_OK


def _calib_config(args) -> CalibrationConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        for key in ("corr_window", "sd_window", "crisis_window"):
            if base.get(key) is not None:
                base[key] = tuple(dt.date.fromisoformat(x) for x in base[key])
    overrides = {
        "step": args.step, "corr_window": args.corr_window, "sd_window": args.sd_window,
        "crisis_window": args.crisis_window, "window_days": args.window_days, "workers": args.workers,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    base["skip_bad_dates"] = args.skip_bad_dates or base.get("skip_bad_dates", False)
    base["zero_funding"] = args.zero_funding or base.get("zero_funding", False)
    try:
        return CalibrationConfig(**base)
    except TypeError as exc:
        raise InputError(f"bad calibration config: {exc}") from None


def cmd_calibrate(args) -> int:
    cfg = _calib_config(args)
    portfolios = _portfolios(Path(args.portfolio), args.netting)
    history, skipped = read_history(args.history, skip_bad_dates=cfg.skip_bad_dates)
    for date, reason in skipped:
        log.warning("skipped %s: %s", date, reason)
    sets = calibrate_many(portfolios, history, cfg, args.asof)
    write_calibration(sets, args.out)
    counts = sets[0].window_counts
    print(f"calibrated {len(sets)} set(s) asof {sets[0].asof}; dates per window: "
          + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if args.export_dir:
        ex = Path(args.export_dir)
        ex.mkdir(parents=True, exist_ok=True)
        for s in sets:
            for name in s.structure_names():
                getattr(s, name).to_csv(ex / f"{s.label}.{name}.csv")
    return EXIT_OK


def cmd_price(args) -> int:
    calibs = read_calibration(args.calibration)
    snap = read_snapshot(args.snapshot, args.date)
    netting = "portfolio" if any(c.label == NET_LABEL for c in calibs) else "trade"
    portfolios = _portfolios(Path(args.portfolio), netting)
    rows = price_report(calibs, snap, portfolios, args.mode, args.step, args.zero_funding)
    write_report(rows, args.out)
    print(f"wrote {len(rows)} {args.mode} rows to {args.out}")
    return EXIT_OK


def cmd_crossover(args) -> int:
    l1, l2 = args.lambda1, args.lambda2
    if args.spreads:
        l1, l2 = l1 / args.lgd, l2 / args.lgd
    print(f"{crossover_tenor(l1, l2):.6f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    ok = True
    for seed in args.seed:
        for r in run_suite(seed, args.n, args.corrupt):
            ok &= r.passed
            print(f"seed={seed:<6d} {r.name:<24s} {r.value:11.3e} < {r.threshold:9.3e}  "
                  f"{'PASS' if r.passed else 'FAIL'}")
    print("oracle suite " + ("passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wwrxva", description="Wrong-way risk for regulatory CVA and accounting CVA/FVA.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic market history")
    s.add_argument("--config", help="regime config JSON (defaults built in)")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--no-portfolio", action="store_true", help="skip writing the default 40-trade portfolio")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("calibrate", help="estimate correlation and variance term structures")
    c.add_argument("--history", required=True, help="snapshot CSV file or directory")
    c.add_argument("--portfolio", required=True, help="portfolio CSV")
    c.add_argument("--out", required=True, help="calibration JSON to write")
    c.add_argument("--asof", type=_date, help="asof date (default: last history date)")
    c.add_argument("--config", help="calibration config JSON")
    c.add_argument("--corr-window", type=_window, help="correlation window START:END (default: whole history)")
    c.add_argument("--sd-window", type=_window, help="default/funding SD window (default: trailing year)")
    c.add_argument("--crisis-window", type=_window, help="crisis SD window (default: max CDS volatility year)")
    c.add_argument("--window-days", type=int, help="snapshot count of the default SD and crisis windows")
    c.add_argument("--step", type=_positive, help="horizon grid step in years (default 0.25)")
    c.add_argument("--netting", choices=("trade", "portfolio"), default="trade",
                   help="one netting set per trade, or the whole file as one")
    c.add_argument("--workers", type=int, help="revaluation processes")
    c.add_argument("--skip-bad-dates", action="store_true", help="log and drop snapshots that fail")
    c.add_argument("--zero-funding", action="store_true", help="zero every funding curve")
    c.add_argument("--export-dir", help="also write every term structure as tau_years,value CSV")
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("price", help="price CVA/FVA with wrong-way terms")
    r.add_argument("--calibration", required=True, help="calibration JSON from 'calibrate'")
    r.add_argument("--snapshot", required=True, help="snapshot CSV holding the asof market")
    r.add_argument("--date", type=_date, help="snapshot date to use (default: last in file)")
    r.add_argument("--portfolio", required=True, help="portfolio CSV")
    r.add_argument("--mode", choices=("reg", "acct"), required=True)
    r.add_argument("--out", required=True, help="report CSV to write")
    r.add_argument("--step", type=_positive, default=0.25, help="horizon grid step in years")
    r.add_argument("--zero-funding", action="store_true", help="price with the funding curve zeroed")
    r.set_defaults(func=cmd_price)

    x = sub.add_parser("crossover", help="crossover tenor of two flat hazard rates")
    x.add_argument("lambda1", type=float)
    x.add_argument("lambda2", type=float)
    x.add_argument("--spreads", action="store_true", help="inputs are CDS spreads; divide by --lgd")
    x.add_argument("--lgd", type=_positive, default=0.6)
    x.set_defaults(func=cmd_crossover)

    o = sub.add_parser("oracle", help="run the brute-force verification suite")
    o.add_argument("--seed", type=int, nargs="+", default=[20240601])
    o.add_argument("--n", type=int, default=100_000, help="draws per check")
    o.add_argument("--corrupt", choices=CHECK_NAMES, help="perturb one check's inputs (negative test)")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (DataError, InputError, DomainError, WwrError, OSError) as exc:
        print(f"wwrxva {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
