"""Command-line entry point: ``fagim simulate | abep | inspect``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis import abep_upper_bound
from .config import SimulationConfig, load_config, parse_override
from .errors import ConfigError, NumericalError
from .simulate import run_sweep, snr_to_noise_variance

SIMULATE_COLUMNS = ["snr_db", "detector", "ber", "bit_errors", "bits_sent", "frames",
                    "wall_time_s", "config_digest", "snr_convention"]
ABEP_COLUMNS = ["snr_db", "abep", "mode", "pairs_evaluated", "stderr_estimate"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("fagim")


def parse_snr_grid(text: str) -> list[float]:
    """``"0:20:2"`` (inclusive start:stop:step) or ``"0,5,10"``."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 10) for k in range(max(n, 0))]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"invalid SNR grid {text!r}; use start:stop:step or a comma list") from None


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    out = sys.stdout if path == "-" else open(path, "w", newline="")
    try:
        writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()


def _load(args) -> SimulationConfig:
    overrides = dict(parse_override(s) for s in args.set or [])
    return load_config(args.config, overrides)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    records = run_sweep(cfg, workers=args.workers)
    _write_csv(args.out, SIMULATE_COLUMNS, [r.row() for r in records])
    return EXIT_OK


def abep_rows(cfg: SimulationConfig, snr_grid: list[float], mode: str, samples: int) -> list[dict]:
    rows = []
    for snr in snr_grid:
        N0 = snr_to_noise_variance(snr, cfg)
        res = abep_upper_bound(cfg.scheme, cfg.correlation.J, cfg.N_r, N0, mode=mode,
                               samples=samples, seed=cfg.seed)
        rows.append(dict(snr_db=snr, abep=res.abep, mode=res.mode,
                         pairs_evaluated=res.pairs_evaluated, stderr_estimate=res.stderr))
    return rows


def cmd_abep(args) -> int:
    cfg = _load(args)
    grid = parse_snr_grid(args.snr) if args.snr is not None else list(cfg.snr_db)
    _write_csv(args.out, ABEP_COLUMNS, abep_rows(cfg, grid, args.mode, args.samples))
    return EXIT_OK


def _table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells)


def port_rows(cfg: SimulationConfig) -> list[list]:
    """One row per port: index, group, in-group label, grid labels, coordinates."""
    rows = []
    if cfg.mode == "fagim":
        plan = cfg.plan
        for i in range(1, plan.N + 1):
            a, b, c, d = plan.labels(i)
            x, y = plan.coordinates[i - 1]
            rows.append([i, plan.group_of(i), (i - 1) % plan.P + 1, a, b, c, d, f"{x:.6g}", f"{y:.6g}"])
    else:
        geo = cfg.geometry
        for i, (x, y) in enumerate(cfg.scheme.positions, start=1):
            row, col = (i - 1) % geo.N1 + 1, (i - 1) // geo.N1 + 1
            rows.append([i, "", "", row, col, "", "", f"{x:.6g}", f"{y:.6g}"])
    return rows


PORT_COLUMNS = ["i", "g", "p", "a", "b", "c", "d", "x", "y"]


def cmd_inspect(args) -> int:
    cfg = _load(args)
    scheme = cfg.scheme
    geo = cfg.geometry
    print(f"config digest   {cfg.digest}")
    print(f"mode            {cfg.mode}  ({scheme.bits_per_frame} bpcu, {cfg.constellation})")
    print(f"grid            {geo.N1} x {geo.N2} ports, D1={geo.D1:.6g}, D2={geo.D2:.6g}")
    if cfg.mode == "fagim":
        plan = cfg.plan
        print(f"grouping        {plan.G1} x {plan.G2} groups of {plan.P1} x {plan.P2} ports")
        for g, ports in enumerate(plan.index_sets, start=1):
            print(f"  group {g}: {list(ports)}")
    else:
        print(f"active ports    {scheme.n_active} of {scheme.n_ports} (column-major port labels)")
    print()
    rows = port_rows(cfg)
    print(_table(PORT_COLUMNS, rows))
    eig = np.sort(cfg.correlation.eigenvalues)[::-1]
    print()
    print("correlation eigen-spectrum (descending):")
    print("  " + " ".join(f"{v:.4g}" for v in eig))
    if args.csv_dir:
        out = Path(args.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(str(out / "ports.csv"), PORT_COLUMNS, [dict(zip(PORT_COLUMNS, r)) for r in rows])
        _write_csv(str(out / "eigenvalues.csv"), ["k", "eigenvalue"],
                   [dict(k=k, eigenvalue=repr(float(v))) for k, v in enumerate(eig, start=1)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fagim", description="FAG-IM link-level simulation and analysis")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat YAML config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")

    p = sub.add_parser("simulate", help="Monte Carlo BER sweep")
    common(p)
    p.add_argument("--out", default="-", help="CSV output path (default stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("abep", help="ABEP upper bound over an SNR grid")
    common(p)
    p.add_argument("--snr", help="start:stop:step or comma list (default: snr_db from the config)")
    p.add_argument("--out", default="-")
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(func=cmd_abep)

    p = sub.add_parser("inspect", help="print geometry, groups and correlation spectrum")
    common(p)
    p.add_argument("--csv-dir", help="also write ports.csv and eigenvalues.csv here")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
