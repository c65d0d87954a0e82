"""Command line driver: ``leakvqa {expressibility,fit,iris,topology}``."""
from __future__ import annotations

import argparse
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, build_config, parse_config, to_text
from .experiments import emit_csv, emit_trace_csv, run_sweep

log = logging.getLogger("leakvqa")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leakvqa", description="Leakage-noise benchmarks for variational circuits.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} sweep")
        s.add_argument("--config", type=Path, help="key = value config file")
        s.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
        s.add_argument("--out", type=Path, help="output directory")
        mode = s.add_mutually_exclusive_group()
        mode.add_argument("--desk", dest="mode", action="store_const", const="desk",
                          help="reduced sample counts and repetitions (default)")
        mode.add_argument("--paper", dest="mode", action="store_const", const="paper",
                          help="full sample counts and repetitions")
        s.add_argument("--jobs", type=int, help="worker processes")
        s.add_argument("--no-figures", action="store_true", help="skip SVG output")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def write_manifest(cfg, path: Path) -> None:
    import matplotlib

    lines = [
        f"experiment = {cfg.experiment}",
        f"config_hash = {cfg.digest()}",
        f"seed = {cfg.seed}",
        f"leakvqa = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"matplotlib = {matplotlib.__version__}",
        "",
        "# resolved config",
        to_text(cfg),
    ]
    path.write_text("\n".join(lines), encoding="utf-8")


def render_figures(table, cfg, out: Path) -> list[Path]:
    from .plotting import emit_heatmap, emit_loss_curve

    written = []
    for n in cfg.n:
        path = out / f"heatmap_n{n}.svg"
        if cfg.experiment == "topology":
            emit_heatmap(table, n, path, row_key="topology", col_key="L",
                         title=f"Expr2, n = {n}, d = {cfg.d[0]}")
        else:
            emit_heatmap(table, n, path)
        written.append(path)
    if cfg.experiment == "fit" and table.rows:
        worst = max(table.rows, key=lambda r: r["mean"])
        key = (worst["n"], worst["d"], worst["L"])
        ideal, leaky = table.traces[key]
        emit_trace_csv(ideal, leaky, out / "loss_curve.csv")
        emit_loss_curve(ideal, leaky, out / "loss_curve.svg",
                        title=f"n = {key[0]}, d = {key[1]}, L = {key[2]:.3g}")
        written += [out / "loss_curve.csv", out / "loss_curve.svg"]
    return written


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seed": args.seed, "mode": args.mode, "jobs": args.jobs,
                 "out": str(args.out) if args.out else None}
    try:
        if args.config:
            cfg = parse_config(args.config, args.experiment, **overrides)
        else:
            cfg = build_config(args.experiment, **overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table = run_sweep(cfg)
    emit_csv(table, out / "results.csv")
    write_manifest(cfg, out / "run_manifest.txt")
    if not args.no_figures:
        render_figures(table, cfg, out)
    print(f"wrote {len(table.rows)} rows to {out / 'results.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
