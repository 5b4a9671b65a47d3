"""Command-line front end.

Subcommands and the CSV columns they write:

  table1   table1.csv: source, gamma, xi, single_photon, multi_photon,
           reference_single, reference_multi, delta_single, delta_multi
  fig1     fig1_<source>.csv per source (wcs, mcs2, mcs3): distance_km, rate_lp,
           rate_infinite, y11_lower, e11_upper, q_z, e_z
           fig1_summary.csv: source, max_distance_lp_km, max_distance_infinite_km,
           increment_lp_km, increment_infinite_km
  fig2     fig2.csv: pulses_n, distance_km, rate_lp, rate_infinite, y11_lower,
           e11_upper, q_z, e_z
  fig3     fig3.csv: c, max_distance_km, increment_km, status
  point    point.csv: distance_km, rate_lp, rate_infinite, y11_lower, e11_upper, q_z, e_z
  bounds   bounds.csv: y11_lower, e11_upper, status, y11_lower_x, x11_upper

Exit codes: 0 success, 2 bad configuration, 3 infeasible LP, 4 calibration failure.
The output directory defaults to $MCSQKD_OUTPUT_DIR, then ./results.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from .decoy_lp import DecoyConfig, LpStatus, decoy_bounds, read_observed_gains
from .sources import (
    CalibrationError,
    calibrate_mcs,
    mcs_distribution,
    poisson_distribution,
)
from .sweep import (
    SOURCE_PRESETS,
    ExperimentConfig,
    KeyRatePoint,
    LpInfeasibleError,
    distance_sweep,
    find_max_distance,
    finite_size_sweep,
    simulate_point,
    sweep_elimination,
)

OUTPUT_ENV = "MCSQKD_OUTPUT_DIR"
FLOAT_FMT = "{:.12g}"

REFERENCE_TABLE1 = {
    "wcs": (0.30326, 9.0204e-2),
    "mcs2": (0.30113, 5.7332e-2),
    "mcs3": (0.37757, 5.8606e-2),
}


class ConfigError(ValueError):
    pass


# --- config text format -------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{name} = {_format_value(getattr(cfg, name))}\n" for name in _FIELDS)


def _parse_value(name: str, text: str):
    text = text.strip()
    if name == "distances":
        return parse_distances(text)
    if name == "pulses_n":
        return None if text.lower() == "none" else float(text)
    if name in ("n_cut", "photon_cutoff"):
        return int(text)
    if name in ("source", "mode", "placement", "click_model"):
        return text
    return float(text)


def parse_distances(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ConfigError("distance step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    return tuple(float(x) for x in text.split(",") if x.strip())


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    try:
        return dataclasses.replace(base or ExperimentConfig(), **values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --- output helpers -------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return FLOAT_FMT.format(x)
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, out_dir: Path, command: str, cfg: ExperimentConfig | None):
        self.out_dir = out_dir
        self.command = command
        self.cfg = cfg
        self.outputs: list[Path] = []
        self.t0 = time.perf_counter()
        out_dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows) -> Path:
        path = write_csv(self.out_dir / name, header, rows)
        self.outputs.append(path)
        return path

    def finish(self) -> Path:
        lines = [
            f"command = {self.command}",
            f"version = {__version__}",
            f"wall_time_s = {time.perf_counter() - self.t0:.3f}",
        ]
        if self.cfg is not None:
            lines.append("[config]")
            lines.append(format_config(self.cfg).rstrip("\n"))
        lines.append("[outputs]")
        lines += [str(p) for p in self.outputs]
        path = self.out_dir / f"manifest_{self.command}.txt"
        path.write_text("\n".join(lines) + "\n")
        return path


# --- subcommands -----------------------------------------------------------------


def cmd_table1(args, cfg, run: Run) -> None:
    rows = []
    wcs = poisson_distribution(cfg.signal_mu)
    rows.append(("wcs", "", "", wcs[1], wcs.multi_photon()))
    for name in ("mcs2", "mcs3"):
        params = calibrate_mcs(cfg.signal_mu, SOURCE_PRESETS[name][1])
        d = mcs_distribution(params)
        rows.append((name, params.gamma, params.xi, d[1], d.multi_photon()))
    out = []
    for name, g, xi, single, multi in rows:
        ps, pm = REFERENCE_TABLE1[name]
        out.append((name, g, xi, single, multi, ps, pm, single - ps, multi - pm))
    run.csv(
        "table1.csv",
        ["source", "gamma", "xi", "single_photon", "multi_photon",
         "reference_single", "reference_multi", "delta_single", "delta_multi"],
        out,
    )


def _source_cfg(cfg: ExperimentConfig, name: str) -> ExperimentConfig:
    source, c = SOURCE_PRESETS[name]
    return cfg.replace(source=source, elimination_c=c if c is not None else cfg.elimination_c)


def cmd_fig1(args, cfg, run: Run) -> None:
    summary = []
    base_lp = base_inf = None
    for name in ("wcs", "mcs2", "mcs3"):
        scfg = _source_cfg(cfg, name)
        points = distance_sweep(scfg, workers=args.workers)
        run.csv(f"fig1_{name}.csv", KeyRatePoint.COLUMNS, (p.as_row() for p in points))
        lp_km = find_max_distance(scfg.replace(mode="lp_bounded"))
        inf_km = find_max_distance(scfg.replace(mode="infinite_decoy"))
        if base_lp is None:
            base_lp, base_inf = lp_km, inf_km
        summary.append((name, lp_km, inf_km, lp_km - base_lp, inf_km - base_inf))
    run.csv(
        "fig1_summary.csv",
        ["source", "max_distance_lp_km", "max_distance_infinite_km",
         "increment_lp_km", "increment_infinite_km"],
        summary,
    )


def cmd_fig2(args, cfg, run: Run) -> None:
    n_grid = [float(x) for x in args.n_grid.split(",")]
    curves = finite_size_sweep(cfg, n_grid)
    rows = [(n,) + p.as_row() for n, pts in curves.items() for p in pts]
    run.csv("fig2.csv", ("pulses_n",) + KeyRatePoint.COLUMNS, rows)


def cmd_fig3(args, cfg, run: Run) -> None:
    if args.c_step <= 0 or args.c_max < args.c_min or args.c_min <= 0:
        raise ConfigError("need 0 < c-min <= c-max and c-step > 0")
    count = int(math.floor((args.c_max - args.c_min) / args.c_step + 1e-9)) + 1
    grid = [round(args.c_min + i * args.c_step, 10) for i in range(count)]
    pts = sweep_elimination(cfg, grid)
    rows = [(p.c, p.max_distance_km, p.increment_km, p.error or "ok") for p in pts]
    run.csv("fig3.csv", ["c", "max_distance_km", "increment_km", "status"], rows)


def cmd_point(args, cfg, run: Run) -> None:
    p = simulate_point(cfg, args.distance)
    run.csv("point.csv", KeyRatePoint.COLUMNS, [p.as_row()])


def cmd_bounds(args, cfg, run: Run) -> None:
    try:
        obs = read_observed_gains(args.gains)
    except (OSError, KeyError) as exc:
        raise ConfigError(f"cannot read gain table: {exc}") from None
    dcfg = DecoyConfig(
        intensities=tuple(obs.intensities()),
        source_kind=cfg.source_kind,
        elimination_c=cfg.elimination_c if cfg.source == "mcs" else None,
        n_cut=cfg.n_cut,
    )
    b = decoy_bounds(dcfg, obs)
    run.csv(
        "bounds.csv",
        ["y11_lower", "e11_upper", "status", "y11_lower_x", "x11_upper"],
        [(b.y11_lower, b.e11_upper, b.status.value, b.y11_lower_x, b.x11_upper)],
    )
    if b.status is not LpStatus.OPTIMAL:
        raise LpInfeasibleError(f"decoy LP is {b.status.value} for {args.gains}")


COMMANDS = {
    "table1": cmd_table1,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "point": cmd_point,
    "bounds": cmd_bounds,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="key = value configuration file")
    g.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    g.add_argument("--source", help="wcs, mcs, mcs2 or mcs3")
    g.add_argument("--elimination-c", type=float)
    g.add_argument("--signal-mu", type=float)
    g.add_argument("--decoy-nu", type=float)
    g.add_argument("--loss-db-per-km", type=float)
    g.add_argument("--dark", type=float)
    g.add_argument("--det-eff", type=float)
    g.add_argument("--f-ec", type=float)
    g.add_argument("--distances", help="start:stop:step or comma list (km)")
    g.add_argument("--pulses-n", help="pulses per intensity, or 'none'")
    g.add_argument("--k-sigma", type=float)
    g.add_argument("--mode", choices=["lp_bounded", "infinite_decoy"])
    g.add_argument("--placement", choices=["per_arm", "midpoint"])
    g.add_argument("--click-model", choices=["literal", "normalized"])
    g.add_argument("--n-cut", type=int)
    g.add_argument("--workers", type=int, default=1, help="processes for distance sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcsqkd",
        description="MDI-QKD key-rate simulation with weak-coherent and modified-coherent sources.",
        epilog=__doc__.split("\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_config_flags(p)
        if name == "fig2":
            p.add_argument("--n-grid", default="1e11,1e12,1e13,inf",
                           help="comma-separated pulse counts; 'inf' for no fluctuation")
        elif name == "fig3":
            p.add_argument("--c-min", type=float, default=0.5)
            p.add_argument("--c-max", type=float, default=5.0)
            p.add_argument("--c-step", type=float, default=0.25)
        elif name == "point":
            p.add_argument("--distance", type=float, required=True, help="km")
        elif name == "bounds":
            p.add_argument("--gains", type=Path, required=True,
                           help="CSV with columns mu_a, nu_b, basis, Q, EQ")
    return parser


def resolve_config(args) -> ExperimentConfig:
    base = ExperimentConfig()
    if args.command == "fig2":
        base = ExperimentConfig.preset("mcs3")
    if args.config is not None:
        try:
            base = parse_config(args.config.read_text(), base)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    lines = []
    for name in _FIELDS:
        value = getattr(args, name, None)
        if value is None or name == "source":
            continue
        lines.append(f"{name} = {value}")
    cfg = parse_config("\n".join(lines), base)
    if args.source is not None:
        src = args.source.strip().lower()
        if src in SOURCE_PRESETS:
            cfg = _source_cfg(cfg, src)
        else:
            cfg = parse_config(f"source = {src}", cfg)
    return cfg


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        out_dir = args.out or Path(os.environ.get(OUTPUT_ENV, "results"))
        r = Run(out_dir, args.command, cfg)
        COMMANDS[args.command](args, cfg, r)
        r.finish()
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, CalibrationError):
            print(f"mcsqkd: calibration failed: {exc}", file=sys.stderr)
            return 4
        print(f"mcsqkd: bad configuration: {exc}", file=sys.stderr)
        return 2
    except LpInfeasibleError as exc:
        print(f"mcsqkd: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
