"""Command-line entry point ``goedge``.

Subcommands
-----------
gib-frontier   I(x;z), I(z;y), NMSE and transmit entropy over a beta range
simulate       run a scenario; writes trace.csv, summary.txt, summary.json
sweep          one run per grid point; writes sweep.csv
fit-surrogate  fit (a, b, c) of the distortion surrogate to a CSV
validate       check a scenario file and print its resolved form

Exit status: 0 success, 2 configuration error, 3 infeasible run,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import config, gib, sim
from . import surrogate as sg
from .errors import ConfigError, GoEdgeError

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4

FRONTIER_COLUMNS = ("beta", "i_xz_bits", "i_zy_bits", "nmse", "entropy_bits")
SWEEP_COLUMNS = (
    "d_avg", "g_avg", "gamma", "v", "status", "convergence_slot", "feasible",
    "p_total", "p_ed", "p_es", "d_avg_mean", "g_avg_mean", "d_ratio_max", "g_ratio_max",
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def write_atomic(path: Path, text: str | None = None, writer=None) -> None:
    """Write UTF-8 text with LF endings via a temp file and ``os.replace``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            if writer is not None:
                writer(fh)
            else:
                fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_atomic(Path(args.out) / name, text)


def _load(args):
    if args.config is None:
        raise ConfigError("--config", "a scenario file is required")
    scenario, resolved = config.load(args.config)
    if args.seed is not None:
        resolved["scenario"]["seed"] = args.seed
        scenario = scenario.with_overrides(seed=args.seed)
    return scenario, resolved


def cmd_gib_frontier(args) -> int:
    if args.scalar is not None:
        vx, vy, c = args.scalar
        try:
            source = gib.GaussianSource.scalar(vx, vy, c)
        except ValueError as exc:
            raise ConfigError("--scalar", str(exc)) from exc
    else:
        scenario, _ = _load(args)
        if scenario.mode != "gib":
            raise ConfigError("scenario.mode", "gib-frontier needs a GIB scenario or --scalar")
        by_id = {d.id: d for d in scenario.devices}
        dev_id = scenario.devices[0].id if args.device is None else args.device
        if dev_id not in by_id:
            raise ConfigError("--device", f"no device with id {dev_id}")
        source = by_id[dev_id].source
    if args.beta:
        betas = np.array(args.beta, dtype=float)
    else:
        if not 0 < args.beta_min < args.beta_max or args.beta_count < 2:
            raise ConfigError("--beta-min", "need 0 < beta-min < beta-max and beta-count >= 2")
        betas = np.geomspace(args.beta_min, args.beta_max, args.beta_count)
    if np.any(betas <= 0):
        raise ConfigError("--beta", "beta values must be positive")
    rows = [
        (p.beta, p.i_xz_bits, p.i_zy_bits, p.nmse, p.entropy_bits)
        for p in gib.frontier(source, np.sort(betas))
    ]
    _emit(args, "gib_frontier.csv", _csv_text(FRONTIER_COLUMNS, rows))
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario, _ = _load(args)
    trace, summary = sim.run(scenario, threads=args.threads)
    out = Path(args.out or ".")
    write_atomic(out / "trace.csv", writer=trace.write_csv)
    write_atomic(out / "summary.txt", summary.to_text())
    write_atomic(out / "summary.json", json.dumps(summary.to_dict(), indent=2) + "\n")
    sys.stdout.write(summary.to_text())
    return EXIT_OK if summary.feasible else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    scenario, resolved = _load(args)
    cli_grid = {
        axis: getattr(args, axis) for axis in sim.SWEEP_AXES if getattr(args, axis) is not None
    }
    grid = cli_grid or config.sweep_grid(resolved)
    rows = sim.sweep(scenario, grid, threads=args.threads)
    text = _csv_text(SWEEP_COLUMNS, [[r.get(c) for c in SWEEP_COLUMNS] for r in rows])
    write_atomic(Path(args.out or ".") / "sweep.csv", text)
    sys.stdout.write(text)
    if all(r["status"].startswith("error") for r in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_fit_surrogate(args) -> int:
    try:
        data = sg.load_fit_csv(args.data)
    except OSError as exc:
        raise ConfigError("--data", f"cannot read {args.data}: {exc.strerror}") from exc
    except (ValueError, KeyError) as exc:
        if isinstance(exc, GoEdgeError):
            raise
        raise ConfigError("--data", f"malformed fit CSV: {exc}") from exc
    p = sg.fit(data)
    text = (
        "[surrogate]\n"
        f"a = {p.a!r}\nb = {p.b!r}\nc = {p.c!r}\n"
        f"# mean squared residual = {p.fit_residual!r}\n"
    )
    _emit(args, "surrogate_fit.toml", text)
    return EXIT_OK


def cmd_validate(args) -> int:
    _, resolved = _load(args)
    _emit(args, "resolved.toml", config.dumps(resolved))
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", metavar="PATH", **({"default": None} | kw))
    parser.add_argument("--seed", type=int, metavar="N", **({"default": None} | kw),
                        help="override scenario.seed")
    parser.add_argument("--out", metavar="DIR", **({"default": None} | kw),
                        help="output directory (stdout for single tables when omitted)")
    parser.add_argument("--threads", type=int, metavar="N", **({"default": 1} | kw))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goedge", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gib-frontier", parents=[common], help="GIB trade-off table")
    p.add_argument("--scalar", nargs=3, type=float, metavar=("VAR_X", "VAR_Y", "COV"))
    p.add_argument("--device", type=int, help="device id of the config source (default: first)")
    p.add_argument("--beta", type=_float_list, help="explicit comma-separated beta values")
    p.add_argument("--beta-min", type=float, default=1.0)
    p.add_argument("--beta-max", type=float, default=1000.0)
    p.add_argument("--beta-count", type=int, default=100)
    p.set_defaults(func=cmd_gib_frontier)

    p = subs.add_parser("simulate", parents=[common], help="run one scenario")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("sweep", parents=[common], help="grid of runs (overrides [sweep])")
    for axis, flag in (("d_avg", "--d-avg"), ("g_avg", "--g-avg"), ("gamma", "--gamma"), ("v", "--v")):
        p.add_argument(flag, dest=axis, type=_float_list, default=None, metavar="LIST")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("fit-surrogate", parents=[common], help="fit the distortion surrogate")
    p.add_argument("--data", required=True, metavar="CSV", help="columns m_x, m_s, distortion")
    p.set_defaults(func=cmd_fit_surrogate)

    p = subs.add_parser("validate", parents=[common], help="check and echo a scenario file")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads: must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GoEdgeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
