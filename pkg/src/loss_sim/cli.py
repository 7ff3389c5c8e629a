"""``loss-sim`` command line.

Every failure ends with one line ``ErrorClass: message`` on stderr and exit
status 2 (usage errors) or 1 (everything else).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import LossError
from .harness import LineSpec, compute_metrics, convergence_sweep, pml_study, trace_csv
from .scenario import AXES, run_scenario
from .snapio import Snapshot, read_snapshot, snapshot_filename, write_snapshot
from .spectral import reference_run


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="loss-sim", description="Patched-spline wave simulator and its reference harness.")
    p.add_argument("--deterministic", action="store_true", help="run all patches on one thread")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario and write snapshots")
    r.add_argument("config")
    r.add_argument("--out", default=".", help="output directory")

    o = sub.add_parser("oracle", help="spectral reference run, written on the evaluation lattice")
    o.add_argument("config")
    o.add_argument("--out", default=".")

    c = sub.add_parser("compare", help="relative errors of one snapshot against another")
    c.add_argument("num")
    c.add_argument("ref")

    s = sub.add_parser("sweep", help="grid convergence table against the spectral reference")
    s.add_argument("config")
    s.add_argument("--grids", type=_ints, required=True, help="interval counts, e.g. 32,64,128")
    s.add_argument("--times", type=_floats, default=None)
    s.add_argument("--out", default=None, help="CSV file (default: stdout)")

    m = sub.add_parser("pml-study", help="vary one absorbing-layer parameter")
    m.add_argument("config")
    m.add_argument("--vary", choices=("L", "R", "k_max"), required=True)
    m.add_argument("--values", type=_floats, required=True)
    m.add_argument("--times", type=_floats, default=None)
    m.add_argument("--out", default=None)

    t = sub.add_parser("trace", help="field values along an axis-aligned line, one column per snapshot")
    t.add_argument("series", nargs="+", help="snapshot files")
    t.add_argument("--line", required=True, help="axis@coords, e.g. z@0,0 (3-D) or x@0 (2-D)")
    t.add_argument("--out", default=None)
    return p


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_all(snaps, out_dir: str) -> list[Path]:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return [write_snapshot(d / snapshot_filename(s.name, s.time), s) for s in snaps]


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = run_scenario(cfg, deterministic=args.deterministic)
    for path in _write_all(res.snapshots, args.out):
        print(path)
    trace_axis = cfg["output.trace_axis"]
    if trace_axis:
        line = LineSpec.parse(f"{trace_axis}@{','.join(map(repr, cfg['output.trace_point']))}", AXES[cfg.kind])
        for name in cfg["output.fields"]:
            series = [s for s in res.snapshots if s.name == name]
            path = Path(args.out) / f"trace_{name}_{trace_axis}.csv"
            path.write_text(trace_csv(series, line))
            print(path)
    return 0


def cmd_oracle(args) -> int:
    from .harness import lattice

    cfg = load_config(args.config)
    ref = reference_run(cfg)
    points = lattice(cfg)
    extents = tuple((float(p[0]), float(p[-1])) for p in points)
    snaps = []
    for (name, t) in sorted(ref.fields, key=lambda k: (k[1], k[0])):
        snaps.append(Snapshot(ref.sample(name, t, points), extents, t, name, "ref"))
    for path in _write_all(snaps, args.out):
        print(path)
    return 0


def cmd_compare(args) -> int:
    m = compute_metrics(read_snapshot(args.num), read_snapshot(args.ref))
    print("eps2,eps_inf,norm")
    print(f"{m.eps2:.6e},{m.eps_inf:.6e},{m.norm:.6e}")
    return 0


def cmd_sweep(args) -> int:
    res = convergence_sweep(load_config(args.config), args.grids, args.times, deterministic=args.deterministic)
    for note in res.notices:
        print(note, file=sys.stderr)
    _emit(res.table(), args.out)
    return 0


def cmd_pml_study(args) -> int:
    res = pml_study(load_config(args.config), args.vary, args.values, args.times, deterministic=args.deterministic)
    _emit(res.table(), args.out)
    return 0


def cmd_trace(args) -> int:
    series = [read_snapshot(p) for p in args.series]
    ndim = series[0].data.ndim
    names = ("x", "z") if ndim == 2 else ("x", "y", "z")[:ndim]
    _emit(trace_csv(series, LineSpec.parse(args.line, names)), args.out)
    return 0


COMMANDS = {
    "run": cmd_run,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "pml-study": cmd_pml_study,
    "trace": cmd_trace,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"UsageError: {exc}", file=sys.stderr)
        return 2
    except (LossError, OSError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else ""
        print(f"{type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
