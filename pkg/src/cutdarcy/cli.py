"""Batch experiment driver.

Configures one (example, method, pair, stabilization) case, runs a
refinement study or a cut-position sweep, and writes diffable CSV artifacts:
per-run report rows, an order-of-convergence summary, and plot-ready
``h`` vs quantity files.  Re-running an identical configuration reproduces
identical bytes.

Exit codes: 0 success, 2 configuration error, 3 geometry (interface
resolution) error, 4 linear-solver error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import numbers
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .bench import (
    EXAMPLES,
    CaseConfig,
    ErrorReport,
    default_shift,
    eoc,
    interface_sweep,
    lane_benchmark,
    make_problem,
    run_case,
    sweep_shifts,
    sweep_summary,
)
from .errors import (
    InvalidArgumentError,
    ResolveInterfaceError,
    SingularSystemError,
)
from .spaces import PAIRS

REPORT_COLUMNS = (
    "h", "ndof_u", "ndof_p", "l2_u", "l2_p", "l2_div", "linf_div",
    "cond", "cond_pre", "method", "pair", "stab", "shift_x", "shift_y",
)
ERROR_QUANTITIES = ("l2_u", "l2_p", "l2_div", "linf_div")
METHODS = ("unstab", "m1", "m2")
STABS = ("full", "macro")
THREADS_VAR = "CUTDARCY_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """One batch run: the case knobs plus study shape and output location."""

    example: str = "1"
    method: str = "m2"
    pair: str = "rt0p0"
    stab: str = "full"
    delta: float = 0.25
    gamma: float = 1.0
    tau_u: float = 1.0
    tau_p: float = 1.0
    tau_b: float = 1.0
    c: float = 1.0
    coupling: str = "b0"
    levels: tuple[int, ...] = (8, 16, 32, 64)
    sweep: int | None = None
    conditioning: bool = True
    precondition: bool = False
    outdir: str = "out"
    seed: int = 0

    def validate(self) -> None:
        if self.example not in EXAMPLES:
            raise InvalidArgumentError(
                f"example must be one of {EXAMPLES}, got {self.example!r}")
        if self.method not in METHODS:
            raise InvalidArgumentError(
                f"method must be one of {METHODS}, got {self.method!r}")
        if self.pair not in PAIRS:
            raise InvalidArgumentError(
                f"pair must be one of {tuple(sorted(PAIRS))}, got {self.pair!r}")
        if self.stab not in STABS:
            raise InvalidArgumentError(
                f"stab must be one of {STABS}, got {self.stab!r}")
        if not self.levels:
            raise InvalidArgumentError("need at least one mesh level")
        if any(n <= 0 for n in self.levels):
            raise InvalidArgumentError("mesh levels must be positive")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidArgumentError("mesh levels must be strictly increasing")
        if self.sweep is not None and self.sweep < 2:
            raise InvalidArgumentError("sweep needs at least 2 positions")

    def case_config(self) -> CaseConfig:
        return CaseConfig(
            pair=self.pair, method=self.method, stab=self.stab,
            delta=(self.delta, self.delta), gamma=self.gamma,
            tau_u=self.tau_u, tau_p=self.tau_p, tau_b=self.tau_b,
            c_boundary=self.c, coupling=self.coupling,
            conditioning=self.conditioning, precondition=self.precondition,
        )


# ---------------------------------------------------------------------------
# CSV serialization

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_reports(path: Path, reports: list[ErrorReport]) -> None:
    rows = [[getattr(r, c) for c in REPORT_COLUMNS] for r in reports]
    _write_csv(path, REPORT_COLUMNS, rows)


def write_eoc(path: Path, reports: list[ErrorReport]) -> None:
    """Consecutive-level orders per error quantity; 'saturated' marks steps
    where an error already hit zero and no order is defined."""
    hs = [r.h for r in reports]
    rows = []
    for quantity in ERROR_QUANTITIES:
        errors = [getattr(r, quantity) for r in reports]
        for k, order in enumerate(eoc(errors, hs)):
            rows.append([quantity, hs[k], hs[k + 1],
                         "saturated" if order is None else order])
    _write_csv(path, ("quantity", "h_coarse", "h_fine", "eoc"), rows)


def write_plot_data(outdir: Path, reports: list[ErrorReport],
                    conditioning: bool, precondition: bool) -> None:
    quantities = list(ERROR_QUANTITIES)
    if conditioning:
        quantities.append("cond")
    if precondition:
        quantities.append("cond_pre")
    for quantity in quantities:
        rows = [[r.h, getattr(r, quantity)] for r in reports
                if getattr(r, quantity) is not None]
        _write_csv(outdir / f"plot_{quantity}.csv", ("h", quantity), rows)


def write_sweep(path: Path, per_level: list[tuple[int, float, dict]]) -> None:
    rows = []
    for n, h, summary in per_level:
        rows.append([n, h,
                     summary.get("min_cond"), summary.get("max_cond"),
                     summary.get("ratio_cond"),
                     summary.get("min_cond_pre"), summary.get("max_cond_pre"),
                     summary.get("ratio_cond_pre")])
    _write_csv(path, ("n", "h", "min_cond", "max_cond", "ratio_cond",
                      "min_cond_pre", "max_cond_pre", "ratio_cond_pre"), rows)


# ---------------------------------------------------------------------------
# the driver

def _apply_thread_env() -> None:
    value = os.environ.get(THREADS_VAR)
    if not value:
        return
    try:
        threads = int(value)
    except ValueError:
        raise InvalidArgumentError(
            f"{THREADS_VAR} must be an integer, got {value!r}")
    if threads <= 0:
        raise InvalidArgumentError(f"{THREADS_VAR} must be positive")
    try:
        import numba
        numba.set_num_threads(threads)
    except ImportError:
        pass


def run(config: RunConfig) -> int:
    """Execute one configured study and write artifacts to its outdir."""
    config.validate()
    _apply_thread_env()
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    case = config.case_config()

    reports: list[ErrorReport] = []
    if config.sweep is None:
        problem = make_problem(config.example, default_shift(config.example))
        for n in config.levels:
            try:
                reports.append(run_case(problem, n, case))
            except ResolveInterfaceError as exc:
                print(f"geometry error at level n={n}: {exc}", file=sys.stderr)
                return 3
            except SingularSystemError as exc:
                print(f"solver error at level n={n}: {exc}", file=sys.stderr)
                return 4
        write_reports(outdir / "reports.csv", reports)
        if len(reports) >= 2:
            write_eoc(outdir / "eoc.csv", reports)
        write_plot_data(outdir, reports, case.conditioning, case.precondition)
    else:
        base = make_problem(config.example)
        per_level = []
        for n in config.levels:
            shifts = sweep_shifts(n, config.sweep)
            try:
                level_reports = interface_sweep(base, n, shifts, case)
            except ResolveInterfaceError as exc:
                print(f"geometry error at level n={n}: {exc}", file=sys.stderr)
                return 3
            except SingularSystemError as exc:
                print(f"solver error at level n={n}: {exc}", file=sys.stderr)
                return 4
            reports.extend(level_reports)
            per_level.append((n, level_reports[0].h, sweep_summary(level_reports)))
        write_reports(outdir / "reports.csv", reports)
        write_sweep(outdir / "sweep.csv", per_level)
        write_plot_data(outdir, reports, case.conditioning, case.precondition)
    return 0


# ---------------------------------------------------------------------------
# argument handling

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutdarcy",
        description="Run unfitted mixed-FEM refinement studies and cut-position "
                    "sweeps; write CSV reports, order summaries, and plot data.",
        epilog=f"The {THREADS_VAR} environment variable caps the compiled "
               "kernel lane's thread count.",
    )
    parser.add_argument("--config", help="JSON file with RunConfig fields; "
                                         "explicit flags override it")
    parser.add_argument("--example", choices=EXAMPLES)
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--pair", choices=tuple(sorted(PAIRS)))
    parser.add_argument("--stab", choices=STABS)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--tau-u", dest="tau_u", type=float)
    parser.add_argument("--tau-p", dest="tau_p", type=float)
    parser.add_argument("--tau-b", dest="tau_b", type=float)
    parser.add_argument("--c", type=float, help="velocity boundary penalty constant")
    parser.add_argument("--coupling", choices=("b0", "b"))
    parser.add_argument("--levels", help="comma-separated mesh sizes, e.g. 8,16,32")
    parser.add_argument("--sweep", type=int,
                        help="run a cut-position sweep with this many shifts per level")
    parser.add_argument("--no-conditioning", action="store_true",
                        help="skip condition-number estimation")
    parser.add_argument("--precondition", action="store_true",
                        help="also report diagonally preconditioned condition numbers")
    parser.add_argument("--outdir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--kernel-bench", action="store_true",
                        help="time the element kernels on both lanes and exit")
    return parser


def _parse_levels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise InvalidArgumentError(f"levels must be comma-separated integers, got {text!r}")


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise InvalidArgumentError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"config file is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise InvalidArgumentError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)

    for name in ("example", "method", "pair", "stab", "delta", "gamma",
                 "tau_u", "tau_p", "tau_b", "c", "coupling", "sweep",
                 "outdir", "seed"):
        flag = getattr(args, name)
        if flag is not None:
            values[name] = flag
    if args.levels is not None:
        values["levels"] = _parse_levels(args.levels)
    elif "levels" in values:
        values["levels"] = tuple(int(n) for n in values["levels"])
    if args.no_conditioning:
        values["conditioning"] = False
    if args.precondition:
        values["precondition"] = True

    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad configuration: {exc}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.kernel_bench:
            return _run_kernel_bench(args)
        config = build_config(args)
        return run(config)
    except InvalidArgumentError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ResolveInterfaceError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except SingularSystemError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 4


def _run_kernel_bench(args: argparse.Namespace) -> int:
    _apply_thread_env()
    results = lane_benchmark()
    outdir = Path(args.outdir or "out")
    outdir.mkdir(parents=True, exist_ok=True)
    keys = sorted(results)
    _write_csv(outdir / "kernel_bench.csv", keys, [[results[k] for k in keys]])
    for k in keys:
        print(f"{k}: {results[k]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
