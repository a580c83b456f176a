"""Command-line front end: scans, single-point optimization, reference table,
full-space certification, and heatmap export.

Configuration merges four layers (later wins): built-in defaults, an INI-style
config file, ``CHAIN_RESTORE_<SECTION>_<KEY>`` environment variables, then
command-line flags.  Exit codes: 0 success, 1 configuration/usage error,
2 runtime or I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
from pathlib import Path

from .chain import ChainSpec, InvalidChainError, InvalidRateError, build_blocks
from .optimize import (
    SolveOptions,
    multistart,
    scan,
    write_peaks_json,
    write_scan_csv,
)
from .oracle import ORACLE_MAX_SITES, OracleScaleError, certify, write_certify_json
from .propagator import (
    Schedule,
    ScheduleError,
    load_schedule_json,
    save_schedule_json,
    write_heatmap_csv,
)
from .restoring import (
    MODES,
    BoundViolationError,
    NoSolutionsError,
    RestoreProblem,
    quality,
    save_transfer_map_json,
)
from .textfmt import bool_str, fmt9, parse_bool

ENV_PREFIX = "CHAIN_RESTORE_"

# Registration times at which the two-parameter template attains its best
# quality peak for each chain length; used by the `table1` reference run.
REFERENCE_REGISTRATION_TIMES = {
    8: 75.21875,
    9: 57.84375,
    10: 30.6875,
    11: 48.09375,
    12: 34.65625,
    13: 83.9375,
    14: 73.625,
}

TABLE_CSV_HEADER = ["n_sites", "tau_reg", "lambda", "lambda_max", "residual_norm", "converged"]


def read_table_csv(path) -> list[dict]:
    """Parse a reference-table CSV written by ``table1`` back into rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TABLE_CSV_HEADER:
            raise ValueError(f"{path} is not a reference table CSV")
        return [
            {
                "n_sites": int(row[0]),
                "tau_reg": float(row[1]),
                "lambda": float(row[2]),
                "lambda_max": float(row[3]),
                "residual_norm": float(row[4]),
                "converged": parse_bool(row[5]),
            }
            for row in reader
        ]

DEFAULTS: dict[str, dict[str, str]] = {
    "chain": {"n_sites": "8"},
    "problem": {"mode": "full", "mu": "1e-6", "bounds": "0,1", "k_gamma": "3", "tau_reg": ""},
    "scan": {"tau_min": "", "tau_max": "", "tau_step": "0.03125"},
    "solver": {
        "restarts": "",
        "seed": "0",
        "jobs": "1",
        "max_iterations": "100",
        "gradient_tolerance": "1e-12",
        "residual_tolerance": "1e-8",
        "jacobian_step": "1e-7",
    },
    "output": {"directory": ".", "formats": "csv,json,png"},
}


class ConfigError(Exception):
    """Configuration or usage problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # why: the exit-code contract reserves 2 for runtime errors, so usage
    # errors must not use argparse's default code
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise SystemExit(self._exit_with(message))

    @staticmethod
    def _exit_with(message: str) -> int:
        print(f"error: {message}", file=sys.stderr)
        return 1


def _load_config(path: str | None) -> dict[str, dict[str, str]]:
    config = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in config:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in config[section]:
                    raise ConfigError(f"unknown config key {section}.{key}")
                config[section][key] = value
    for name, value in os.environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        remainder = name[len(ENV_PREFIX):]
        section, _, key = remainder.partition("_")
        section = section.lower()
        key = key.lower()
        if section not in config or key not in config[section]:
            raise ConfigError(f"unknown environment override {name}")
        config[section][key] = value
    return config


def _apply_flags(config: dict[str, dict[str, str]], args: argparse.Namespace) -> None:
    if getattr(args, "n_sites", None) is not None:
        config["chain"]["n_sites"] = str(args.n_sites)
    if getattr(args, "mode", None) is not None:
        config["problem"]["mode"] = args.mode
    if getattr(args, "tau_reg", None) is not None:
        config["problem"]["tau_reg"] = repr(args.tau_reg)
    if getattr(args, "tau_range", None) is not None:
        parts = args.tau_range.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--tau-range expects MIN:MAX:STEP, got {args.tau_range!r}")
        config["scan"]["tau_min"], config["scan"]["tau_max"], config["scan"]["tau_step"] = parts
    if getattr(args, "seed", None) is not None:
        config["solver"]["seed"] = str(args.seed)
    if getattr(args, "jobs", None) is not None:
        config["solver"]["jobs"] = str(args.jobs)
    if getattr(args, "restarts", None) is not None:
        config["solver"]["restarts"] = str(args.restarts)
    if getattr(args, "out", None) is not None:
        config["output"]["directory"] = args.out


def _get_int(config, section: str, key: str) -> int:
    raw = config[section][key]
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be an integer, got {raw!r}") from exc


def _get_float(config, section: str, key: str) -> float:
    raw = config[section][key]
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be a number, got {raw!r}") from exc


def _get_optional_float(config, section: str, key: str) -> float | None:
    raw = config[section][key].strip()
    if not raw:
        return None
    return _get_float(config, section, key)


def _get_mode(config) -> str:
    raw = config["problem"]["mode"].strip().replace("-", "_")
    if raw not in MODES:
        raise ConfigError(f"problem.mode must be one of {MODES}, got {raw!r}")
    return raw


def _get_bounds(config) -> tuple[float, float]:
    raw = config["problem"]["bounds"]
    parts = raw.split(",")
    if len(parts) != 2:
        raise ConfigError(f"problem.bounds must be LO,HI, got {raw!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"problem.bounds must be numeric, got {raw!r}") from exc
    if lo >= hi:
        raise ConfigError(f"problem.bounds must have LO < HI, got {raw!r}")
    return lo, hi


def _get_formats(config) -> set[str]:
    raw = config["output"]["formats"]
    formats = {part.strip().lower() for part in raw.split(",") if part.strip()}
    unknown = formats - {"csv", "json", "png"}
    if unknown:
        raise ConfigError(f"output.formats contains unknown entries {sorted(unknown)}")
    return formats


def _solver_options(config) -> SolveOptions:
    restarts_raw = config["solver"]["restarts"].strip()
    restarts = int(restarts_raw) if restarts_raw else None
    try:
        return SolveOptions(
            mu=_get_float(config, "problem", "mu"),
            max_iterations=_get_int(config, "solver", "max_iterations"),
            gradient_tolerance=_get_float(config, "solver", "gradient_tolerance"),
            residual_tolerance=_get_float(config, "solver", "residual_tolerance"),
            jacobian_step=_get_float(config, "solver", "jacobian_step"),
            restarts=restarts,
            rng_seed=_get_int(config, "solver", "seed"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(config) -> Path:
    directory = Path(config["output"]["directory"])
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _render_figures(config) -> bool:
    return "png" in _get_formats(config)


# --- commands ----------------------------------------------------------------


def cmd_scan(config) -> int:
    n_sites = _get_int(config, "chain", "n_sites")
    mode = _get_mode(config)
    tau_min = _get_optional_float(config, "scan", "tau_min")
    tau_max = _get_optional_float(config, "scan", "tau_max")
    if tau_min is None or tau_max is None:
        raise ConfigError("scan needs scan.tau_min and scan.tau_max (or --tau-range)")
    tau_step = _get_float(config, "scan", "tau_step")
    opts = _solver_options(config)
    jobs = _get_int(config, "solver", "jobs")
    spec = ChainSpec.uniform(n_sites)
    result = scan(
        spec,
        mode,
        tau_min,
        tau_max,
        tau_step,
        opts=opts,
        jobs=jobs,
        mu=_get_float(config, "problem", "mu"),
        bounds=_get_bounds(config),
        k_gamma=_get_int(config, "problem", "k_gamma"),
    )
    out = _out_dir(config)
    formats = _get_formats(config)
    write_scan_csv(result, out / "scan.csv")
    if "json" in formats:
        write_peaks_json(result, out / "peaks.json")
    for rank, idx in enumerate(result.peaks[:10], start=1):
        schedule = result.records[idx].schedule
        if schedule is None:
            continue
        write_heatmap_csv(schedule, out / f"peak_{rank:02d}_schedule.csv")
        if "png" in formats:
            from .figures import heatmap_figure

            heatmap_figure(
                schedule.amplitudes,
                out / f"peak_{rank:02d}_schedule.png",
                title=f"tau_reg = {fmt9(schedule.tau_reg)}",
            )
    if "png" in formats:
        from .figures import scan_figure

        scan_figure(result, out / "scan.png")
    best = max((rec.best_lambda for rec in result.records), default=0.0)
    print(
        f"scan: {len(result.grid)} grid points, {len(result.peaks)} peaks, "
        f"best lambda {fmt9(best)}"
    )
    return 0


def cmd_optimize(config) -> int:
    n_sites = _get_int(config, "chain", "n_sites")
    mode = _get_mode(config)
    tau_reg = _get_optional_float(config, "problem", "tau_reg")
    if tau_reg is None:
        raise ConfigError("optimize needs problem.tau_reg (or --tau-reg)")
    opts = _solver_options(config)
    spec = ChainSpec.uniform(n_sites)
    problem = RestoreProblem(
        spec=spec,
        tau_reg=tau_reg,
        mode=mode,
        mu=_get_float(config, "problem", "mu"),
        bounds=_get_bounds(config),
        k_gamma=_get_int(config, "problem", "k_gamma"),
    )
    branches = multistart(problem, opts)
    if not branches:
        print(f"optimize: no accepted branch at tau_reg = {fmt9(tau_reg)}", file=sys.stderr)
        return 2
    lam, best = quality([b.tmap for b in branches], mode=mode)
    chosen = branches[best]
    out = _out_dir(config)
    formats = _get_formats(config)
    if "json" in formats:
        save_transfer_map_json(chosen.tmap, out / "transfer_map.json")
        save_schedule_json(chosen.schedule, out / "schedule.json")
    write_heatmap_csv(chosen.schedule, out / "schedule.csv")
    if "png" in formats:
        from .figures import heatmap_figure

        heatmap_figure(
            chosen.schedule.amplitudes,
            out / "schedule.png",
            title=f"tau_reg = {fmt9(tau_reg)}",
        )
    print(
        f"optimize: {len(branches)} branches, lambda {fmt9(lam)}, "
        f"|lambda01| {fmt9(abs(chosen.tmap.lambda01))}, "
        f"|lambda10| {fmt9(abs(chosen.tmap.lambda10))}, "
        f"residual {fmt9(chosen.residual_norm)}"
    )
    return 0


def cmd_table1(config, explicit_mode: bool) -> int:
    if explicit_mode and _get_mode(config) != "edges_center":
        raise ConfigError("table1 runs the edges_center template; drop --mode or pass edges-center")
    config["problem"]["mode"] = "edges_center"
    opts = _solver_options(config)
    out = _out_dir(config)
    formats = _get_formats(config)
    rows = []
    for n_sites, tau_reg in REFERENCE_REGISTRATION_TIMES.items():
        spec = ChainSpec.uniform(n_sites)
        problem = RestoreProblem(
            spec=spec,
            tau_reg=tau_reg,
            mode="edges_center",
            mu=_get_float(config, "problem", "mu"),
            bounds=_get_bounds(config),
            k_gamma=_get_int(config, "problem", "k_gamma"),
        )
        branches = multistart(problem, opts)
        if branches:
            lam, best = quality([b.tmap for b in branches], mode="edges_center")
            chosen = branches[best]
            row = {
                "n_sites": n_sites,
                "tau_reg": tau_reg,
                "lambda": lam,
                "lambda_max": chosen.tmap.max_modulus,
                "residual_norm": chosen.residual_norm,
                "converged": True,
            }
            write_heatmap_csv(chosen.schedule, out / f"table1_N{n_sites:02d}_schedule.csv")
            if "png" in formats:
                from .figures import heatmap_figure

                heatmap_figure(
                    chosen.schedule.amplitudes,
                    out / f"table1_N{n_sites:02d}_schedule.png",
                    title=f"N = {n_sites}, tau_reg = {fmt9(tau_reg)}",
                )
        else:
            row = {
                "n_sites": n_sites,
                "tau_reg": tau_reg,
                "lambda": 0.0,
                "lambda_max": 0.0,
                "residual_norm": float("nan"),
                "converged": False,
            }
        rows.append(row)
        print(
            f"table1: N={n_sites} tau_reg={fmt9(row['tau_reg'])} "
            f"lambda={fmt9(row['lambda'])} lambda_max={fmt9(row['lambda_max'])} "
            f"converged={bool_str(row['converged'])}"
        )
    with open(out / "table1.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row["n_sites"],
                    fmt9(row["tau_reg"]),
                    fmt9(row["lambda"]),
                    fmt9(row["lambda_max"]),
                    fmt9(row["residual_norm"]),
                    bool_str(row["converged"]),
                ]
            )
    if "png" in formats:
        from .figures import table_figure

        table_figure(rows, out / "table1.png")
    return 0


def cmd_certify(config, seeds_raw: str) -> int:
    n_sites = _get_int(config, "chain", "n_sites")
    if n_sites > ORACLE_MAX_SITES:
        raise ConfigError(
            f"certify runs the full-space oracle; chain.n_sites must be <= {ORACLE_MAX_SITES}"
        )
    seeds = [int(part) for part in seeds_raw.split(",") if part.strip() != ""]
    report = certify(n_sites, seeds)
    out = _out_dir(config)
    write_certify_json(report, out / "certify.json")
    for entry in report:
        print(
            f"certify: N={entry['N']} seed={entry['seed']} "
            f"max_abs_error={fmt9(entry['max_abs_error'])} "
            f"pass={bool_str(entry['pass'])}"
        )
    if any(not entry["pass"] for entry in report):
        print("certify: at least one case exceeded tolerance", file=sys.stderr)
        return 2
    return 0


def cmd_export_heatmap(config, schedule_path: str) -> int:
    try:
        schedule = load_schedule_json(schedule_path)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid schedule file {schedule_path}: {exc}") from exc
    out = _out_dir(config)
    stem = Path(schedule_path).stem
    write_heatmap_csv(schedule, out / f"{stem}_heatmap.csv")
    if _render_figures(config):
        from .figures import heatmap_figure

        heatmap_figure(
            schedule.amplitudes,
            out / f"{stem}_heatmap.png",
            title=f"tau_reg = {fmt9(schedule.tau_reg)}",
        )
    print(f"export-heatmap: wrote {stem}_heatmap.csv")
    return 0


# --- entry point ---------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="chain-restore",
        description="Simulate and optimize coherence restoring over a damped spin chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int, help="solver RNG seed")
        p.add_argument("--jobs", type=int, help="parallel worker count")
        p.add_argument("--out", help="output directory")
        p.add_argument(
            "--mode",
            choices=["full", "symmetric", "edges-center", "equal-lambda"],
            help="control parametrization",
        )
        p.add_argument("--tau-reg", type=float, help="registration time for single-point runs")
        p.add_argument("--tau-range", help="scan grid as MIN:MAX:STEP")
        p.add_argument("--n-sites", type=int, help="chain length")
        p.add_argument("--restarts", type=int, help="multistart budget per solve")

    for name, helptext in [
        ("scan", "scan a registration-time grid and report quality peaks"),
        ("optimize", "solve the restoring system at one registration time"),
        ("table1", "reference run of the two-parameter template for N = 8..14"),
        ("certify", "cross-validate against the full-space oracle"),
        ("export-heatmap", "render a saved schedule as heatmap CSV/PNG"),
    ]:
        p = sub.add_parser(name, help=helptext)
        add_common(p)
        if name == "certify":
            p.add_argument(
                "--seeds",
                default="0,1,2,3,4",
                help="comma-separated case seeds (empty for a vacuous run)",
            )
        if name == "export-heatmap":
            p.add_argument("--schedule", required=True, help="schedule JSON file")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        _apply_flags(config, args)
        if args.command == "scan":
            return cmd_scan(config)
        if args.command == "optimize":
            return cmd_optimize(config)
        if args.command == "table1":
            return cmd_table1(config, explicit_mode=args.mode is not None)
        if args.command == "certify":
            return cmd_certify(config, args.seeds)
        if args.command == "export-heatmap":
            return cmd_export_heatmap(config, args.schedule)
        raise ConfigError(f"unknown command {args.command!r}")
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    except (
        ConfigError,
        InvalidChainError,
        InvalidRateError,
        ScheduleError,
        BoundViolationError,
        OracleScaleError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (NoSolutionsError, ValueError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
