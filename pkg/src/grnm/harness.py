"""Benchmark harness: run a problem/variant matrix and certify every cell.

The JSON config names a list of problems and a list of schedule variants; the
harness runs every pair, writes per-cell trajectory and certificate artifacts
plus a suite summary, and exits 0 exactly when every cell converged and every
certificate passed.
"""

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import certify_run, estimate_local_order
from .problems import build_problem, validate_problem_spec
from .schedule import PRESET_NAMES, ScheduleConfig, preset, validate_assumptions
from .solver import ConfigurationError, SolverConfig, Trajectory, run

SUMMARY_COLUMNS = ("problem", "variant", "iters", "final_gap", "final_grad",
                   "cert_pass", "cert_fail", "local_order", "wall_ms")

_TOP_KEYS = {"problems", "variants", "epsilon", "max_outer", "jobs", "out"}
_VARIANT_KEYS = {"name", "p", "preset", "c1", "c2", "q", "theta", "epsilon", "max_outer"}

EXIT_OK = 0
EXIT_CERT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_FAILURE = 3


@dataclass(frozen=True)
class SuiteConfig:
    problems: tuple  # raw spec dicts, config order
    variants: tuple  # raw variant dicts, config order
    epsilon: float
    max_outer: int
    jobs: int
    out: str | None


def _check_variant(variant):
    if not isinstance(variant, dict):
        raise ValueError("variant entries must be objects")
    unknown = sorted(set(variant) - _VARIANT_KEYS)
    if unknown:
        raise ValueError(f"unknown variant keys: {', '.join(unknown)}")
    name = variant.get("name")
    if not name or not isinstance(name, str):
        raise ValueError("every variant needs a nonempty string name")
    p = float(variant.get("p", 3.0))
    if not 1.0 < p <= 3.0:
        raise ValueError(f"variant {name!r}: p must lie in (1, 3]")
    # naming q or theta without a preset implies a custom parameter pair
    which = variant.get(
        "preset", "custom" if ("q" in variant or "theta" in variant) else "example1")
    if which not in PRESET_NAMES + ("custom",):
        raise ValueError(f"variant {name!r}: preset must be one of "
                         f"{PRESET_NAMES + ('custom',)}")
    if which == "custom":
        if "q" not in variant or "theta" not in variant:
            raise ValueError(f"variant {name!r}: custom preset needs q and theta")
    elif "q" in variant or "theta" in variant:
        raise ValueError(f"variant {name!r}: q and theta are set by the preset")
    if "q" in variant and float(variant["q"]) < 0.0:
        raise ValueError(f"variant {name!r}: q must be nonnegative")
    if "theta" in variant:
        theta = float(variant["theta"])
        if not 0.0 < theta < 1.0:
            raise ValueError(f"variant {name!r}: theta must lie in (0, 1)")
        if theta <= float(variant["q"]):
            raise ValueError(f"variant {name!r}: theta must exceed q")
    if "c1" in variant and not float(variant["c1"]) > 0.0:
        raise ValueError(f"variant {name!r}: c1 must be positive")
    if "c2" in variant and not 0.0 < float(variant["c2"]) < 1.0:
        raise ValueError(f"variant {name!r}: c2 must lie in (0, 1)")
    if "epsilon" in variant and not float(variant["epsilon"]) > 0.0:
        raise ValueError(f"variant {name!r}: epsilon must be positive")
    if "max_outer" in variant and int(variant["max_outer"]) < 1:
        raise ValueError(f"variant {name!r}: max_outer must be at least 1")


def parse_config(path):
    """Load and validate a suite config; unknown keys are rejected by name."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
    problems = data.get("problems", [])
    variants = data.get("variants", [])
    if not isinstance(problems, list) or not isinstance(variants, list):
        raise ValueError("problems and variants must be lists")
    names = []
    for spec in problems:
        validate_problem_spec(spec)
        name = spec.get("name")
        if not name or not isinstance(name, str):
            raise ValueError("every problem needs a nonempty string name")
        names.append(name)
    if len(set(names)) != len(names):
        raise ValueError("problem names must be unique")
    vnames = []
    for variant in variants:
        _check_variant(variant)
        vnames.append(variant["name"])
    if len(set(vnames)) != len(vnames):
        raise ValueError("variant names must be unique")
    epsilon = float(data.get("epsilon", 1e-8))
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    max_outer = int(data.get("max_outer", 500))
    if max_outer < 1:
        raise ValueError("max_outer must be at least 1")
    jobs = int(data.get("jobs", 1))
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        raise ValueError("out must be a string path")
    return SuiteConfig(problems=tuple(problems), variants=tuple(variants),
                       epsilon=epsilon, max_outer=max_outer, jobs=jobs, out=out)


def _variant_settings(variant, oracle, defaults):
    """Resolve (ScheduleConfig, theta, SolverConfig) for one cell."""
    p = float(variant.get("p", 3.0))
    which = variant.get(
        "preset", "custom" if ("q" in variant or "theta" in variant) else "example1")
    if which == "custom":
        q, theta = float(variant["q"]), float(variant["theta"])
    else:
        q, theta = preset(which, p)
    c1 = float(variant.get("c1", max(oracle.metadata.taylor_bound, 1e-3)))
    c2 = float(variant.get("c2", 0.5))
    sched = ScheduleConfig(p=p, c1=c1, c2=c2, q=q).bind(oracle.n)
    solver_config = SolverConfig(
        schedule=sched,
        epsilon=float(variant.get("epsilon", defaults["epsilon"])),
        max_outer=int(variant.get("max_outer", defaults["max_outer"])),
    )
    return sched, theta, solver_config


def run_cell(problem_spec, variant, defaults, out_dir=None):
    """Run one problem/variant pair; returns the summary row dict.

    When ``out_dir`` is set, writes <out>/<problem>__<variant>/trajectory.csv,
    trajectory.json and certificate.json.
    """
    row = {
        "problem": problem_spec["name"], "variant": variant["name"],
        "iters": None, "final_gap": None, "final_grad": None,
        "cert_pass": 0, "cert_fail": 0, "local_order": None, "wall_ms": None,
        "status": "ok", "min_margin": None, "case": None, "message": "",
    }
    cell_dir = None
    if out_dir is not None:
        cell_dir = Path(out_dir) / f"{problem_spec['name']}__{variant['name']}"
        cell_dir.mkdir(parents=True, exist_ok=True)
    try:
        oracle, start = build_problem(problem_spec)
        sched, theta, solver_config = _variant_settings(variant, oracle, defaults)
        if start is None:
            start = oracle.default_start()
        trajectory = run(oracle, start, solver_config)
    except ConfigurationError as err:
        row["status"], row["message"] = "config_error", str(err)
        return row
    except ValueError as err:
        row["status"], row["message"] = "config_error", str(err)
        return row

    trajectory.problem = problem_spec["name"]
    trajectory.config["theta"] = theta
    trajectory.config["variant"] = variant["name"]
    final = trajectory.final
    row["iters"] = trajectory.iterations
    row["final_grad"] = final.grad_norm
    if oracle.metadata.f_star is not None:
        row["final_gap"] = final.f - oracle.metadata.f_star
    row["wall_ms"] = float(sum(r.wall_time_ms or 0.0 for r in trajectory.records))
    if cell_dir is not None:
        (cell_dir / "trajectory.csv").write_text(trajectory.csv_text(), encoding="utf-8")
        (cell_dir / "trajectory.json").write_text(trajectory.to_json_text(), encoding="utf-8")

    converged = trajectory.termination == "converged"
    try:
        report = certify_run(trajectory, sched, theta, oracle.metadata)
        row["cert_pass"], row["cert_fail"] = report.counts()
        row["min_margin"] = None if not np.isfinite(report.min_margin) else report.min_margin
        row["case"] = report.case
        cert_passed = report.passed
        if cell_dir is not None:
            (cell_dir / "certificate.json").write_text(
                json.dumps(report.to_json_dict(), indent=1) + "\n", encoding="utf-8")
    except (ValueError, RuntimeError) as err:
        cert_passed = False
        row["cert_fail"] = 1
        row["message"] = str(err)

    if converged:
        try:
            estimate = estimate_local_order(trajectory, oracle)
            row["local_order"] = estimate.order
        except ValueError:
            row["local_order"] = None

    if not converged:
        row["status"] = "solver_failure"
        row["message"] = row["message"] or f"terminated with {trajectory.termination}"
    elif not cert_passed:
        row["status"] = "cert_fail"
    return row


def _cell_worker(args):
    return run_cell(*args)


def suite_exit_code(rows):
    statuses = {row["status"] for row in rows}
    if "config_error" in statuses:
        return EXIT_CONFIG_ERROR
    if "solver_failure" in statuses:
        return EXIT_SOLVER_FAILURE
    if "cert_fail" in statuses:
        return EXIT_CERT_FAILURE
    return EXIT_OK


@dataclass(frozen=True)
class SuiteResult:
    rows: tuple
    exit_code: int
    out_dir: str | None


def run_suite(config, out_dir=None, jobs=None):
    """Run the full problem/variant matrix and write summary artifacts.

    Cells are ordered problems-alphabetical then variants in config order,
    independent of execution interleaving.
    """
    defaults = {"epsilon": config.epsilon, "max_outer": config.max_outer}
    jobs = config.jobs if jobs is None else max(1, int(jobs))
    problems = sorted(config.problems, key=lambda spec: spec["name"])
    cells = [(p, v, defaults, out_dir) for p in problems for v in config.variants]
    if jobs > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cell_worker, cells))
    else:
        rows = [run_cell(*cell) for cell in cells]
    result = SuiteResult(rows=tuple(rows), exit_code=suite_exit_code(rows), out_dir=out_dir)
    if out_dir is not None:
        base = Path(out_dir)
        base.mkdir(parents=True, exist_ok=True)
        (base / "summary.csv").write_text(emit_report(result, "csv"), encoding="utf-8")
        (base / "summary.txt").write_text(emit_report(result, "text"), encoding="utf-8")
        (base / "summary.json").write_text(emit_report(result, "json"), encoding="utf-8")
    return result


def _csv_value(key, value):
    if value is None:
        return ""
    if key in ("iters", "cert_pass", "cert_fail"):
        return str(int(value))
    if key == "wall_ms":
        return f"{value:.3f}"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(result, fmt="text"):
    """Render a suite result as text, csv, or json (round-trippable)."""
    rows = result.rows
    if fmt == "csv":
        lines = [",".join(SUMMARY_COLUMNS)]
        for row in rows:
            lines.append(",".join(_csv_value(k, row[k]) for k in SUMMARY_COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps({"cells": list(rows), "exit_code": result.exit_code},
                          indent=1, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")

    headers = ("problem", "variant", "iters", "final_gap", "final_grad",
               "cert", "min_margin", "order", "wall_ms", "status")
    table = [headers]
    for row in rows:
        table.append((
            row["problem"], row["variant"],
            "-" if row["iters"] is None else str(row["iters"]),
            "-" if row["final_gap"] is None else f"{row['final_gap']:.3e}",
            "-" if row["final_grad"] is None else f"{row['final_grad']:.3e}",
            f"{row['cert_pass']}/{row['cert_fail']}",
            "-" if row["min_margin"] is None else f"{row['min_margin']:.3g}",
            "-" if row["local_order"] is None else f"{row['local_order']:.2f}",
            "-" if row["wall_ms"] is None else f"{row['wall_ms']:.1f}",
            row["status"],
        ))
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    bad = [row for row in rows if row["message"]]
    for row in bad:
        lines.append(f"note [{row['problem']}/{row['variant']}]: {row['message']}")
    lines.append(f"exit_code: {result.exit_code}")
    return "\n".join(lines) + "\n"


def _cmd_run(args):
    try:
        config = parse_config(args.config)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out_dir = args.out or os.environ.get("GRNM_OUT") or config.out or "runs"
    result = run_suite(config, out_dir=out_dir, jobs=args.jobs)
    sys.stdout.write(emit_report(result, args.format))
    return result.exit_code


def _cmd_validate_params(args):
    try:
        report = validate_assumptions(args.p, args.q, args.theta)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.format == "json":
        payload = {
            "p": report.p, "q": report.q, "theta": report.theta,
            "decrease_coeff": report.decrease_coeff,
            "growth_factor": report.growth_factor, "product": report.product,
            "ok_decrease": report.ok_decrease, "ok_growth": report.ok_growth,
            "ok_rate": report.ok_rate, "nu": report.nu, "ell": report.ell,
            "admissible": report.all_ok,
        }
        print(json.dumps(payload, indent=1))
    else:
        print(f"decrease_coeff  {report.decrease_coeff:.12g}  (positive: {report.ok_decrease})")
        print(f"growth_factor   {report.growth_factor:.12g}  (>= 1: {report.ok_growth})")
        print(f"theta*growth    {report.product:.12g}  (rate admissible: {report.ok_rate})")
        if report.nu is not None:
            print(f"envelope nu     {report.nu:.12g}  from k >= {report.ell}")
        print(f"admissible      {report.all_ok}")
    return EXIT_OK if report.all_ok else EXIT_CONFIG_ERROR


def _cmd_certify(args):
    try:
        with open(args.trajectory, "r", encoding="utf-8") as fh:
            trajectory = Trajectory.from_json_dict(json.load(fh))
        with open(args.problem, "r", encoding="utf-8") as fh:
            problem_spec = json.load(fh)
        oracle, _ = build_problem(problem_spec)
        cfg = trajectory.config
        theta = args.theta if args.theta is not None else cfg.get("theta")
        if theta is None:
            raise ValueError("trajectory carries no theta; pass --theta")
        sched = ScheduleConfig(p=float(cfg["p"]), c1=float(cfg["c1"]),
                               c2=float(cfg["c2"]), q=float(cfg["q"])).bind(oracle.n)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        report = certify_run(trajectory, sched, float(theta), oracle.metadata)
    except (ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.format == "json":
        print(json.dumps(report.to_json_dict(), indent=1))
    else:
        print(report.format_table())
    return EXIT_OK if report.passed else EXIT_CERT_FAILURE


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="grnm",
        description="Benchmark and certify the regularized Newton solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a problem/variant suite from a JSON config")
    p_run.add_argument("config", help="path to the suite config JSON")
    p_run.add_argument("--out", default=None, help="output directory (overrides GRNM_OUT)")
    p_run.add_argument("--jobs", type=int, default=None, help="parallel cells")
    p_run.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate-params", help="check a (p, q, theta) triple")
    p_val.add_argument("--p", type=float, required=True)
    p_val.add_argument("--q", type=float, required=True)
    p_val.add_argument("--theta", type=float, required=True)
    p_val.add_argument("--format", choices=("text", "json"), default="text")
    p_val.set_defaults(func=_cmd_validate_params)

    p_cert = sub.add_parser("certify", help="re-certify a stored trajectory")
    p_cert.add_argument("trajectory", help="trajectory.json produced by `grnm run`")
    p_cert.add_argument("--problem", required=True, help="problem spec JSON file")
    p_cert.add_argument("--theta", type=float, default=None)
    p_cert.add_argument("--format", choices=("text", "json"), default="text")
    p_cert.set_defaults(func=_cmd_certify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
