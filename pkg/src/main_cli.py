"""Command-line interface for pivkit.

Subcommands:
    piv       PIV at point beliefs about both unobserved means
    bound     Lower and upper PIV over the belief rectangle
    invert    Unobserved-mean threshold for a target PIV
    table     Threshold table over a range of PIV levels
    grid      PIV contour grid over the plausible region
    power     Null and alternative densities with the PIV shaded
    simulate  Monte Carlo check of the closed-form PIV
    report    Eight-step robustness report

Inputs come from a JSON study-config (``--config``) and per-field flags that
override it. Exit status: 0 success, 1 I/O error, 2 invalid input, 3
saturation or other degenerate math.

Example:
    PYTHONPATH=$(pwd) python3 -m src.main_cli piv --config data/hong2005.json \\
        --treated-un 45.78 --control-un 45.2
"""

import argparse
import json
import logging
import os
import platform
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
from pydantic import ValidationError

from src import __version__
from src.analysis.piv import (
    bound_piv,
    invert_for_control_un,
    invert_for_treated_un,
    piv,
)
from src.domain.errors import (
    AmbiguousDirectionError,
    ContractError,
    DomainError,
    SaturationError,
    StudyValidationError,
)
from src.domain.schemas import (
    CounterfactualBelief,
    EffectDirection,
    PlausibleRegion,
    SimConfig,
    SimulationMode,
    StudyConfig,
    TabularDataset,
)
from src.domain.study import observed_significance, parse_config, read_config_payload, resolve_direction
from src.reports.grid import emit_contour_grid, emit_power_figure_data, emit_threshold_table
from src.reports.report import DEFAULT_BAND, DEFAULT_CUTOFF, build_report
from src.reports.writers import dataset_to_csv, dataset_to_json, render_svg, to_jsonable, write_text
from src.simulation.oracle import simulate_piv, simulate_power_curves

logger = logging.getLogger("pivkit")

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_DEGENERATE = 3

SEED_ENV = "PIVKIT_SEED"
WORKERS_ENV = "PIVKIT_WORKERS"

STUDY_FLAGS = ("mean_treated_obs", "mean_control_obs", "var_treated", "var_control", "n_obs", "prop_treated")


def _number(text: str, field: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise StudyValidationError(field, f"expected a number, got {text!r}") from exc


def parse_range(text: str, field: str) -> Tuple[Optional[float], Optional[float]]:
    """Parse "lo:hi"; either side may be empty for a one-sided belief."""
    lo, sep, hi = text.partition(":")
    if not sep:
        raise StudyValidationError(field, f"expected lo:hi, got {text!r}")
    return (_number(lo, field) if lo else None, _number(hi, field) if hi else None)


def parse_levels(text: str, field: str = "levels") -> List[float]:
    """Parse "start:stop:step" (stop included) or a comma-separated list.

    Example:
        >>> parse_levels("0.1:0.9:0.1")
        [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    """
    if ":" not in text:
        return [_number(part, field) for part in text.split(",") if part.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise StudyValidationError(field, f"expected start:stop:step, got {text!r}")
    start, stop, step = (_number(part, field) for part in parts)
    if step <= 0 or stop < start:
        raise StudyValidationError(field, "step must be positive and stop must not precede start")
    count = int(round((stop - start) / step)) + 1
    # Rounding keeps 0.1 + 2 * 0.1 printing as 0.3.
    return [round(start + i * step, 12) for i in range(count)]


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise StudyValidationError(name, f"expected an integer, got {raw!r}") from exc


def resolve_config(args: argparse.Namespace) -> StudyConfig:
    """Merge the config file with the flag overrides and validate the result.

    Raises:
        OSError: If the config file cannot be read.
        StudyValidationError: If the merged inputs are invalid.
    """
    payload: Dict[str, Any] = read_config_payload(args.config) if args.config else {}
    study = dict(payload.get("study") or {})
    for name in STUDY_FLAGS:
        value = getattr(args, name)
        if value is not None:
            study[name] = value
    payload["study"] = study

    belief = dict(payload.get("belief") or {})
    for name in ("treated_un", "control_un"):
        point = getattr(args, name)
        span = getattr(args, f"{name}_range")
        if point is not None:
            belief[name] = {"point": point}
        elif span is not None:
            lower, upper = parse_range(span, f"{name}_range")
            belief[name] = {"lower": lower, "upper": upper}
    if belief:
        payload["belief"] = belief

    if args.threshold_fixed is not None:
        payload["threshold"] = {"fixed": args.threshold_fixed}
    elif args.alpha is not None or args.critical is not None or args.one_sided:
        current = payload.get("threshold") or {}
        statistical = dict(current.get("statistical") or {}) if isinstance(current, dict) else {}
        if args.alpha is not None:
            statistical["alpha"] = args.alpha
        if args.critical is not None:
            statistical["critical"] = args.critical
        if args.one_sided:
            statistical["sides"] = 1
        payload["threshold"] = {"statistical": statistical}

    if args.direction is not None:
        payload["direction"] = args.direction
    return parse_config(payload)


def _point(config: StudyConfig, name: str) -> float:
    belief = config.belief
    value = getattr(belief, name) if belief is not None else None
    if value is None or not value.is_point:
        raise StudyValidationError(name, f"a point value is required; pass --{name.replace('_', '-')}")
    return value.lower


def _belief(config: StudyConfig) -> CounterfactualBelief:
    if config.belief is None:
        raise StudyValidationError("belief", "beliefs about treated_un and control_un are required")
    return config.belief


def _direction(config: StudyConfig, check_significance: bool = True) -> EffectDirection:
    """Resolve the direction to defend, warning first if the observed result is not significant."""
    if check_significance:
        observed_significance(config.study, config.threshold)
    return resolve_direction(config.study, config.direction, config.threshold)


def _probability(value: float, field: str) -> float:
    """Reject PIV targets outside [0, 1]; exactly 0 or 1 is left to the engine to report as saturated."""
    if not 0.0 <= value <= 1.0:
        raise StudyValidationError(field, f"must lie in [0, 1], got {value}")
    return value


def _provenance(args: argparse.Namespace, seed: Optional[int] = None) -> Dict[str, Any]:
    provenance = {
        "command": args.command,
        "pivkit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }
    if seed is not None:
        provenance["seed"] = seed
    return provenance


def _dump(payload: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def _text_block(rows: Sequence[Tuple[str, Any]]) -> str:
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label.ljust(width)}  {_fmt(value)}" for label, value in rows) + "\n"


def _inputs_text(config: StudyConfig) -> str:
    study = config.study
    text = (
        f"study: mean_treated_obs={study.mean_treated_obs:.4g} mean_control_obs={study.mean_control_obs:.4g} "
        f"var_treated={study.var_treated:.4g} var_control={study.var_control:.4g} "
        f"n_obs={study.n_obs} prop_treated={study.prop_treated:.4g}\n"
    )
    threshold = config.threshold
    if threshold.is_statistical:
        text += f"threshold: statistical, critical={threshold.critical:.4g}, sides={threshold.sides}\n"
    else:
        text += f"threshold: fixed, value={threshold.value:.4g}\n"
    return text


def _emit(text: str, args: argparse.Namespace) -> None:
    if args.out:
        write_text(text, args.out)
    else:
        sys.stdout.write(text)


def _emit_dataset(dataset: TabularDataset, config: StudyConfig, args: argparse.Namespace, seed: Optional[int] = None) -> None:
    dataset.metadata["provenance"] = _provenance(args, seed)
    if args.output == "json":
        _emit(dataset_to_json(dataset), args)
    elif args.output == "svg":
        try:
            svg = render_svg(dataset)
        except ValueError as exc:
            raise StudyValidationError("output", f"svg is only available for grid and power, not {args.command}") from exc
        _emit(svg, args)
    elif args.output == "csv":
        _emit(dataset_to_csv(dataset), args)
    else:
        body = dataset.frame.to_string(index=False, float_format=lambda v: f"{v:.4g}")
        _emit(_inputs_text(config) + body + "\n", args)


def _emit_record(
    config: StudyConfig,
    args: argparse.Namespace,
    result: Dict[str, Any],
    rows: Sequence[Tuple[str, Any]],
    seed: Optional[int] = None,
) -> None:
    if args.output == "json":
        payload = {
            "inputs": config.model_dump(mode="json"),
            "provenance": _provenance(args, seed),
            "result": result,
        }
        _emit(_dump(payload), args)
    elif args.output == "text":
        _emit(_inputs_text(config) + _text_block(rows), args)
    else:
        raise StudyValidationError("output", f"{args.output} is not available for {args.command}; use text or json")


def cmd_piv(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    result = piv(config.study, _point(config, "treated_un"), _point(config, "control_un"), config.threshold, direction)
    _emit_record(config, args, result.model_dump(mode="json"), [
        ("treated_un", result.treated_un),
        ("control_un", result.control_un),
        ("direction", result.direction.value),
        ("threshold", result.threshold_value),
        ("delta_hat_ideal", result.delta_hat_ideal),
        ("se_ideal", result.se_ideal),
        ("t_ratio", result.t_ratio),
        ("probit", result.probit_value),
        ("PIV", result.piv),
    ])


def cmd_bound(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    bounds = bound_piv(config.study, _belief(config), config.threshold, direction)
    rows = [("direction", direction.value), ("threshold", bounds.lower.threshold_value)]
    for side, result in (("lower", bounds.lower), ("upper", bounds.upper)):
        corner = "unconstrained" if result.saturated else f"(treated_un {_fmt(result.treated_un)}, control_un {_fmt(result.control_un)})"
        rows.append((f"{side} PIV", result.piv))
        rows.append((f"{side} corner", corner))
    _emit_record(config, args, bounds.model_dump(mode="json"), rows)


def cmd_invert(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    target = _probability(args.target, "target")
    if args.solve_for == "treated_un":
        fixed_name, fixed = "control_un", _point(config, "control_un")
        value, delta = invert_for_treated_un(config.study, fixed, target, config.threshold, direction)
    else:
        fixed_name, fixed = "treated_un", _point(config, "treated_un")
        value, delta = invert_for_control_un(config.study, fixed, target, config.threshold, direction)
    result = {
        "target_piv": args.target,
        "solve_for": args.solve_for,
        fixed_name: fixed,
        f"{args.solve_for}_threshold": value,
        "delta_hat_ideal": delta,
        "direction": direction.value,
    }
    _emit_record(config, args, result, [
        ("target PIV", args.target),
        (fixed_name, fixed),
        (f"{args.solve_for} threshold", value),
        ("delta_hat_ideal", delta),
    ])


def cmd_table(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    levels = [_probability(level, "levels") for level in parse_levels(args.levels)]
    dataset = emit_threshold_table(config.study, _point(config, "control_un"), levels, config.threshold, direction)
    _emit_dataset(dataset, config, args)


def _region(config: StudyConfig, resolution: int) -> PlausibleRegion:
    belief = _belief(config)
    ranges = {}
    for name in ("treated_un", "control_un"):
        value = getattr(belief, name)
        if value.lower is None or value.upper is None:
            raise StudyValidationError(f"{name}_range", "the grid needs finite lower and upper endpoints")
        ranges[f"{name}_range"] = (value.lower, value.upper)
    return PlausibleRegion(resolution=resolution, **ranges)


def cmd_grid(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    dataset = emit_contour_grid(config.study, _region(config, args.resolution), config.threshold, direction)
    _emit_dataset(dataset, config, args)


def cmd_power(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    dataset = emit_power_figure_data(
        config.study, _point(config, "treated_un"), _point(config, "control_un"), config.threshold, direction
    )
    _emit_dataset(dataset, config, args)


def cmd_simulate(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config)
    seed = args.seed if args.seed is not None else _env_int(SEED_ENV, SimConfig().seed)
    workers = args.workers if args.workers is not None else _env_int(WORKERS_ENV, 1)
    modes = list(SimulationMode) if args.mode == "both" else [SimulationMode(args.mode)]

    def sim_config(mode: SimulationMode) -> SimConfig:
        return SimConfig(n_replications=args.replications, seed=seed, mode=mode, workers=workers)

    if args.treated_un_grid:
        grid = parse_levels(args.treated_un_grid, "treated_un_grid")
        dataset = simulate_power_curves(
            config.study,
            _point(config, "control_un"),
            grid,
            config.threshold,
            direction,
            [sim_config(mode) for mode in modes],
        )
        _emit_dataset(dataset, config, args, seed)
        return

    treated_un, control_un = _point(config, "treated_un"), _point(config, "control_un")
    results = [
        simulate_piv(config.study, treated_un, control_un, config.threshold, direction, sim_config(mode))
        for mode in modes
    ]
    rows: List[Tuple[str, Any]] = [("closed-form PIV", results[0].closed_form), ("replications", args.replications)]
    for sim in results:
        rows.append((f"{sim.mode.value} PIV", sim.piv_hat))
        rows.append((f"{sim.mode.value} MC stderr", sim.mc_stderr))
        rows.append((f"{sim.mode.value} within 3 se", sim.agrees(3.0)))
    payload = {sim.mode.value: {**sim.model_dump(mode="json"), "within_3se": sim.agrees(3.0)} for sim in results}
    _emit_record(config, args, payload, rows, seed)


def cmd_report(config: StudyConfig, args: argparse.Namespace) -> None:
    direction = _direction(config, check_significance=False)
    report = build_report(config.study, _belief(config), config.threshold, direction, args.cutoff, args.band)
    if args.output == "text":
        _emit(report.narrative, args)
    else:
        _emit_record(config, args, report.model_dump(mode="json"), [])


COMMANDS = {
    "piv": cmd_piv,
    "bound": cmd_bound,
    "invert": cmd_invert,
    "table": cmd_table,
    "grid": cmd_grid,
    "power": cmd_power,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON study-config file")
    common.add_argument("--output", choices=["text", "json", "csv", "svg"], default="text")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    study = common.add_argument_group("study overrides")
    for name in STUDY_FLAGS:
        study.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int if name == "n_obs" else float)

    belief = common.add_argument_group("belief overrides")
    belief.add_argument("--treated-un", type=float, help="point belief about the unobserved treated mean")
    belief.add_argument("--control-un", type=float, help="point belief about the unobserved control mean")
    belief.add_argument("--treated-un-range", help="interval belief lo:hi (either side may be empty)")
    belief.add_argument("--control-un-range", help="interval belief lo:hi (either side may be empty)")

    threshold = common.add_argument_group("threshold overrides")
    threshold.add_argument("--threshold-fixed", type=float, help="fixed decision threshold in outcome units")
    threshold.add_argument("--alpha", type=float, help="significance level of the statistical threshold")
    threshold.add_argument("--critical", type=float, help="critical value of the statistical threshold")
    threshold.add_argument("--one-sided", action="store_true", help="one-sided statistical threshold")
    threshold.add_argument("--direction", choices=["auto", "positive", "negative"])
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per analysis."""
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="pivkit",
        description="Probability that a causal inference is robust for internal validity (PIV)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("piv", parents=[common], help="PIV at point beliefs")
    sub.add_parser("bound", parents=[common], help="PIV bounds over the belief rectangle")

    invert = sub.add_parser("invert", parents=[common], help="unobserved-mean threshold for a target PIV")
    invert.add_argument("--target", type=float, required=True, help="target PIV in (0, 1)")
    invert.add_argument("--solve-for", choices=["treated_un", "control_un"], default="treated_un")

    table = sub.add_parser("table", parents=[common], help="threshold table over PIV levels")
    table.add_argument("--levels", default="0.1:0.9:0.1", help="start:stop:step or a comma-separated list")

    grid = sub.add_parser("grid", parents=[common], help="PIV contour grid")
    grid.add_argument("--resolution", type=int, default=PlausibleRegion().resolution)

    sub.add_parser("power", parents=[common], help="power-figure densities")

    simulate = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of the PIV")
    simulate.add_argument("--replications", type=int, default=SimConfig().n_replications)
    simulate.add_argument("--mode", choices=["estimator", "individuals", "both"], default="estimator")
    simulate.add_argument("--seed", type=int, help=f"root seed (default ${SEED_ENV} or {SimConfig().seed})")
    simulate.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    simulate.add_argument("--treated-un-grid", help="simulate a power curve over start:stop:step of treated_un")

    report = sub.add_parser("report", parents=[common], help="eight-step robustness report")
    report.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF)
    report.add_argument("--band", type=float, default=DEFAULT_BAND)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return the process exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config, args)
    except (StudyValidationError, AmbiguousDirectionError) as exc:
        logger.error(f"Invalid input: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        logger.error(f"Invalid input: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SaturationError, DomainError, ContractError) as exc:
        logger.error(f"Degenerate computation: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        logger.error(f"I/O failure: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        logger.exception(f"Unexpected failure in {args.command}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
