from __future__ import annotations

import argparse
import json
import logging
import os
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from src.audit.logger import RunEvent, read_run_event, write_run_event
from src.bounds.certificates import CERTIFICATE_NAMES, verify_trajectory_certificates
from src.bounds.evaluators import compute_bounds
from src.core.config import settings
from src.core.errors import (
    EXIT_CERTIFICATE_FAILURE,
    EXIT_OK,
    AppError,
    ConfigError,
    app_error_handler,
    unhandled_error_handler,
)
from src.core.logging_config import configure_logging
from src.experiment import run_experiment, run_nbody
from src.models.experiment_config import load_experiment_config, load_nbody_config
from src.storage.files import read_trajectory, trajectory_event_fields, write_nbody_run, write_trajectory

logger = logging.getLogger(__name__)


def _emit(payload: Dict[str, Any], as_json: bool, text: str) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _run_dir(args: argparse.Namespace, configured: Optional[str], run_id: str) -> str:
    return args.out or configured or os.path.join(settings.output_dir, run_id)


def _require_config(args: argparse.Namespace) -> str:
    if not args.config:
        raise ConfigError(f"{args.command} needs --config PATH")
    return args.config


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_experiment_config(_require_config(args))
    run = run_experiment(config)
    run_dir = _run_dir(args, config.output_dir, run.run_id)
    write_trajectory(run.trajectory, run_dir)
    event = RunEvent(
        event_id=run.run_id,
        timestamp=run.created_at,
        command="simulate",
        seed=run.seed,
        config=run.config,
        **trajectory_event_fields(run.trajectory),
    )
    write_run_event(event, run_dir)

    summary = {**run.summary(), "run_dir": run_dir}
    lines = [f"Run {run.run_id} written to {run_dir}"]
    lines += [f"  {key}: {value}" for key, value in summary.items() if key not in ("run_id", "run_dir")]
    _emit(summary, args.json, "\n".join(lines))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    run_dir = args.run_dir or args.out
    if not run_dir:
        raise ConfigError("verify needs a run directory (positional or --out)")
    event = read_run_event(run_dir)
    trajectory = read_trajectory(run_dir, event)
    toggles = event.config.get("certificates") or {}
    enabled = [name for name in CERTIFICATE_NAMES if toggles.get(name, True)]
    report = verify_trajectory_certificates(trajectory, enabled=enabled)
    _emit({"run_dir": run_dir, **report.to_dict()}, args.json, report.format_table())
    return EXIT_OK if report.passed else EXIT_CERTIFICATE_FAILURE


def cmd_bounds(args: argparse.Namespace) -> int:
    bounds = compute_bounds(args.a, args.d, args.alpha, var0=args.var0)
    payload = bounds.to_dict()
    text = bounds.format_table()
    if bounds.note:
        text += f"\n\nnote: {bounds.note}"
    # text mode prints the table followed by the same record as JSON
    text += "\n\n" + json.dumps(payload, indent=2, sort_keys=True)
    _emit(payload, args.json, text)
    return EXIT_OK


def cmd_nbody(args: argparse.Namespace) -> int:
    config = load_nbody_config(_require_config(args))
    run = run_nbody(config)
    run_id = f"nbody_{int(datetime.now().timestamp())}"
    run_dir = _run_dir(args, config.output_dir, run_id)
    write_nbody_run(run.phases, run.diagnostics, run_dir)
    write_run_event(
        RunEvent(
            event_id=run_id,
            timestamp=datetime.now(timezone.utc).isoformat(),
            command="nbody",
            seed=None,
            config=config.model_dump(mode="json"),
            stop_reason=run.stop_reason.value,
            integrator_meta=run.meta,
        ),
        run_dir,
    )

    first, last = run.diagnostics[0], run.diagnostics[-1]
    summary = {
        "run_dir": run_dir,
        "steps": len(run.phases) - 1,
        "stop_reason": run.stop_reason.value,
        "detail": run.detail,
        "initial": first.to_dict(),
        "final": last.to_dict(),
    }
    text = "\n".join(
        [
            f"N-body run written to {run_dir}",
            f"  steps: {summary['steps']} ({run.stop_reason.value}{', ' + run.detail if run.detail else ''})",
            f"  moment of inertia: {first.moment_of_inertia:.6g} -> {last.moment_of_inertia:.6g}",
            f"  potential: {first.potential:.6g} -> {last.potential:.6g}",
            f"  total momentum: {last.total_momentum}",
        ]
    )
    _emit(summary, args.json, text)
    return EXIT_OK


def _global_flags(parser: argparse.ArgumentParser, default: Any) -> None:
    parser.add_argument("--config", default=default, help="Path to a JSON experiment config")
    parser.add_argument("--out", default=default, help="Run directory to write (or read for verify)")
    parser.add_argument("--json", action="store_true", default=default, help="Print JSON instead of text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-lab",
        description="Nonlinear heat equation on complete graphs: simulate, certify, bound.",
    )
    _global_flags(parser, None)
    parser.set_defaults(json=False)

    # sub-level flags only override when given
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[shared], help="Evolve an opinion state from a config")
    simulate.set_defaults(handler=cmd_simulate)

    verify = sub.add_parser("verify", parents=[shared], help="Check every applicable certificate on a run")
    verify.add_argument("run_dir", nargs="?", default=None, help="Directory written by simulate")
    verify.set_defaults(handler=cmd_verify)

    bounds = sub.add_parser("bounds", parents=[shared], help="Evaluate the closed-form bounds")
    bounds.add_argument("--a", type=float, required=True, help="Lower bound a on the weights, in [0, 1]")
    bounds.add_argument("--d", type=int, required=True, help="Vertex count minus one")
    bounds.add_argument("--alpha", type=float, required=True, help="Kernel exponent in (0, 2)")
    bounds.add_argument("--var0", type=float, default=None, help="Initial variance for the consensus time")
    bounds.set_defaults(handler=cmd_bounds)

    nbody = sub.add_parser("nbody", parents=[shared], help="Run the phase-space n-body map from a config")
    nbody.set_defaults(handler=cmd_nbody)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()
    try:
        return args.handler(args)
    except AppError as exc:
        logger.warning("command_failed command=%s code=%s", args.command, exc.code)
        return app_error_handler(exc)
    except Exception as exc:  # noqa: BLE001
        return unhandled_error_handler(exc)


if __name__ == "__main__":
    raise SystemExit(main())
