"""Command-line front door for steering, compilation, application and verification.

Exit codes: 0 success, 2 invalid input, 3 tolerance unmet (outputs are still
written), 4 resource cap hit. Nothing is written on exit 2 or 4.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import pandas as pd

from app.core.config import AppConfig
from app.core.errors import InvalidInput, ShiftKrausError, ToleranceUnmet
from app.core.lifecycle import Runtime, load_runtime
from app.core.utils import parse_dims
from app.services.generators import apply_program
from app.services.kraus_synthesis import steer_density
from app.services.serialization import (
    dumps,
    parse_density,
    parse_program,
    parse_state,
    parse_unitary,
    read_json,
    serialize_density,
    serialize_program,
    serialize_state,
    write_csv,
    write_json,
)
from app.services.unitary_synthesis import compile_unitary, steer_state
from app.services.verification import (
    bench,
    negative_control,
    net_coverage_oracle,
    universality_sweep,
)

log = logging.getLogger(__name__)

MIN_WINDOW_CAP = 16
DEFAULT_VERIFY_EPS = 1e-9


@dataclass
class JobConfig:
    """Validated flags of one invocation, with configured defaults filled in."""

    subcommand: str
    paths: Dict[str, Optional[str]]
    eps: float
    dims: List[int] = field(default_factory=list)
    trials: int = 10
    seed: int = 0
    window_cap: int = 4096
    workers: int = 4
    wall_time: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    REQUIRED = {
        "steer-state": ("source", "target", "out"),
        "steer-density": ("source", "target", "out"),
        "compile-unitary": ("matrix", "out"),
        "apply": ("program", "input", "out"),
        "verify": (),
        "bench": ("csv",),
    }

    def __post_init__(self):
        for slot in self.REQUIRED.get(self.subcommand, ()):
            if not self.paths.get(slot):
                raise InvalidInput(f"--{slot} is required for {self.subcommand}")
        if not 0.0 < self.eps < 1.0:
            raise InvalidInput(f"--eps must lie in (0, 1), got {self.eps!r}")
        if self.window_cap < MIN_WINDOW_CAP:
            raise InvalidInput(f"--window-cap must be at least {MIN_WINDOW_CAP}, got {self.window_cap}")
        if self.trials < 1:
            raise InvalidInput(f"--trials must be positive, got {self.trials}")
        if self.seed < 0:
            raise InvalidInput(f"--seed must be non-negative, got {self.seed}")

    def path(self, slot: str) -> Optional[str]:
        return self.paths.get(slot)

    @classmethod
    def from_args(cls, args: argparse.Namespace, cfg: AppConfig) -> "JobConfig":
        if args.eps is not None:
            eps = args.eps
        elif args.command == "compile-unitary":
            eps = cfg.tolerance("compile_eps")
        elif args.command in ("steer-state", "steer-density"):
            raise InvalidInput(f"--eps is required for {args.command}")
        else:
            eps = DEFAULT_VERIFY_EPS
        dims: List[int] = []
        if getattr(args, "dims", None):
            try:
                dims = parse_dims(args.dims)
            except ValueError as exc:
                raise InvalidInput(f"--dims: {exc}") from exc
        paths = {
            slot: getattr(args, slot, None)
            for slot in ("source", "target", "input", "matrix", "program", "out", "csv")
        }
        window_cap = args.window_cap if args.window_cap is not None else cfg.limit("window_cap")
        workers = args.workers if args.workers is not None else cfg.get("verification", "max_workers", default=4)
        wall_time = bool(args.wall_time or cfg.get("reports", "wall_time", default=False))
        extra = {
            key: getattr(args, key)
            for key in ("suite", "kind", "target_index", "word_length", "grid", "max_length")
            if getattr(args, key, None) is not None
        }
        return cls(
            subcommand=args.command,
            paths=paths,
            eps=float(eps),
            dims=dims,
            trials=getattr(args, "trials", 10),
            seed=getattr(args, "seed", 0),
            window_cap=int(window_cap),
            workers=int(workers),
            wall_time=wall_time,
            extra=extra,
        )


def _emit(
    job: JobConfig,
    report: Dict[str, Any],
    *,
    outputs: Optional[Dict[str, Dict[str, Any]]] = None,
    frames: Optional[Dict[str, pd.DataFrame]] = None,
    failure: Optional[ToleranceUnmet] = None,
) -> int:
    for path, payload in (outputs or {}).items():
        write_json(payload, path)
    for path, frame in (frames or {}).items():
        write_csv(frame, path)
    sys.stdout.write(dumps(report))
    if failure is not None:
        print(f"Error: {failure}", file=sys.stderr)
        return failure.exit_code
    return 0


def _tolerance_failure(error: float, eps: float) -> Optional[ToleranceUnmet]:
    if error > eps:
        return ToleranceUnmet(f"achieved error {error:.3e} exceeds eps {eps:.3e}", residual=error)
    return None


def _run_steer_state(job: JobConfig, runtime: Runtime) -> int:
    tolerance = runtime.config.tolerance("structural")
    source = parse_state(read_json(job.path("source")), window_cap=job.window_cap, tolerance=tolerance)
    target = parse_state(read_json(job.path("target")), window_cap=job.window_cap, tolerance=tolerance)
    seq, report = steer_state(source, target, job.eps, window_cap=job.window_cap)
    return _emit(
        job,
        report.as_dict(include_wall_time=job.wall_time),
        outputs={job.path("out"): serialize_program(seq)},
        failure=_tolerance_failure(report.final_error, job.eps),
    )


def _run_steer_density(job: JobConfig, runtime: Runtime) -> int:
    tolerance = runtime.config.tolerance("structural")
    rho = parse_density(read_json(job.path("source")), window_cap=job.window_cap, tolerance=tolerance)
    sigma = parse_density(read_json(job.path("target")), window_cap=job.window_cap, tolerance=tolerance)
    program, report = steer_density(
        rho,
        sigma,
        job.eps,
        window_cap=job.window_cap,
        rank_tol=runtime.config.tolerance("rank"),
        tolerance=tolerance,
    )
    return _emit(
        job,
        report.as_dict(include_wall_time=job.wall_time),
        outputs={job.path("out"): serialize_program(program)},
        failure=_tolerance_failure(report.final_error, job.eps),
    )


def _run_compile_unitary(job: JobConfig, runtime: Runtime) -> int:
    matrix, window = parse_unitary(read_json(job.path("matrix")), window_cap=job.window_cap)
    seq, report = compile_unitary(
        matrix,
        window,
        job.eps,
        window_cap=job.window_cap,
        tolerance=runtime.config.tolerance("structural"),
    )
    return _emit(
        job,
        report.as_dict(include_wall_time=job.wall_time),
        outputs={job.path("out"): serialize_program(seq)},
        failure=_tolerance_failure(report.final_error, job.eps),
    )


def _run_apply(job: JobConfig, runtime: Runtime) -> int:
    tolerance = runtime.config.tolerance("structural")
    program = parse_program(read_json(job.path("program")))
    payload = read_json(job.path("input"))
    kind = job.extra.get("kind")
    if kind is None:
        kind = "state" if isinstance(payload, dict) and "amplitudes" in payload else "density"
    if kind == "state":
        value = parse_state(payload, window_cap=job.window_cap, tolerance=tolerance)
    else:
        value = parse_density(payload, window_cap=job.window_cap, tolerance=tolerance)
    result = apply_program(
        value,
        program,
        window_cap=job.window_cap,
        program_cap=runtime.config.limit("program_cap"),
        tolerance=tolerance,
    )
    serialized = serialize_state(result) if kind == "state" else serialize_density(result)
    summary = {"kind": kind, "items": len(program), "stage_count": len(program.stages)}
    return _emit(job, summary, outputs={job.path("out"): serialized})


def _verify_universality(job: JobConfig, runtime: Runtime) -> int:
    kind = job.extra.get("kind", "state")
    if not job.dims:
        raise InvalidInput("--dims is required for the universality suite")
    result = universality_sweep(
        kind,
        job.dims,
        job.trials,
        job.eps,
        job.seed,
        max_workers=job.workers,
        window_cap=job.window_cap,
        max_state_dim=runtime.config.limit("max_state_dim"),
        max_density_dim=runtime.config.limit("max_density_dim"),
        check_intermediates=kind == "density",
        intermediate_tol=runtime.config.tolerance("intermediate"),
        record_wall_time=job.wall_time,
    )
    report = result.as_dict()
    failure = None
    if not result.passed:
        failed = result.failures[0]
        failure = ToleranceUnmet(
            f"{len(result.failures)} trial(s) above eps {job.eps:.3e}; first at dim "
            f"{failed['dim']} trial {failed['trial']} seed {failed['seed']}",
            residual=result.max_error,
        )
    return _emit(
        job,
        report,
        outputs={job.path("out"): report} if job.path("out") else None,
        frames={job.path("csv"): result.rows} if job.path("csv") else None,
        failure=failure,
    )


def _verify_negative(job: JobConfig, runtime: Runtime) -> int:
    report = negative_control(
        job.extra.get("target_index", 2),
        job.extra.get("word_length", 10_000),
        job.seed,
        window_cap=job.window_cap,
    )
    payload = report.as_dict()
    failure = None
    if not report.passed:
        failure = ToleranceUnmet(
            "U(2)-only words reached outside span{e_0, e_1}",
            residual=max(report.u2_only_fidelity, report.complement_drift),
        )
    return _emit(
        job,
        payload,
        outputs={job.path("out"): payload} if job.path("out") else None,
        failure=failure,
    )


def _verify_coverage(job: JobConfig, runtime: Runtime) -> int:
    cfg = runtime.config
    table = net_coverage_oracle(
        job.extra.get("grid", 16),
        job.extra.get("max_length", 4),
        samples=int(cfg.get("verification", "coverage_samples", default=512)),
        node_cap=cfg.limit("coverage_node_cap"),
        max_grid=cfg.limit("max_coverage_grid"),
        max_length=cfg.limit("max_coverage_word_length"),
    )
    payload = table.as_dict()
    failure = None
    if not table.monotone:
        failure = ToleranceUnmet("covering radius increased with word length")
    return _emit(
        job,
        payload,
        outputs={job.path("out"): payload} if job.path("out") else None,
        frames={job.path("csv"): table.to_frame()} if job.path("csv") else None,
        failure=failure,
    )


_SUITES: Dict[str, Callable[[JobConfig, Runtime], int]] = {
    "universality": _verify_universality,
    "negative": _verify_negative,
    "coverage": _verify_coverage,
}


def _run_verify(job: JobConfig, runtime: Runtime) -> int:
    return _SUITES[job.extra.get("suite", "universality")](job, runtime)


def _run_bench(job: JobConfig, runtime: Runtime) -> int:
    if not job.dims:
        raise InvalidInput("--dims is required for bench")
    frame = bench(
        job.dims,
        job.eps,
        job.trials,
        job.seed,
        kind=job.extra.get("kind", "state"),
        max_workers=job.workers,
        window_cap=job.window_cap,
        max_state_dim=runtime.config.limit("max_state_dim"),
        max_density_dim=runtime.config.limit("max_density_dim"),
        record_wall_time=job.wall_time,
    )
    summary = {
        "rows": int(len(frame)),
        "max_error": float(frame["final_error"].max()),
        "mean_op_count": float(frame["op_count"].mean()),
    }
    return _emit(job, summary, frames={job.path("csv"): frame})


_HANDLERS: Dict[str, Callable[[JobConfig, Runtime], int]] = {
    "steer-state": _run_steer_state,
    "steer-density": _run_steer_density,
    "compile-unitary": _run_compile_unitary,
    "apply": _run_apply,
    "verify": _run_verify,
    "bench": _run_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--data-dir",
        help="Directory holding config.yaml and logs. Defaults to SHIFTKRAUS_DATA or the package data folder.",
    )
    common.add_argument("--window-cap", type=int, help="Largest window length (default from config).")
    common.add_argument("--eps", type=float, help="Target error in (0, 1).")
    common.add_argument("--out", help="Output JSON path.")
    common.add_argument(
        "--wall-time",
        action="store_true",
        help="Record measured wall time in outputs instead of 0.0.",
    )
    common.add_argument("--workers", type=int, help="Thread pool size for sweeps.")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--dims", help="Dimensions as a comma list (2,4,8) or inclusive range (2:6).")
    seeded.add_argument("--trials", type=int, default=10, help="Trials per dimension.")
    seeded.add_argument("--seed", type=int, default=0, help="Root seed for all random draws.")
    seeded.add_argument("--csv", help="Per-trial CSV output path.")
    seeded.add_argument("--kind", choices=("state", "density"), default="state")

    parser = argparse.ArgumentParser(
        prog="shiftkraus",
        description="Steer states and density operators with shift, U(2) and projection generators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, noun in (("steer-state", "state"), ("steer-density", "density")):
        steer = sub.add_parser(name, parents=[common], help=f"Synthesize a program steering one {noun} to another.")
        steer.add_argument("--source", required=True, help=f"Source {noun} JSON.")
        steer.add_argument("--target", required=True, help=f"Target {noun} JSON.")

    compile_cmd = sub.add_parser("compile-unitary", parents=[common], help="Compile a dense unitary.")
    compile_cmd.add_argument("--matrix", required=True, help="Unitary JSON.")

    apply_cmd = sub.add_parser("apply", parents=[common], help="Apply a program to a state or density.")
    apply_cmd.add_argument("--program", required=True, help="Program JSON.")
    apply_cmd.add_argument("--input", required=True, help="State or density JSON.")
    apply_cmd.add_argument("--kind", choices=("state", "density"), help="Input kind (inferred when omitted).")

    verify = sub.add_parser("verify", parents=[common, seeded], help="Run a certification suite.")
    verify.add_argument("--suite", choices=tuple(_SUITES), default="universality")
    verify.add_argument("--target-index", type=int, help="Negative control target index (default 2).")
    verify.add_argument("--word-length", type=int, help="Negative control word length (default 10000).")
    verify.add_argument("--grid", type=int, help="Coverage oracle grid steps (default 16).")
    verify.add_argument("--max-length", type=int, help="Coverage oracle word length (default 4).")

    sub.add_parser("bench", parents=[common, seeded], help="Tabulate sequence lengths per dimension.")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        runtime = load_runtime(args.data_dir)
        job = JobConfig.from_args(args, runtime.config)
        return _HANDLERS[job.subcommand](job, runtime)
    except ShiftKrausError as exc:
        log.info("%s failed: %s", args.command, exc)
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover - manual entry point
    raise SystemExit(main())
