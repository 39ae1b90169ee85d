"""Fold, steer and compile with the shift and U(2) generators only.

Folding walks the support of a vector down onto e_0: every step merges the
amplitudes at indices 0 and 1 into index 1 with one U(2) block and shifts
the whole vector down by one. Steering composes the fold of the source with
the inverted fold of the target. Dense unitaries are compiled by eliminating
each column with adjacent two-level rotations, each carried onto its pair by
shift conjugation.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

import numpy as np

from app.core.errors import InvalidInput, NotInvertible, NotUnitary
from app.core.hilbert import (
    DEFAULT_WINDOW_CAP,
    STRUCTURAL_TOL,
    StateVector,
    Window,
    basis_state,
    state_fidelity,
)
from app.services.generators import (
    GeneratorSequence,
    KrausStage,
    Shift,
    U2At01,
    U2Params,
    UnitaryOp,
    apply_program,
    apply_unitary,
    conjugated_u2,
    fuse_shifts,
    materialize,
    u2_params_from_matrix,
)

log = logging.getLogger(__name__)

MERGE_SKIP = 1e-14
PHASE_SKIP = 1e-12
COMPILE_EPS = 1e-10


@dataclass(frozen=True)
class SynthesisReport:
    """Metrics of one synthesis run."""

    final_error: float
    op_count: int
    u2_count: int
    shift_count: int
    wall_time: float
    stage_count: int = 0

    @classmethod
    def for_items(cls, items, final_error: float, started: float) -> "SynthesisReport":
        items = list(items)
        return cls(
            final_error=max(0.0, float(final_error)),
            op_count=sum(1 for item in items if not isinstance(item, KrausStage)),
            u2_count=sum(1 for item in items if isinstance(item, U2At01)),
            shift_count=sum(1 for item in items if isinstance(item, Shift)),
            wall_time=time.perf_counter() - started,
            stage_count=sum(1 for item in items if isinstance(item, KrausStage)),
        )

    def as_dict(self, *, include_wall_time: bool = False) -> Dict[str, object]:
        return {
            "final_error": self.final_error,
            "op_count": self.op_count,
            "u2_count": self.u2_count,
            "shift_count": self.shift_count,
            "stage_count": self.stage_count,
            "wall_time_s": self.wall_time if include_wall_time else 0.0,
        }


def check_eps(eps: float) -> float:
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not 0.0 < eps < 1.0:
        raise InvalidInput(f"eps must lie in (0, 1), got {eps!r}")
    return float(eps)


def truncate_support(a: StateVector, budget: float) -> StateVector:
    """Drop boundary amplitudes while the discarded squared mass stays within ``budget``.

    The lighter end is trimmed first. The kept block is renormalized, so its
    fidelity with ``a`` is √(1 − dropped mass).
    """

    weights = np.abs(a.amps) ** 2
    lo, hi = 0, weights.size - 1
    dropped = 0.0
    while lo < hi:
        take_left = weights[lo] <= weights[hi]
        mass = float(weights[lo] if take_left else weights[hi])
        if dropped + mass > budget:
            break
        dropped += mass
        if take_left:
            lo += 1
        else:
            hi -= 1
    if lo == 0 and hi == weights.size - 1:
        return a
    kept = a.amps[lo : hi + 1]
    return StateVector(a.offset + lo, kept / np.linalg.norm(kept))


def merge_rotation(a0: complex, a1: complex) -> U2Params | None:
    """Return the block sending a0·e_0 + a1·e_1 to r·e_1 with r = √(|a0|² + |a1|²).

    ``None`` means both amplitudes are negligible and the merge is skipped.
    """

    r = math.hypot(abs(a0), abs(a1))
    if r < MERGE_SKIP:
        return None
    block = np.array([[a1, -a0], [np.conj(a0), np.conj(a1)]], dtype=np.complex128) / r
    return u2_params_from_matrix(block)


def fold_to_e0(
    a: StateVector, eps: float, *, window_cap: int = DEFAULT_WINDOW_CAP
) -> Tuple[GeneratorSequence, SynthesisReport]:
    """Return a sequence carrying ``a`` onto e_0 with a real non-negative amplitude."""

    eps = check_eps(eps)
    started = time.perf_counter()
    kept = truncate_support(a, eps / 4.0)
    ops: List[UnitaryOp] = []
    if kept.offset != 0:
        ops.append(Shift(-kept.offset))
    current = StateVector(0, kept.amps)
    current.window.check_cap(window_cap)

    for _ in range(kept.amps.size - 1):
        params = merge_rotation(current.amplitude(0), current.amplitude(1))
        if params is not None:
            ops.append(U2At01(params))
            current = apply_unitary(current, ops[-1], window_cap=window_cap)
        ops.append(Shift(-1))
        current = apply_unitary(current, ops[-1], window_cap=window_cap)

    phase = float(np.angle(current.amplitude(0)))
    if abs(phase) > PHASE_SKIP:
        ops.append(U2At01(U2Params(0.0, 0.0, 0.0, -phase)))

    seq = GeneratorSequence(fuse_shifts(ops))
    landed = apply_program(a, seq, window_cap=window_cap)
    report = SynthesisReport.for_items(
        seq, 1.0 - state_fidelity(landed, basis_state(0)), started
    )
    log.debug(
        "Folded support of %s onto e_0 (ops=%s, error=%.3e)",
        a.amps.size,
        report.op_count,
        report.final_error,
    )
    return seq, report


def invert(seq: Iterable) -> GeneratorSequence:
    """Return the inverse word: reversed order, each generator replaced by its inverse."""

    inverted: List[UnitaryOp] = []
    for index, item in enumerate(seq):
        if isinstance(item, KrausStage):
            raise NotInvertible(f"items[{index}] is a Kraus stage")
        if not isinstance(item, (Shift, U2At01)):
            raise NotInvertible(f"items[{index}] is not a unitary generator")
        inverted.append(item.inverse())
    inverted.reverse()
    return GeneratorSequence(inverted)


def steer_state(
    source: StateVector,
    target: StateVector,
    eps: float,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> Tuple[GeneratorSequence, SynthesisReport]:
    """Return a sequence taking ``source`` to ``target`` including global phase."""

    eps = check_eps(eps)
    started = time.perf_counter()
    fold_source, _ = fold_to_e0(source, eps, window_cap=window_cap)
    fold_target, _ = fold_to_e0(target, eps, window_cap=window_cap)
    seq = GeneratorSequence(fuse_shifts(fold_source.ops + invert(fold_target).ops))

    reached = apply_program(source, seq, window_cap=window_cap)
    report = SynthesisReport.for_items(
        seq, 1.0 - state_fidelity(reached, target), started
    )
    if report.final_error > eps:
        log.warning("State steering missed eps=%.3e (error=%.3e)", eps, report.final_error)
    log.info(
        "Steered state (ops=%s, u2=%s, shifts=%s, error=%.3e)",
        report.op_count,
        report.u2_count,
        report.shift_count,
        report.final_error,
    )
    return seq, report


def unitarity_residual(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def _phase_block(index: int, phase: float, *, upper: bool) -> List[UnitaryOp]:
    """Diagonal block multiplying e_index by e^{i phase}, fixing its pair partner."""

    if upper:
        params = U2Params(0.0, 0.0, -phase, phase)
        return conjugated_u2(index, params)
    return conjugated_u2(index - 1, U2Params(0.0, 0.0, phase, 0.0))


def compile_unitary(
    matrix,
    window: Window,
    eps: float = COMPILE_EPS,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
    tolerance: float = STRUCTURAL_TOL,
) -> Tuple[GeneratorSequence, SynthesisReport]:
    """Compile a dense unitary acting on ``window`` into shifts and U(2) blocks.

    Column ``j`` of ``matrix`` is the image of the basis vector at absolute
    index ``window.offset + j``; everything outside the window is fixed.
    """

    eps = check_eps(eps)
    started = time.perf_counter()
    window.check_cap(window_cap)
    try:
        work = np.array(matrix, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"unitary entries must be complex numbers: {exc}") from exc
    n = window.length
    if work.shape != (n, n):
        raise InvalidInput(f"unitary must be {n}×{n} for the window, got shape {work.shape}")
    if not np.all(np.isfinite(work)):
        raise InvalidInput("unitary entries must be finite")
    residual = unitarity_residual(work)
    if residual > tolerance:
        raise NotUnitary("U†U differs from the identity", residual=residual)

    rotations: List[Tuple[int, np.ndarray]] = []
    for col in range(n - 1):
        for row in range(n - 1, col, -1):
            a, b = work[row - 1, col], work[row, col]
            if abs(b) < MERGE_SKIP:
                continue
            rho = math.hypot(abs(a), abs(b))
            rotation = np.array([[np.conj(a), np.conj(b)], [b, -a]], dtype=np.complex128) / rho
            work[row - 1 : row + 1] = rotation @ work[row - 1 : row + 1]
            rotations.append((row - 1, rotation))

    ops: List[UnitaryOp] = []
    for local in range(n):
        phase = float(np.angle(work[local, local]))
        if abs(phase) <= MERGE_SKIP:
            continue
        upper = local < n - 1 or n == 1
        ops.extend(_phase_block(window.offset + local, phase, upper=upper))
    for local, rotation in reversed(rotations):
        params = u2_params_from_matrix(rotation.conj().T)
        ops.extend(conjugated_u2(window.offset + local, params))

    seq = GeneratorSequence(fuse_shifts(ops))
    dense = materialize(seq, window, window_cap=window_cap)
    target = np.asarray(matrix, dtype=np.complex128)
    report = SynthesisReport.for_items(seq, float(np.max(np.abs(dense - target))), started)
    if report.final_error > eps:
        log.warning("Unitary compilation missed eps=%.3e (error=%.3e)", eps, report.final_error)
    log.info(
        "Compiled %sx%s unitary (rotations=%s, ops=%s, error=%.3e)",
        n,
        n,
        len(rotations),
        report.op_count,
        report.final_error,
    )
    return seq, report


__all__ = [
    "COMPILE_EPS",
    "SynthesisReport",
    "check_eps",
    "compile_unitary",
    "fold_to_e0",
    "invert",
    "merge_rotation",
    "steer_state",
    "truncate_support",
    "unitarity_residual",
]
