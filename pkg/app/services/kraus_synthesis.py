"""Density steering through a collapse onto e_0 and a rebuild of the target spectrum.

A program moves ρ onto the indices 0..n-1, rotates it into its eigenbasis,
collapses it onto |e_0⟩⟨e_0| with the stage K_i = P0 Π_{0,i}, spreads the
target eigenvalues back out with K_i = √w_i Π_{0,i}, rotates into the target
eigenbasis and moves to the target offset. Both rotations are compiled into
shift and U(2) generators, so programs never carry dense matrices.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.core.errors import BadWeights, InvalidInput
from app.core.hilbert import (
    DEFAULT_WINDOW_CAP,
    STRUCTURAL_TOL,
    DensityMatrix,
    Window,
    trace_distance,
)
from app.services.generators import (
    ChannelProgram,
    KrausElement,
    KrausStage,
    ProgramItem,
    Shift,
    apply_program,
    fuse_shifts,
)
from app.services.unitary_synthesis import SynthesisReport, check_eps, compile_unitary

log = logging.getLogger(__name__)

RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Spectrum of a density in descending order; ``basis`` columns are eigenvectors."""

    values: np.ndarray
    basis: np.ndarray
    window: Window

    def rank(self, threshold: float = RANK_TOL) -> int:
        return max(1, int(np.count_nonzero(self.values > threshold)))

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.values) @ self.basis.conj().T


def diagonalize(rho: DensityMatrix) -> EigenDecomposition:
    """Return the deterministic eigendecomposition of ``rho``.

    Eigenvalues are sorted descending and every eigenvector is rotated so its
    largest-modulus component (lowest index on ties) is real and positive.
    """

    hermitian = 0.5 * (rho.matrix + rho.matrix.conj().T)
    values, vectors = linalg.eigh(hermitian)
    values = values[::-1].copy()
    basis = vectors[:, ::-1].copy()
    for col in range(basis.shape[1]):
        anchor = int(np.argmax(np.abs(basis[:, col])))
        component = basis[anchor, col]
        basis[:, col] *= np.conj(component) / abs(component)
        basis[anchor, col] = abs(basis[anchor, col])
    values.setflags(write=False)
    basis.setflags(write=False)
    return EigenDecomposition(values=values, basis=basis, window=rho.window)


def collapse_stage(n: int) -> KrausStage:
    """Return the stage K_i = P0 Π_{0,i}, i < n, sending any density on 0..n-1 to |e_0⟩⟨e_0|."""

    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidInput(f"collapse size must be a positive integer, got {n!r}")
    return KrausStage(
        tuple(KrausElement(1.0, i, project=True) for i in range(int(n))), complement=True
    )


def build_stage(weights: Sequence[float], *, tolerance: float = STRUCTURAL_TOL) -> KrausStage:
    """Return the stage K_i = √w_i Π_{0,i} sending |e_0⟩⟨e_0| to diag(w)."""

    try:
        values = np.asarray(list(weights), dtype=float)
    except (TypeError, ValueError) as exc:
        raise BadWeights(f"weights must be real numbers: {exc}") from exc
    if values.ndim != 1 or values.size == 0:
        raise BadWeights("weights must be a non-empty list")
    if not np.all(np.isfinite(values)):
        raise BadWeights("weights must be finite")
    if np.any(values < 0.0):
        lowest = float(values.min())
        raise BadWeights(f"weight {lowest!r} is negative", residual=-lowest)
    residual = abs(float(values.sum()) - 1.0)
    if residual > tolerance:
        raise BadWeights("weights do not sum to 1", residual=residual)
    return KrausStage(
        tuple(KrausElement(min(float(w), 1.0), i) for i, w in enumerate(values)),
        complement=False,
    )


def target_weights(spectrum: EigenDecomposition, threshold: float = RANK_TOL) -> np.ndarray:
    """Clip eigenvalues at or below ``threshold`` to zero and renormalize."""

    weights = np.where(spectrum.values > threshold, spectrum.values, 0.0)
    return weights / weights.sum()


def steer_density(
    rho: DensityMatrix,
    sigma: DensityMatrix,
    eps: float,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
    rank_tol: float = RANK_TOL,
    tolerance: float = STRUCTURAL_TOL,
) -> Tuple[ChannelProgram, SynthesisReport]:
    """Return a channel program taking ``rho`` to within ``eps`` of ``sigma`` in trace distance."""

    eps = check_eps(eps)
    started = time.perf_counter()
    source = diagonalize(rho)
    target = diagonalize(sigma)
    source_frame = Window(0, rho.dim)
    target_frame = Window(0, sigma.dim)

    unrotate, _ = compile_unitary(
        source.basis.conj().T, source_frame, eps / 2.0, window_cap=window_cap
    )
    rotate, _ = compile_unitary(target.basis, target_frame, eps / 2.0, window_cap=window_cap)
    collapse = collapse_stage(source.rank(rank_tol))
    build = build_stage(target_weights(target, rank_tol), tolerance=tolerance)

    items: List[ProgramItem] = [Shift(-rho.offset)]
    items.extend(unrotate)
    items.extend([collapse, build])
    items.extend(rotate)
    items.append(Shift(sigma.offset))
    program = ChannelProgram(tuple(fuse_shifts(items)))

    reached = apply_program(rho, program, window_cap=window_cap, tolerance=tolerance)
    report = SynthesisReport.for_items(
        program, trace_distance(reached, sigma, window_cap=window_cap), started
    )
    if report.final_error > eps:
        log.warning("Density steering missed eps=%.3e (error=%.3e)", eps, report.final_error)
    log.info(
        "Steered density %s -> %s (collapse=%s, build=%s, ops=%s, error=%.3e)",
        rho.dim,
        sigma.dim,
        len(collapse.elements),
        len(build.elements),
        report.op_count,
        report.final_error,
    )
    return program, report


__all__ = [
    "EigenDecomposition",
    "RANK_TOL",
    "build_stage",
    "collapse_stage",
    "diagonalize",
    "steer_density",
    "target_weights",
]
