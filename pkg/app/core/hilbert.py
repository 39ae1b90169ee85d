"""Windowed vectors and density operators on the two-sided sequence space.

Every value stores a finite block of amplitudes (or matrix entries) together
with the absolute index of its first row. Everything outside the block is
exactly zero, so binary operations zero-pad both operands to a common window
and shifting a value only changes its offset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple, TypeVar, Union

import numpy as np
from scipy import linalg

from app.core.errors import (
    InvalidInput,
    NotHermitian,
    NotNormalized,
    NotPositive,
    TraceNotOne,
    WindowOverflow,
    ZeroVector,
)

DEFAULT_WINDOW_CAP = 4096
STRUCTURAL_TOL = 1e-10
ZERO_NORM = 1e-14


@dataclass(frozen=True)
class Window:
    """Contiguous block of absolute indices ``offset .. offset + length - 1``."""

    offset: int
    length: int

    def __post_init__(self):
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "length", int(self.length))
        if self.length < 1:
            raise InvalidInput(f"window length must be positive, got {self.length}")

    @property
    def stop(self) -> int:
        return self.offset + self.length

    @property
    def last(self) -> int:
        return self.stop - 1

    def contains(self, index: int) -> bool:
        return self.offset <= index < self.stop

    def covers(self, other: "Window") -> bool:
        return self.offset <= other.offset and other.stop <= self.stop

    def union(self, other: "Window") -> "Window":
        start = min(self.offset, other.offset)
        return Window(start, max(self.stop, other.stop) - start)

    def indices(self) -> range:
        return range(self.offset, self.stop)

    def check_cap(self, window_cap: int = DEFAULT_WINDOW_CAP) -> "Window":
        if self.length > window_cap:
            raise WindowOverflow(
                f"window [{self.offset}..{self.last}] needs {self.length} slots, "
                f"cap is {window_cap}"
            )
        return self


def _readonly(data: np.ndarray) -> np.ndarray:
    frozen = np.array(data, dtype=np.complex128)
    frozen.setflags(write=False)
    return frozen


@dataclass(frozen=True, eq=False)
class StateVector:
    """Finite-support vector; ``amps[j]`` is the amplitude at ``offset + j``.

    The unit-norm invariant is enforced by :func:`make_state`; values produced
    by unitary application keep it up to rounding.
    """

    offset: int
    amps: np.ndarray

    def __post_init__(self):
        amps = _readonly(self.amps)
        if amps.ndim != 1 or amps.size == 0:
            raise InvalidInput("amplitudes must be a non-empty one-dimensional list")
        if not np.all(np.isfinite(amps)):
            raise InvalidInput("amplitudes must be finite")
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "amps", amps)

    @property
    def window(self) -> Window:
        return Window(self.offset, self.amps.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def amplitude(self, index: int) -> complex:
        if self.window.contains(index):
            return complex(self.amps[index - self.offset])
        return 0j

    def embed(self, window: Window) -> "StateVector":
        """Return the same vector zero-padded onto ``window``."""

        if window == self.window:
            return self
        if not window.covers(self.window):
            raise InvalidInput(
                f"window [{window.offset}..{window.last}] does not cover "
                f"[{self.offset}..{self.window.last}]"
            )
        padded = np.zeros(window.length, dtype=np.complex128)
        start = self.offset - window.offset
        padded[start : start + self.amps.size] = self.amps
        return StateVector(window.offset, padded)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Square block of a density operator; row/column ``j`` is index ``offset + j``."""

    offset: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _readonly(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise InvalidInput(f"density matrix must be square and non-empty, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidInput("density matrix entries must be finite")
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "matrix", matrix)

    @property
    def window(self) -> Window:
        return Window(self.offset, self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        hermitian = 0.5 * (self.matrix + self.matrix.conj().T)
        return linalg.eigvalsh(hermitian)

    def embed(self, window: Window) -> "DensityMatrix":
        """Return the same operator zero-padded onto ``window``."""

        if window == self.window:
            return self
        if not window.covers(self.window):
            raise InvalidInput(
                f"window [{window.offset}..{window.last}] does not cover "
                f"[{self.offset}..{self.window.last}]"
            )
        padded = np.zeros((window.length, window.length), dtype=np.complex128)
        start = self.offset - window.offset
        stop = start + self.dim
        padded[start:stop, start:stop] = self.matrix
        return DensityMatrix(window.offset, padded)


Windowed = Union[StateVector, DensityMatrix]
W = TypeVar("W", StateVector, DensityMatrix)


def make_state(
    amps: Iterable[complex],
    offset: int = 0,
    normalize: bool = False,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
    tolerance: float = STRUCTURAL_TOL,
) -> StateVector:
    """Validate ``amps`` as a unit vector starting at absolute index ``offset``.

    Parameters
    ----------
    amps:
        Complex amplitudes for indices ``offset, offset + 1, ...``.
    normalize:
        Divide by the Euclidean norm instead of requiring it to be one.
    window_cap:
        Largest admissible number of stored amplitudes.
    tolerance:
        Allowed deviation of the squared norm from one when ``normalize`` is
        unset.
    """

    try:
        data = np.asarray(list(amps), dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"amplitudes must be complex numbers: {exc}") from exc
    if data.ndim != 1 or data.size == 0:
        raise InvalidInput("amplitudes must be a non-empty list")
    if not np.all(np.isfinite(data)):
        raise InvalidInput("amplitudes must be finite")
    Window(offset, data.size).check_cap(window_cap)

    norm = float(np.linalg.norm(data))
    if normalize:
        if norm < ZERO_NORM:
            raise ZeroVector(f"cannot normalize a vector of norm {norm:.3e}")
        data = data / norm
    else:
        residual = abs(norm * norm - 1.0)
        if residual > tolerance:
            raise NotNormalized(
                f"squared norm {norm * norm!r} differs from 1", residual=residual
            )
    return StateVector(offset, data)


def basis_state(index: int) -> StateVector:
    """Return the basis vector e_index."""

    return StateVector(index, np.ones(1, dtype=np.complex128))


def inner(a: StateVector, b: StateVector) -> complex:
    """Return ⟨a|b⟩, conjugate-linear in ``a``.

    Only the overlap of the two windows contributes since everything outside a
    window is zero.
    """

    start = max(a.offset, b.offset)
    stop = min(a.window.stop, b.window.stop)
    if stop <= start:
        return 0j
    left = a.amps[start - a.offset : stop - a.offset]
    right = b.amps[start - b.offset : stop - b.offset]
    return complex(np.vdot(left, right))


def state_fidelity(a: StateVector, b: StateVector) -> float:
    """Return |⟨a|b⟩|, which is 1 exactly when the states agree up to phase."""

    return abs(inner(a, b))


def make_density(
    matrix,
    offset: int = 0,
    tolerance: float = STRUCTURAL_TOL,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> DensityMatrix:
    """Validate ``matrix`` as a density operator on ``offset .. offset + n - 1``.

    The checks run in order Hermitian, positive semidefinite, unit trace and
    each failure reports the measured residual.
    """

    try:
        data = np.asarray(matrix, dtype=np.complex128)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"density entries must be complex numbers: {exc}") from exc
    if data.ndim != 2 or data.shape[0] != data.shape[1] or data.shape[0] == 0:
        raise InvalidInput(f"density matrix must be square and non-empty, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InvalidInput("density matrix entries must be finite")
    Window(offset, data.shape[0]).check_cap(window_cap)

    rho = DensityMatrix(offset, data)
    herm = rho.hermitian_residual()
    if herm > tolerance:
        raise NotHermitian("matrix differs from its adjoint", residual=herm)
    lowest = float(rho.eigenvalues()[0])
    if lowest < -tolerance:
        raise NotPositive(
            f"minimum eigenvalue {lowest!r} below {-tolerance!r}", residual=-lowest
        )
    trace_residual = abs(rho.trace - 1.0)
    if trace_residual > tolerance:
        raise TraceNotOne(f"trace {rho.trace.real!r} differs from 1", residual=trace_residual)
    return rho


def pure_density(state: StateVector) -> DensityMatrix:
    """Return the projector |a⟩⟨a| on the state's window."""

    return DensityMatrix(state.offset, np.outer(state.amps, state.amps.conj()))


def align_windows(x: W, y: W, *, window_cap: int = DEFAULT_WINDOW_CAP) -> Tuple[W, W]:
    """Zero-pad ``x`` and ``y`` onto the smallest window containing both."""

    if type(x) is not type(y):
        raise InvalidInput(
            f"cannot align {type(x).__name__} with {type(y).__name__}"
        )
    if x.window == y.window:
        return x, y
    common = x.window.union(y.window).check_cap(window_cap)
    return x.embed(common), y.embed(common)


def trace_distance(
    rho: DensityMatrix, sigma: DensityMatrix, *, window_cap: int = DEFAULT_WINDOW_CAP
) -> float:
    """Return ½ Σ|λ_i(ρ − σ)| via a Hermitian eigensolve of the difference."""

    left, right = align_windows(rho, sigma, window_cap=window_cap)
    diff = left.matrix - right.matrix
    eigenvalues = linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(eigenvalues)))


__all__ = [
    "DEFAULT_WINDOW_CAP",
    "DensityMatrix",
    "STRUCTURAL_TOL",
    "StateVector",
    "Window",
    "Windowed",
    "align_windows",
    "basis_state",
    "inner",
    "make_density",
    "make_state",
    "pure_density",
    "state_fidelity",
    "trace_distance",
]
