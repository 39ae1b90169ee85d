"""Generator instructions and their action on windowed states and densities.

The instruction set is the bilateral shift ``Shift(k)`` (e_j -> e_{j+k}), a
U(2) block acting on the absolute indices {0, 1} while fixing every other
basis vector, and Kraus stages assembled from the projection P0 and the swap
chains Pi_{0,i}. Programs stay symbolic; :func:`materialize` is the bridge to
dense matrices used by the oracles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from app.core.errors import (
    BadWeights,
    BudgetExceeded,
    InvalidInput,
    KrausOnState,
    NotTracePreserving,
    ShiftLeak,
    WindowOverflow,
)
from app.core.hilbert import (
    DEFAULT_WINDOW_CAP,
    STRUCTURAL_TOL,
    DensityMatrix,
    StateVector,
    Window,
    Windowed,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEFAULT_PROGRAM_CAP = 1_000_000
LEAK_TOL = 1e-12
_CHART_EPS = 1e-14
_PAIR = Window(0, 2)


def _wrap(angle: float) -> float:
    wrapped = math.fmod(angle, TWO_PI) + 0.0
    if wrapped < 0.0:
        wrapped += TWO_PI
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return wrapped


@dataclass(frozen=True)
class U2Params:
    """Angles of e^{iδ}[[c, -e^{iλ}s], [e^{iφ}s, e^{i(φ+λ)}c]] with c, s = cos, sin(θ/2).

    Angles are stored canonically in [0, 2π). Wrapping θ by an odd multiple
    of 2π flips the sign of the matrix, which is compensated in δ.
    """

    theta: float
    phi: float
    lam: float
    delta: float

    def __post_init__(self):
        values = {}
        for name in ("theta", "phi", "lam", "delta"):
            raw = getattr(self, name)
            if isinstance(raw, bool):
                raise InvalidInput(f"U(2) angle {name} must be a real number")
            try:
                value = float(raw)
            except (TypeError, ValueError) as exc:
                raise InvalidInput(f"U(2) angle {name} must be a real number") from exc
            if not math.isfinite(value):
                raise InvalidInput(f"U(2) angle {name} must be finite, got {value!r}")
            values[name] = value

        theta = _wrap(values["theta"])
        delta = values["delta"]
        if round((values["theta"] - theta) / TWO_PI) % 2:
            delta += math.pi
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", _wrap(values["phi"]))
        object.__setattr__(self, "lam", _wrap(values["lam"]))
        object.__setattr__(self, "delta", _wrap(delta))

    def adjoint(self) -> "U2Params":
        return U2Params(self.theta, math.pi - self.lam, math.pi - self.phi, -self.delta)


def u2_matrix(params: U2Params) -> np.ndarray:
    c = math.cos(params.theta / 2.0)
    s = math.sin(params.theta / 2.0)
    e_phi = np.exp(1j * params.phi)
    e_lam = np.exp(1j * params.lam)
    block = np.array(
        [[c, -e_lam * s], [e_phi * s, e_phi * e_lam * c]], dtype=np.complex128
    )
    return np.exp(1j * params.delta) * block


def u2_params_from_matrix(matrix) -> U2Params:
    """Return the chart angles of a 2×2 unitary ``matrix``.

    Phases are read from the larger pair of entries (diagonal or
    anti-diagonal) so rounding noise in tiny entries cannot leak into large
    reconstructed entries. The input is assumed unitary.
    """

    m = np.asarray(matrix, dtype=np.complex128)
    c = abs(m[0, 0])
    s = abs(m[1, 0])
    theta = 2.0 * math.atan2(s, c)
    if s <= c:
        delta = float(np.angle(m[0, 0]))
        phi = float(np.angle(m[1, 0])) - delta if s > _CHART_EPS else 0.0
        lam = float(np.angle(m[1, 1])) - delta - phi
    else:
        delta = float(np.angle(m[0, 0])) if c > _CHART_EPS else 0.0
        phi = float(np.angle(m[1, 0])) - delta
        lam = float(np.angle(-m[0, 1])) - delta
    return U2Params(theta, phi, lam, delta)


def pi_op() -> U2Params:
    """Return the parameters of the real swap Π = [[0, 1], [1, 0]]."""

    return U2Params(math.pi, 0.0, math.pi, 0.0)


@dataclass(frozen=True)
class Shift:
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k:
            raise InvalidInput(f"shift amount must be an integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    def inverse(self) -> "Shift":
        return Shift(-self.k)


@dataclass(frozen=True)
class U2At01:
    params: U2Params

    def matrix(self) -> np.ndarray:
        return u2_matrix(self.params)

    def inverse(self) -> "U2At01":
        return U2At01(self.params.adjoint())


UnitaryOp = Union[Shift, U2At01]


@dataclass(frozen=True)
class KrausElement:
    """Symbolic Kraus operator √weight · (P0 if project) · Π_{0,swap_index}."""

    weight: float
    swap_index: int
    project: bool = False

    def __post_init__(self):
        if isinstance(self.weight, bool):
            raise BadWeights("Kraus weight must be a real number")
        weight = float(self.weight)
        if not math.isfinite(weight) or weight < 0.0 or weight > 1.0:
            raise BadWeights(f"Kraus weight must lie in [0, 1], got {weight!r}")
        if isinstance(self.swap_index, bool) or int(self.swap_index) != self.swap_index:
            raise InvalidInput(f"swap index must be an integer, got {self.swap_index!r}")
        if int(self.swap_index) < 0:
            raise InvalidInput(f"swap index must be non-negative, got {self.swap_index}")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "swap_index", int(self.swap_index))
        object.__setattr__(self, "project", bool(self.project))


@dataclass(frozen=True)
class KrausStage:
    """Operator-sum stage; ``complement`` appends I minus the projector onto the swap indices."""

    elements: Tuple[KrausElement, ...]
    complement: bool = False

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise InvalidInput("a Kraus stage needs at least one element")
        if not all(isinstance(e, KrausElement) for e in elements):
            raise InvalidInput("Kraus stage elements must be KrausElement values")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "complement", bool(self.complement))

    @property
    def swap_indices(self) -> List[int]:
        return sorted({e.swap_index for e in self.elements})

    @property
    def support(self) -> Window:
        return Window(0, max(self.swap_indices) + 1)


def _check_unitary_ops(ops: Iterable) -> Tuple[UnitaryOp, ...]:
    ops = tuple(ops)
    for index, op in enumerate(ops):
        if not isinstance(op, (Shift, U2At01)):
            raise InvalidInput(
                f"ops[{index}] is {type(op).__name__}, expected Shift or U2At01"
            )
    return ops


@dataclass(frozen=True)
class GeneratorSequence:
    """Word in the shift and U(2) generators, applied left to right."""

    ops: Tuple[UnitaryOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", _check_unitary_ops(self.ops))

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[UnitaryOp]:
        return iter(self.ops)

    def __add__(self, other: "GeneratorSequence") -> "GeneratorSequence":
        return GeneratorSequence(self.ops + tuple(other))

    def fused(self) -> "GeneratorSequence":
        return GeneratorSequence(fuse_shifts(self.ops))

    @property
    def u2_count(self) -> int:
        return sum(1 for op in self.ops if isinstance(op, U2At01))

    @property
    def shift_count(self) -> int:
        return sum(1 for op in self.ops if isinstance(op, Shift))


ProgramItem = Union[Shift, U2At01, KrausStage]


@dataclass(frozen=True)
class ChannelProgram:
    """Ordered mix of unitary generators and Kraus stages."""

    items: Tuple[ProgramItem, ...] = ()

    def __post_init__(self):
        items = tuple(self.items)
        for index, item in enumerate(items):
            if not isinstance(item, (Shift, U2At01, KrausStage)):
                raise InvalidInput(
                    f"items[{index}] is {type(item).__name__}, expected a generator or Kraus stage"
                )
        object.__setattr__(self, "items", items)

    @classmethod
    def from_sequence(cls, seq: GeneratorSequence) -> "ChannelProgram":
        return cls(tuple(seq))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[ProgramItem]:
        return iter(self.items)

    @property
    def is_unitary(self) -> bool:
        return not any(isinstance(item, KrausStage) for item in self.items)

    @property
    def stages(self) -> List[KrausStage]:
        return [item for item in self.items if isinstance(item, KrausStage)]

    @property
    def u2_count(self) -> int:
        return sum(1 for item in self.items if isinstance(item, U2At01))

    @property
    def shift_count(self) -> int:
        return sum(1 for item in self.items if isinstance(item, Shift))


Program = Union[GeneratorSequence, ChannelProgram]


def fuse_shifts(items: Iterable[ProgramItem]) -> List[ProgramItem]:
    """Merge adjacent shifts and drop zero shifts."""

    fused: List[ProgramItem] = []
    for item in items:
        if isinstance(item, Shift):
            if fused and isinstance(fused[-1], Shift):
                item = Shift(fused.pop().k + item.k)
            if item.k == 0:
                continue
        fused.append(item)
    return fused


def conjugated_u2(index: int, params: U2Params) -> List[UnitaryOp]:
    """Return T^index · U · T^-index, the U(2) block moved onto (index, index + 1)."""

    return fuse_shifts([Shift(-index), U2At01(params), Shift(index)])


def pi_n_sequence(n: int, *, window_cap: int = DEFAULT_WINDOW_CAP) -> GeneratorSequence:
    """Return Π_n = T^n Π T^-n, exchanging e_n and e_{n+1}."""

    if abs(n) > window_cap:
        raise WindowOverflow(f"swap position {n} exceeds the window cap {window_cap}")
    return GeneratorSequence(conjugated_u2(n, pi_op()))


def swap_chain_sequence(
    k: int, p: int, *, window_cap: int = DEFAULT_WINDOW_CAP
) -> GeneratorSequence:
    """Return Π_{k,k+p} = Π_k Π_{k+1} ⋯ Π_{k+p-1} ⋯ Π_{k+1} Π_k exchanging e_k and e_{k+p}."""

    if p < 1:
        raise InvalidInput(f"swap distance must be positive, got {p}")
    if max(abs(k), abs(k + p)) > window_cap:
        raise WindowOverflow(f"swap of e_{k} and e_{k + p} exceeds the window cap {window_cap}")
    positions = list(range(k, k + p)) + list(range(k + p - 2, k - 1, -1))
    ops: List[UnitaryOp] = []
    for position in positions:
        ops.extend(conjugated_u2(position, pi_op()))
    return GeneratorSequence(fuse_shifts(ops))


def _mix_rows(
    block: np.ndarray, offset: int, matrix: np.ndarray, window_cap: int
) -> Tuple[np.ndarray, int]:
    """Apply ``matrix`` to the rows holding absolute indices 0 and 1."""

    frame = Window(offset, block.shape[0])
    target = frame.union(_PAIR).check_cap(window_cap)
    if target != frame:
        padded = np.zeros((target.length,) + block.shape[1:], dtype=np.complex128)
        start = offset - target.offset
        padded[start : start + block.shape[0]] = block
        block = padded
    else:
        block = np.array(block, dtype=np.complex128)
    row = -target.offset
    block[row : row + 2] = matrix @ block[row : row + 2]
    return block, target.offset


def apply_unitary(
    x: Windowed, op: UnitaryOp, *, window_cap: int = DEFAULT_WINDOW_CAP
) -> Windowed:
    """Apply one generator to a state (vector action) or density (conjugation)."""

    if isinstance(op, Shift):
        if abs(op.k) > window_cap:
            raise WindowOverflow(f"shift by {op.k} exceeds the window cap {window_cap}")
        if isinstance(x, StateVector):
            return StateVector(x.offset + op.k, x.amps)
        return DensityMatrix(x.offset + op.k, x.matrix)
    if not isinstance(op, U2At01):
        raise InvalidInput(f"{type(op).__name__} is not a unitary generator")

    matrix = op.matrix()
    if isinstance(x, StateVector):
        amps, offset = _mix_rows(x.amps, x.offset, matrix, window_cap)
        return StateVector(offset, amps)
    target = x.window.union(_PAIR).check_cap(window_cap)
    conjugated = np.array(x.embed(target).matrix)
    row = -target.offset
    conjugated[row : row + 2, :] = matrix @ conjugated[row : row + 2, :]
    conjugated[:, row : row + 2] = conjugated[:, row : row + 2] @ matrix.conj().T
    return DensityMatrix(target.offset, conjugated)


def _densify_rows(rows: np.ndarray, offset: int, window: Window) -> np.ndarray:
    """Restrict a row block at ``offset`` to ``window``, refusing to drop support."""

    frame = Window(offset, rows.shape[0])
    result = np.zeros((window.length,) + rows.shape[1:], dtype=np.complex128)
    leak = 0.0
    for local, absolute in enumerate(frame.indices()):
        if window.contains(absolute):
            result[absolute - window.offset] = rows[local]
        else:
            leak = max(leak, float(np.max(np.abs(rows[local]))))
    if leak > LEAK_TOL:
        raise ShiftLeak(
            f"support leaves window [{window.offset}..{window.last}]", residual=leak
        )
    return result


def _element_matrix(element: KrausElement, window: Window) -> np.ndarray:
    for index in (0, element.swap_index):
        if not window.contains(index):
            raise WindowOverflow(
                f"window [{window.offset}..{window.last}] does not contain index {index}"
            )
    zero = -window.offset
    other = element.swap_index - window.offset
    swap = np.eye(window.length, dtype=np.complex128)
    swap[[zero, other]] = swap[[other, zero]]
    if element.project:
        projected = np.zeros_like(swap)
        projected[zero] = swap[zero]
        swap = projected
    return math.sqrt(element.weight) * swap


def materialize(
    obj: Union[GeneratorSequence, KrausElement, Sequence[UnitaryOp]],
    window: Window,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> np.ndarray:
    """Return the dense matrix of ``obj`` restricted to ``window``.

    Column ``j`` is the image of the basis vector at ``window.offset + j``.
    Intermediate shifts may leave the window; the final images may not.
    """

    window.check_cap(window_cap)
    if isinstance(obj, KrausElement):
        return _element_matrix(obj, window)

    block = np.eye(window.length, dtype=np.complex128)
    offset = window.offset
    for op in _check_unitary_ops(obj):
        if isinstance(op, Shift):
            if abs(op.k) > window_cap:
                raise WindowOverflow(f"shift by {op.k} exceeds the window cap {window_cap}")
            offset += op.k
        else:
            block, offset = _mix_rows(block, offset, op.matrix(), window_cap)
    return _densify_rows(block, offset, window)


def stage_window(
    window: Window, stage: KrausStage, *, window_cap: int = DEFAULT_WINDOW_CAP
) -> Window:
    """Return the working window of ``stage`` applied to a value on ``window``."""

    return window.union(stage.support).check_cap(window_cap)


def stage_operators(stage: KrausStage, window: Window) -> List[np.ndarray]:
    """Materialize every Kraus operator of ``stage`` on ``window``, complement last."""

    operators = [_element_matrix(element, window) for element in stage.elements]
    if stage.complement:
        complement = np.eye(window.length, dtype=np.complex128)
        for index in stage.swap_indices:
            complement[index - window.offset, index - window.offset] = 0.0
        operators.append(complement)
    return operators


def tp_residual(stage: KrausStage, window: Window) -> float:
    """Return ‖Σ K_i†K_i − I‖_max on ``window``."""

    total = np.zeros((window.length, window.length), dtype=np.complex128)
    for operator in stage_operators(stage, window):
        total += operator.conj().T @ operator
    return float(np.max(np.abs(total - np.eye(window.length))))


def apply_kraus_stage(
    rho: DensityMatrix,
    stage: KrausStage,
    *,
    tolerance: float = STRUCTURAL_TOL,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> DensityMatrix:
    """Return Φ(ρ) = Σ K_i ρ K_i† after certifying trace preservation."""

    window = stage_window(rho.window, stage, window_cap=window_cap)
    residual = tp_residual(stage, window)
    if residual > tolerance:
        raise NotTracePreserving(
            f"Σ K†K differs from the identity on [{window.offset}..{window.last}]",
            residual=residual,
        )
    padded = rho.embed(window).matrix
    output = np.zeros_like(padded)
    for operator in stage_operators(stage, window):
        output += operator @ padded @ operator.conj().T
    log.debug(
        "Kraus stage applied (elements=%s, complement=%s, tp_residual=%.2e)",
        len(stage.elements),
        stage.complement,
        residual,
    )
    return DensityMatrix(window.offset, output)


def _program_items(prog) -> Tuple[ProgramItem, ...]:
    if isinstance(prog, GeneratorSequence):
        return prog.ops
    if isinstance(prog, ChannelProgram):
        return prog.items
    return ChannelProgram(tuple(prog)).items


def program_trajectory(
    x: Windowed,
    prog,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
    program_cap: int = DEFAULT_PROGRAM_CAP,
    tolerance: float = STRUCTURAL_TOL,
) -> Iterator[Windowed]:
    """Yield the value after each item of ``prog`` in order."""

    items = _program_items(prog)
    if len(items) > program_cap:
        raise BudgetExceeded(
            f"program has {len(items)} items, cap is {program_cap}"
        )
    current = x
    for index, item in enumerate(items):
        if isinstance(item, KrausStage):
            if isinstance(current, StateVector):
                raise KrausOnState(f"items[{index}] is a Kraus stage but the input is a state")
            current = apply_kraus_stage(
                current, item, tolerance=tolerance, window_cap=window_cap
            )
        else:
            current = apply_unitary(current, item, window_cap=window_cap)
        yield current


def apply_program(
    x: Windowed,
    prog,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
    program_cap: int = DEFAULT_PROGRAM_CAP,
    tolerance: float = STRUCTURAL_TOL,
) -> Windowed:
    """Apply ``prog`` left to right; states only accept unitary items."""

    result = x
    for result in program_trajectory(
        x, prog, window_cap=window_cap, program_cap=program_cap, tolerance=tolerance
    ):
        pass
    return result


__all__ = [
    "ChannelProgram",
    "GeneratorSequence",
    "KrausElement",
    "KrausStage",
    "Shift",
    "U2At01",
    "U2Params",
    "UnitaryOp",
    "apply_kraus_stage",
    "apply_program",
    "apply_unitary",
    "conjugated_u2",
    "fuse_shifts",
    "materialize",
    "pi_n_sequence",
    "pi_op",
    "program_trajectory",
    "stage_operators",
    "stage_window",
    "swap_chain_sequence",
    "tp_residual",
    "u2_matrix",
    "u2_params_from_matrix",
]
