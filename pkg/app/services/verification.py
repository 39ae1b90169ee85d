"""Empirical certification of steering: sweeps, coverage oracle, negative control and bench.

Every random draw flows from ``numpy.random.SeedSequence([seed, ...])`` so
trials can run on a thread pool in any order and still merge into identical
tables.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.spatial import cKDTree

from app.core.errors import BudgetExceeded, InvalidInput
from app.core.hilbert import (
    DEFAULT_WINDOW_CAP,
    DensityMatrix,
    StateVector,
    Window,
    basis_state,
    make_density,
    state_fidelity,
)
from app.services.generators import (
    GeneratorSequence,
    Shift,
    U2At01,
    U2Params,
    UnitaryOp,
    apply_program,
    program_trajectory,
    u2_matrix,
)
from app.services.kraus_synthesis import steer_density
from app.services.unitary_synthesis import SynthesisReport, check_eps, steer_state

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "dim",
    "trial",
    "op_count",
    "u2_count",
    "shift_count",
    "final_error",
    "wall_time_s",
]
KINDS = ("state", "density")
_DEFAULT_WORKERS = 4
MAX_STATE_DIM = 64
MAX_DENSITY_DIM = 16
INTERMEDIATE_TOL = 1e-9

Seed = Union[int, np.random.Generator]


def _rng(seed: Seed, *spawn_key: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise InvalidInput(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), *spawn_key]))


def _check_dim(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidInput(f"dimension must be a positive integer, got {n!r}")
    return int(n)


def random_state(n: int, seed: Seed) -> StateVector:
    """Haar-uniform unit vector on indices 0..n-1."""

    n = _check_dim(n)
    rng = _rng(seed)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return StateVector(0, z / np.linalg.norm(z))


def random_unitary(n: int, seed: Seed) -> np.ndarray:
    """Haar-random unitary from the QR factorization of a Ginibre matrix."""

    n = _check_dim(n)
    rng = _rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(n: int, seed: Seed) -> DensityMatrix:
    """Flat-Dirichlet spectrum conjugated by a Haar unitary, on indices 0..n-1."""

    n = _check_dim(n)
    rng = _rng(seed)
    weights = rng.dirichlet(np.ones(n))
    u = random_unitary(n, rng)
    rho = (u * weights) @ u.conj().T
    return DensityMatrix(0, 0.5 * (rho + rho.conj().T))


@dataclass(frozen=True)
class FiniteFamily:
    """Generator subset words are drawn from; ``with_shift`` adds T and its inverse."""

    name: str
    with_shift: bool

    @classmethod
    def u2_only(cls) -> "FiniteFamily":
        return cls("u2_only", False)

    @classmethod
    def full(cls) -> "FiniteFamily":
        return cls("full", True)

    def random_word(self, length: int, seed: Seed) -> GeneratorSequence:
        rng = _rng(seed)
        angles = rng.uniform(0.0, 2.0 * math.pi, size=(length, 4))
        shifts = rng.integers(0, 2, size=length) if self.with_shift else np.zeros(length, int)
        pick_shift = rng.random(length) < 0.5 if self.with_shift else np.zeros(length, bool)
        ops: List[UnitaryOp] = []
        for index in range(length):
            if pick_shift[index]:
                ops.append(Shift(1 if shifts[index] else -1))
            else:
                ops.append(U2At01(U2Params(*angles[index])))
        return GeneratorSequence(ops)


@dataclass
class SweepResult:
    """Per-trial rows of a universality sweep plus the aggregates derived from them."""

    kind: str
    dims: List[int]
    trials: int
    seed: int
    eps: float
    rows: pd.DataFrame

    @property
    def max_error(self) -> float:
        return float(self.rows["final_error"].max()) if len(self.rows) else 0.0

    @property
    def mean_op_count(self) -> float:
        return float(self.rows["op_count"].mean()) if len(self.rows) else 0.0

    @property
    def max_op_count(self) -> int:
        return int(self.rows["op_count"].max()) if len(self.rows) else 0

    @property
    def wall_time_s(self) -> float:
        return float(self.rows["wall_time_s"].sum()) if len(self.rows) else 0.0

    @property
    def failures(self) -> List[Dict[str, object]]:
        failed = self.rows[self.rows["final_error"] > self.eps]
        return [
            {
                "dim": int(row.dim),
                "trial": int(row.trial),
                "seed": [self.seed, int(row.dim), int(row.trial)],
                "final_error": float(row.final_error),
            }
            for row in failed.itertuples(index=False)
        ]

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "dims": list(self.dims),
            "trials": self.trials,
            "seed": self.seed,
            "eps": self.eps,
            "passed": self.passed,
            "max_error": self.max_error,
            "mean_op_count": self.mean_op_count,
            "max_op_count": self.max_op_count,
            "wall_time_s": self.wall_time_s,
            "failures": self.failures,
            "rows": [
                {
                    "dim": int(row.dim),
                    "trial": int(row.trial),
                    "final_error": float(row.final_error),
                    "op_count": int(row.op_count),
                }
                for row in self.rows.itertuples(index=False)
            ],
        }


def check_trajectory(
    rho: DensityMatrix,
    program,
    *,
    tolerance: float = INTERMEDIATE_TOL,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> int:
    """Validate every intermediate density of ``program`` applied to ``rho``; return the count."""

    checked = 0
    for value in program_trajectory(rho, program, window_cap=window_cap):
        make_density(value.matrix, value.offset, tolerance, window_cap=window_cap)
        checked += 1
    return checked


def _state_trial(
    dim: int, rng: np.random.Generator, eps: float, window_cap: int, random_source: bool
) -> SynthesisReport:
    source = random_state(dim, rng) if random_source else basis_state(0)
    target = random_state(dim, rng)
    _, report = steer_state(source, target, eps, window_cap=window_cap)
    return report


def _density_trial(
    dim: int,
    trial: int,
    rng: np.random.Generator,
    eps: float,
    window_cap: int,
    check_intermediates: bool,
    intermediate_tol: float = INTERMEDIATE_TOL,
) -> SynthesisReport:
    rho = random_density(dim, rng)
    sigma_dim = dim if trial % 2 == 0 else max(1, dim // 2)
    sigma = random_density(sigma_dim, rng)
    sigma = DensityMatrix(int(rng.integers(-2, 3)), sigma.matrix)
    program, report = steer_density(rho, sigma, eps, window_cap=window_cap)
    if check_intermediates:
        check_trajectory(rho, program, tolerance=intermediate_tol, window_cap=window_cap)
    return report


TrialFn = Callable[[int, int], SynthesisReport]


def _run_trials(
    dims: Sequence[int],
    trials: int,
    trial_fn: TrialFn,
    *,
    max_workers: int,
    record_wall_time: bool,
) -> pd.DataFrame:
    jobs = [(dim, trial) for dim in dims for trial in range(trials)]
    rows: List[Dict[str, object]] = []

    def run(dim: int, trial: int) -> Dict[str, object]:
        report = trial_fn(dim, trial)
        return {
            "dim": dim,
            "trial": trial,
            "op_count": report.op_count,
            "u2_count": report.u2_count,
            "shift_count": report.shift_count,
            "final_error": report.final_error,
            "wall_time_s": report.wall_time if record_wall_time else 0.0,
        }

    with ThreadPoolExecutor(max_workers=max(1, int(max_workers))) as executor:
        futures = [executor.submit(run, dim, trial) for dim, trial in jobs]
        for completed in as_completed(futures):
            rows.append(completed.result())

    frame = pd.DataFrame(rows, columns=CSV_COLUMNS)
    return frame.sort_values(["dim", "trial"], kind="mergesort").reset_index(drop=True)


def _check_sweep_args(kind: str, dims: Sequence[int], trials: int, max_state_dim: int, max_density_dim: int) -> List[int]:
    if kind not in KINDS:
        raise InvalidInput(f"kind must be one of {', '.join(KINDS)}, got {kind!r}")
    dims = [_check_dim(d) for d in dims]
    if not dims:
        raise InvalidInput("at least one dimension is required")
    limit = max_state_dim if kind == "state" else max_density_dim
    too_big = [d for d in dims if d > limit]
    if too_big:
        raise InvalidInput(f"{kind} sweeps support dimensions up to {limit}, got {too_big}")
    if isinstance(trials, bool) or int(trials) != trials or trials < 1:
        raise InvalidInput(f"trials must be a positive integer, got {trials!r}")
    return dims


def universality_sweep(
    kind: str,
    dims: Sequence[int],
    trials: int,
    eps: float,
    seed: int,
    *,
    max_workers: int = _DEFAULT_WORKERS,
    window_cap: int = DEFAULT_WINDOW_CAP,
    max_state_dim: int = MAX_STATE_DIM,
    max_density_dim: int = MAX_DENSITY_DIM,
    check_intermediates: bool = False,
    intermediate_tol: float = INTERMEDIATE_TOL,
    record_wall_time: bool = False,
) -> SweepResult:
    """Steer toward random targets per dimension and record the achieved error.

    State sweeps steer e_0 to a Haar target. Density sweeps steer a random ρ to
    a random σ whose support size alternates between ``dim`` and ``dim // 2``
    and whose offset is drawn from -2..2.
    """

    dims = _check_sweep_args(kind, dims, trials, max_state_dim, max_density_dim)
    eps = check_eps(eps)
    _rng(seed)

    def trial_fn(dim: int, trial: int) -> SynthesisReport:
        rng = _rng(seed, dim, trial)
        if kind == "state":
            return _state_trial(dim, rng, eps, window_cap, random_source=False)
        return _density_trial(
            dim, trial, rng, eps, window_cap, check_intermediates, intermediate_tol
        )

    started = time.perf_counter()
    rows = _run_trials(
        dims, trials, trial_fn, max_workers=max_workers, record_wall_time=record_wall_time
    )
    result = SweepResult(kind=kind, dims=dims, trials=int(trials), seed=int(seed), eps=eps, rows=rows)
    log.info(
        "Universality sweep (kind=%s, dims=%s, trials=%s, passed=%s, max_error=%.3e, elapsed=%.2fs)",
        kind,
        dims,
        trials,
        result.passed,
        result.max_error,
        time.perf_counter() - started,
    )
    for failure in result.failures:
        log.warning("Sweep trial failed: %s", failure)
    return result


def bench(
    dims: Sequence[int],
    eps: float,
    trials: int,
    seed: int,
    *,
    kind: str = "state",
    max_workers: int = _DEFAULT_WORKERS,
    window_cap: int = DEFAULT_WINDOW_CAP,
    max_state_dim: int = MAX_STATE_DIM,
    max_density_dim: int = MAX_DENSITY_DIM,
    record_wall_time: bool = False,
) -> pd.DataFrame:
    """Return one row of counts per (dim, trial), steering random sources to random targets."""

    dims = _check_sweep_args(kind, dims, trials, max_state_dim, max_density_dim)
    eps = check_eps(eps)
    _rng(seed)

    def trial_fn(dim: int, trial: int) -> SynthesisReport:
        rng = _rng(seed, dim, trial)
        if kind == "state":
            return _state_trial(dim, rng, eps, window_cap, random_source=True)
        return _density_trial(dim, trial, rng, eps, window_cap, False)

    return _run_trials(
        dims, trials, trial_fn, max_workers=max_workers, record_wall_time=record_wall_time
    )


def op_count_slope(frame: pd.DataFrame) -> float:
    """Least-squares slope of ``op_count`` against ``dim``."""

    slope, _ = np.polyfit(frame["dim"].astype(float), frame["op_count"].astype(float), 1)
    return float(slope)


@dataclass(frozen=True)
class NegativeControlReport:
    target_index: int
    word_length: int
    seed: int
    u2_only_fidelity: float
    complement_drift: float
    full_family_fidelity: float
    full_family_ops: int

    @property
    def passed(self) -> bool:
        return (
            self.u2_only_fidelity <= 1e-15
            and self.complement_drift <= 1e-12
            and self.full_family_fidelity >= 1.0 - 1e-12
        )

    def as_dict(self) -> Dict[str, object]:
        return {
            "target_index": self.target_index,
            "word_length": self.word_length,
            "seed": self.seed,
            "passed": self.passed,
            "u2_only_fidelity": self.u2_only_fidelity,
            "complement_drift": self.complement_drift,
            "full_family_fidelity": self.full_family_fidelity,
            "full_family_ops": self.full_family_ops,
        }


def complement_drift(start: StateVector, word, *, window_cap: int = DEFAULT_WINDOW_CAP) -> float:
    """Largest change of |amplitude| outside {0, 1} over every prefix of ``word``."""

    outside = [i for i in start.window.indices() if i not in (0, 1)]
    reference = np.array([abs(start.amplitude(i)) for i in outside])
    drift = 0.0
    for value in program_trajectory(start, word, window_cap=window_cap, program_cap=len(word) + 1):
        moduli = np.array([abs(value.amplitude(i)) for i in outside])
        if moduli.size:
            drift = max(drift, float(np.max(np.abs(moduli - reference))))
    return drift


def negative_control(
    target_index: int,
    word_length: int,
    seed: int,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
) -> NegativeControlReport:
    """Show that U(2)-only words never leave span{e_0, e_1} while shifts reach e_target."""

    if isinstance(target_index, bool) or int(target_index) != target_index or target_index in (0, 1):
        raise InvalidInput(f"target index must be an integer outside {{0, 1}}, got {target_index!r}")
    if isinstance(word_length, bool) or int(word_length) != word_length or word_length < 0:
        raise InvalidInput(f"word length must be a non-negative integer, got {word_length!r}")
    target_index = int(target_index)
    lo, hi = min(0, target_index), max(1, target_index)
    Window(lo, hi - lo + 1).check_cap(window_cap)
    rng = _rng(seed)
    word = FiniteFamily.u2_only().random_word(int(word_length), rng)

    target = basis_state(target_index)
    reached = apply_program(basis_state(0), word, window_cap=window_cap, program_cap=len(word) + 1)
    u2_only_fidelity = state_fidelity(reached, target)

    probe = random_state(hi - lo + 1, rng)
    probe = StateVector(lo, probe.amps)
    drift = complement_drift(probe, word, window_cap=window_cap)

    full_seq, full_report = steer_state(basis_state(0), target, 1e-12, window_cap=window_cap)
    report = NegativeControlReport(
        target_index=target_index,
        word_length=int(word_length),
        seed=int(seed),
        u2_only_fidelity=u2_only_fidelity,
        complement_drift=drift,
        full_family_fidelity=1.0 - full_report.final_error,
        full_family_ops=len(full_seq),
    )
    log.info("Negative control %s", report.as_dict())
    return report


def fibonacci_sphere(samples: int) -> np.ndarray:
    """Return ``samples`` nearly uniform unit vectors (Bloch coordinates)."""

    index = np.arange(samples, dtype=float) + 0.5
    z = 1.0 - 2.0 * index / samples
    radius = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    azimuth = math.pi * (1.0 + math.sqrt(5.0)) * index
    return np.column_stack([radius * np.cos(azimuth), radius * np.sin(azimuth), z])


def bloch_vectors(states: np.ndarray) -> np.ndarray:
    alpha, beta = states[:, 0], states[:, 1]
    cross = np.conj(alpha) * beta
    return np.column_stack(
        [2.0 * cross.real, 2.0 * cross.imag, np.abs(alpha) ** 2 - np.abs(beta) ** 2]
    )


def coverage_generators(grid_steps: int) -> np.ndarray:
    """Rotation family U2(2πk/g, 0, 0, 0) followed by phase family U2(0, 0, 2πk/g, 0)."""

    angles = [2.0 * math.pi * k / grid_steps for k in range(grid_steps)]
    rotations = [u2_matrix(U2Params(a, 0.0, 0.0, 0.0)) for a in angles]
    phases = [u2_matrix(U2Params(0.0, 0.0, a, 0.0)) for a in angles]
    return np.array(rotations + phases)


@dataclass
class CoverageTable:
    """Covering radius (fidelity angle) of the orbit of e_0 per word length."""

    grid_steps: int
    samples: int
    radii: List[float] = field(default_factory=list)
    orbit_sizes: List[int] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.radii, self.radii[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "word_length": list(range(len(self.radii))),
                "orbit_size": self.orbit_sizes,
                "covering_radius": self.radii,
            }
        )

    def as_dict(self) -> Dict[str, object]:
        return {
            "grid_steps": self.grid_steps,
            "samples": self.samples,
            "monotone": self.monotone,
            "levels": [
                {"word_length": length, "orbit_size": size, "covering_radius": radius}
                for length, (size, radius) in enumerate(zip(self.orbit_sizes, self.radii))
            ],
        }


def _covering_radius(tree: cKDTree, sample: np.ndarray) -> float:
    chords, _ = tree.query(sample, k=1)
    half = np.clip(np.max(chords) / 2.0, 0.0, 1.0)
    return float(np.arcsin(half))


def net_coverage_oracle(
    grid_steps: int,
    max_word_length: int,
    dim: int = 2,
    *,
    samples: int = 512,
    node_cap: int = 2_000_000,
    max_grid: int = 32,
    max_length: int = 6,
) -> CoverageTable:
    """Enumerate the orbit of e_0 under words over a U(2) grid and report its covering radius.

    Orbit points are identified up to global phase through their Bloch
    vectors. The fidelity angle arccos|⟨a|b⟩| is half the Bloch angle, so
    it is recovered from the chord distance as arcsin(chord / 2).
    """

    if dim != 2:
        raise InvalidInput(f"the coverage oracle only supports dim 2, got {dim!r}")
    if isinstance(grid_steps, bool) or int(grid_steps) != grid_steps or not 1 <= grid_steps <= max_grid:
        raise InvalidInput(f"grid_steps must lie in 1..{max_grid}, got {grid_steps!r}")
    if isinstance(max_word_length, bool) or int(max_word_length) != max_word_length or not 0 <= max_word_length <= max_length:
        raise InvalidInput(f"max_word_length must lie in 0..{max_length}, got {max_word_length!r}")
    if samples < 1:
        raise InvalidInput(f"samples must be positive, got {samples!r}")

    generators = coverage_generators(int(grid_steps))
    sample = fibonacci_sphere(int(samples))
    frontier = np.array([[1.0, 0.0]], dtype=np.complex128)
    orbit = bloch_vectors(frontier)
    table = CoverageTable(grid_steps=int(grid_steps), samples=int(samples))
    tree = cKDTree(orbit)
    table.radii.append(_covering_radius(tree, sample))
    table.orbit_sizes.append(len(orbit))

    nodes = 0
    for length in range(1, int(max_word_length) + 1):
        nodes += len(frontier) * len(generators)
        if nodes > node_cap:
            raise BudgetExceeded(
                f"coverage enumeration needs {nodes} nodes at word length {length}, cap is {node_cap}"
            )
        if not len(frontier):
            table.radii.append(table.radii[-1])
            table.orbit_sizes.append(len(orbit))
            continue
        candidates = np.einsum("gij,fj->gfi", generators, frontier).reshape(-1, 2)
        bloch = bloch_vectors(candidates)
        _, first = np.unique(np.round(bloch, 10) + 0.0, axis=0, return_index=True)
        first.sort()
        candidates, bloch = candidates[first], bloch[first]
        distance, _ = tree.query(bloch, k=1, distance_upper_bound=1e-9)
        fresh = np.isinf(distance)
        frontier = candidates[fresh]
        orbit = np.vstack([orbit, bloch[fresh]])
        tree = cKDTree(orbit)
        table.radii.append(_covering_radius(tree, sample))
        table.orbit_sizes.append(len(orbit))
        log.debug(
            "Coverage level %s: orbit=%s radius=%.6f", length, len(orbit), table.radii[-1]
        )

    log.info(
        "Coverage oracle (grid=%s, lengths=0..%s, final_radius=%.6f)",
        grid_steps,
        max_word_length,
        table.radii[-1],
    )
    return table


__all__ = [
    "CSV_COLUMNS",
    "CoverageTable",
    "FiniteFamily",
    "NegativeControlReport",
    "SweepResult",
    "bench",
    "check_trajectory",
    "complement_drift",
    "negative_control",
    "net_coverage_oracle",
    "op_count_slope",
    "random_density",
    "random_state",
    "random_unitary",
    "universality_sweep",
]
