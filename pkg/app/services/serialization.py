"""JSON and CSV interchange for states, densities, unitaries, programs and reports.

Serialization is canonical: keys in a fixed order, two-space indentation,
floats in their shortest round-trip form and a trailing newline, so equal
values always produce identical bytes. Parsing reports the path of the first
offending field.
"""

from __future__ import annotations

import json
import math
import os
from typing import Any, Dict, Iterable, List, Mapping, Tuple

import numpy as np
import pandas as pd

from app.core.errors import InvalidInput, SchemaError
from app.core.hilbert import (
    DEFAULT_WINDOW_CAP,
    STRUCTURAL_TOL,
    DensityMatrix,
    StateVector,
    Window,
    make_density,
    make_state,
)
from app.services.generators import (
    ChannelProgram,
    GeneratorSequence,
    KrausElement,
    KrausStage,
    ProgramItem,
    Shift,
    U2At01,
    U2Params,
)


def _at(path: str, key: Any) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else str(key)


def _object(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object")
    return value


def _field(obj: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(_at(path, key), "missing field")
    return obj[key]


def _list(value: Any, path: str) -> List[Any]:
    if not isinstance(value, list):
        raise SchemaError(path, "expected a list")
    return value


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected an integer, got {value!r}")
    return value


def _float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise SchemaError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(path, f"expected true or false, got {value!r}")
    return value


def _complex(value: Any, path: str) -> complex:
    pair = _list(value, path)
    if len(pair) != 2:
        raise SchemaError(path, f"expected a [re, im] pair, got {len(pair)} entries")
    return complex(_float(pair[0], _at(path, 0)), _float(pair[1], _at(path, 1)))


def _pair(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


def _matrix(value: Any, path: str) -> np.ndarray:
    rows = _list(value, path)
    if not rows:
        raise SchemaError(path, "expected a non-empty square matrix")
    size = len(rows)
    data = np.zeros((size, size), dtype=np.complex128)
    for i, row in enumerate(rows):
        row_path = _at(path, i)
        entries = _list(row, row_path)
        if len(entries) != size:
            raise SchemaError(row_path, f"expected {size} entries, got {len(entries)}")
        for j, entry in enumerate(entries):
            data[i, j] = _complex(entry, _at(row_path, j))
    return data


def _matrix_payload(offset: int, matrix: np.ndarray) -> Dict[str, Any]:
    return {
        "offset": int(offset),
        "matrix": [[_pair(z) for z in row] for row in np.asarray(matrix)],
    }


def parse_state(
    payload: Any,
    *,
    normalize: bool = False,
    window_cap: int = DEFAULT_WINDOW_CAP,
    tolerance: float = STRUCTURAL_TOL,
) -> StateVector:
    obj = _object(payload, "")
    offset = _int(_field(obj, "offset", ""), "offset")
    amps = _list(_field(obj, "amplitudes", ""), "amplitudes")
    if not amps:
        raise SchemaError("amplitudes", "expected at least one amplitude")
    values = [_complex(entry, _at("amplitudes", i)) for i, entry in enumerate(amps)]
    return make_state(values, offset, normalize, window_cap=window_cap, tolerance=tolerance)


def serialize_state(state: StateVector) -> Dict[str, Any]:
    return {"offset": state.offset, "amplitudes": [_pair(z) for z in state.amps]}


def parse_density(
    payload: Any,
    *,
    window_cap: int = DEFAULT_WINDOW_CAP,
    tolerance: float = STRUCTURAL_TOL,
) -> DensityMatrix:
    obj = _object(payload, "")
    offset = _int(_field(obj, "offset", ""), "offset")
    matrix = _matrix(_field(obj, "matrix", ""), "matrix")
    return make_density(matrix, offset, tolerance, window_cap=window_cap)


def serialize_density(rho: DensityMatrix) -> Dict[str, Any]:
    return _matrix_payload(rho.offset, rho.matrix)


def parse_unitary(payload: Any, *, window_cap: int = DEFAULT_WINDOW_CAP) -> Tuple[np.ndarray, Window]:
    """Return the matrix and the window it acts on; unitarity is checked by the compiler."""

    obj = _object(payload, "")
    offset = _int(_field(obj, "offset", ""), "offset")
    matrix = _matrix(_field(obj, "matrix", ""), "matrix")
    window = Window(offset, matrix.shape[0]).check_cap(window_cap)
    return matrix, window


def serialize_unitary(matrix: np.ndarray, window: Window) -> Dict[str, Any]:
    return _matrix_payload(window.offset, matrix)


def _parse_item(entry: Any, path: str) -> ProgramItem:
    obj = _object(entry, path)
    kind = _field(obj, "op", path)
    if kind == "shift":
        return Shift(_int(_field(obj, "k", path), _at(path, "k")))
    if kind == "u2":
        angles = [
            _float(_field(obj, key, path), _at(path, key))
            for key in ("theta", "phi", "lambda", "delta")
        ]
        return U2At01(U2Params(*angles))
    if kind == "kraus":
        raw_elements = _list(_field(obj, "elements", path), _at(path, "elements"))
        if not raw_elements:
            raise SchemaError(_at(path, "elements"), "expected at least one element")
        elements = []
        for index, raw in enumerate(raw_elements):
            element_path = _at(_at(path, "elements"), index)
            element = _object(raw, element_path)
            elements.append(
                KrausElement(
                    _float(_field(element, "weight", element_path), _at(element_path, "weight")),
                    _int(_field(element, "swap", element_path), _at(element_path, "swap")),
                    _bool(_field(element, "project", element_path), _at(element_path, "project")),
                )
            )
        complement = _bool(_field(obj, "complement", path), _at(path, "complement"))
        return KrausStage(tuple(elements), complement)
    raise SchemaError(_at(path, "op"), f"unknown op {kind!r}")


def parse_program(payload: Any) -> ChannelProgram:
    obj = _object(payload, "")
    ops = _list(_field(obj, "ops", ""), "ops")
    return ChannelProgram(tuple(_parse_item(entry, _at("ops", i)) for i, entry in enumerate(ops)))


def _serialize_item(item: ProgramItem) -> Dict[str, Any]:
    if isinstance(item, Shift):
        return {"op": "shift", "k": item.k}
    if isinstance(item, U2At01):
        p = item.params
        return {"op": "u2", "theta": p.theta, "phi": p.phi, "lambda": p.lam, "delta": p.delta}
    if isinstance(item, KrausStage):
        return {
            "op": "kraus",
            "elements": [
                {"weight": e.weight, "swap": e.swap_index, "project": e.project}
                for e in item.elements
            ],
            "complement": item.complement,
        }
    raise InvalidInput(f"cannot serialize {type(item).__name__}")


def serialize_program(program: GeneratorSequence | ChannelProgram | Iterable[ProgramItem]) -> Dict[str, Any]:
    return {"ops": [_serialize_item(item) for item in program]}


def dumps(payload: Mapping[str, Any]) -> str:
    """Return the canonical text of ``payload``."""

    try:
        return json.dumps(payload, indent=2, allow_nan=False, ensure_ascii=False) + "\n"
    except ValueError as exc:
        raise InvalidInput(f"cannot serialize non-finite values: {exc}") from exc


def loads(text: str, source: str = "input") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"{source} is not valid JSON: {exc}") from exc


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror or exc}") from exc
    return loads(text, source=path)


def _write_atomic(path: str, write) -> None:
    tmp = f"{path}.tmp"
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        write(tmp)
        os.replace(tmp, path)
    except OSError as exc:
        raise InvalidInput(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def write_json(payload: Mapping[str, Any], path: str) -> None:
    text = dumps(payload)

    def write(tmp: str) -> None:
        with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)

    _write_atomic(path, write)


def write_csv(frame: pd.DataFrame, path: str) -> None:
    """Write ``frame`` as RFC-4180 CSV (header row, CRLF line endings)."""

    _write_atomic(path, lambda tmp: frame.to_csv(tmp, index=False, lineterminator="\r\n"))


__all__ = [
    "dumps",
    "loads",
    "parse_density",
    "parse_program",
    "parse_state",
    "parse_unitary",
    "read_json",
    "serialize_density",
    "serialize_program",
    "serialize_state",
    "serialize_unitary",
    "write_csv",
    "write_json",
]
