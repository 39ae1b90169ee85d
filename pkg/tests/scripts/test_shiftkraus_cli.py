import json

import numpy as np
import pandas as pd
import pytest

from app.core.hilbert import Window, basis_state, inner, make_state, trace_distance
from app.scripts import shiftkraus
from app.services.serialization import (
    dumps,
    parse_density,
    parse_state,
    serialize_density,
    serialize_state,
    serialize_unitary,
)
from app.services.verification import random_density, random_state, random_unitary


def _write(path, payload):
    path.write_text(dumps(payload), encoding="utf-8")
    return str(path)


def _run(data_dir, *argv):
    return shiftkraus.main([argv[0], "--data-dir", str(data_dir), *argv[1:]])


def test_steer_state_identity_is_short(tmp_path, data_dir, capsys):
    source = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))
    out = tmp_path / "program.json"

    code = _run(data_dir, "steer-state", "--source", source, "--target", source, "--eps", "1e-9", "--out", str(out))

    assert code == 0
    program = json.loads(out.read_text(encoding="utf-8"))
    assert len(program["ops"]) <= 1
    report = json.loads(capsys.readouterr().out)
    assert report["final_error"] == 0.0
    assert report["wall_time_s"] == 0.0


def test_steer_state_then_apply_reaches_target(tmp_path, data_dir, capsys):
    target_state = make_state(random_state(5, 3).amps, -2)
    source = _write(tmp_path / "source.json", serialize_state(basis_state(1)))
    target = _write(tmp_path / "target.json", serialize_state(target_state))
    program = tmp_path / "program.json"
    reached = tmp_path / "reached.json"

    assert _run(data_dir, "steer-state", "--source", source, "--target", target, "--eps", "1e-9", "--out", str(program)) == 0
    assert _run(data_dir, "apply", "--program", str(program), "--input", source, "--out", str(reached)) == 0

    reached_state = parse_state(json.loads(reached.read_text(encoding="utf-8")))
    assert abs(inner(target_state, reached_state) - 1.0) <= 1e-8


def test_steer_density_rejects_non_positive_input(tmp_path, data_dir, capsys):
    bad = {"offset": 0, "matrix": [[[0.5, 0], [0.6, 0]], [[0.6, 0], [0.5, 0]]]}
    source = _write(tmp_path / "bad.json", bad)
    target = _write(tmp_path / "sigma.json", serialize_density(random_density(2, 1)))
    out = tmp_path / "program.json"

    code = _run(data_dir, "steer-density", "--source", source, "--target", target, "--eps", "1e-9", "--out", str(out))

    assert code == 2
    assert "NotPositive" in capsys.readouterr().err
    assert not out.exists()


def test_malformed_amplitude_pair_reports_field_path(tmp_path, data_dir, capsys):
    source = _write(tmp_path / "bad.json", {"offset": 0, "amplitudes": [[1.0, 0.0, 0.0]]})
    out = tmp_path / "program.json"

    code = _run(data_dir, "steer-state", "--source", source, "--target", source, "--eps", "1e-9", "--out", str(out))

    assert code == 2
    err = capsys.readouterr().err
    assert "Error: SchemaError: amplitudes[0]" in err
    assert not out.exists()


def test_missing_eps_is_a_validation_error(tmp_path, data_dir, capsys):
    source = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))

    code = _run(data_dir, "steer-state", "--source", source, "--target", source, "--out", str(tmp_path / "p.json"))

    assert code == 2
    assert "--eps" in capsys.readouterr().err


@pytest.mark.parametrize("flags", [["--eps", "1.5"], ["--eps", "1e-9", "--window-cap", "8"]])
def test_job_flags_are_validated(tmp_path, data_dir, flags):
    source = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))

    code = _run(data_dir, "steer-state", "--source", source, "--target", source, "--out", str(tmp_path / "p.json"), *flags)

    assert code == 2


def test_window_cap_hit_exits_4_without_output(tmp_path, data_dir, capsys):
    wide = make_state(np.ones(20), 0, normalize=True)
    source = _write(tmp_path / "wide.json", serialize_state(wide))
    target = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))
    out = tmp_path / "program.json"

    code = _run(
        data_dir, "steer-state", "--source", source, "--target", target,
        "--eps", "1e-9", "--window-cap", "16", "--out", str(out),
    )

    assert code == 4
    assert "WindowOverflow" in capsys.readouterr().err
    assert not out.exists()


def test_unmet_tolerance_exits_3_after_writing(tmp_path, data_dir, capsys):
    matrix = _write(tmp_path / "u.json", serialize_unitary(random_unitary(4, 2), Window(0, 4)))
    out = tmp_path / "program.json"

    code = _run(data_dir, "compile-unitary", "--matrix", matrix, "--eps", "1e-17", "--out", str(out))

    assert code == 3
    assert out.exists()
    assert "ToleranceUnmet" in capsys.readouterr().err


def test_compile_unitary_uses_configured_eps(tmp_path, data_dir, capsys):
    matrix = _write(tmp_path / "u.json", serialize_unitary(random_unitary(3, 5), Window(-1, 3)))
    out = tmp_path / "program.json"

    code = _run(data_dir, "compile-unitary", "--matrix", matrix, "--out", str(out))

    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["final_error"] <= 1e-10
    assert report["u2_count"] > 0


def test_steer_density_is_byte_identical_across_runs(tmp_path, data_dir, capsys):
    source = _write(tmp_path / "rho.json", serialize_density(random_density(3, 7)))
    target = _write(tmp_path / "sigma.json", serialize_density(random_density(2, 8)))
    outputs = []
    reports = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        code = _run(data_dir, "steer-density", "--source", source, "--target", target, "--eps", "1e-9", "--out", str(out))
        assert code == 0
        outputs.append(out.read_bytes())
        reports.append(capsys.readouterr().out)

    assert outputs[0] == outputs[1]
    assert reports[0] == reports[1]
    assert json.loads(reports[0])["stage_count"] == 2


def test_apply_density_program(tmp_path, data_dir, capsys):
    rho = _write(tmp_path / "rho.json", serialize_density(random_density(2, 3)))
    sigma_value = random_density(3, 4)
    sigma = _write(tmp_path / "sigma.json", serialize_density(sigma_value))
    program = tmp_path / "program.json"
    reached = tmp_path / "reached.json"

    assert _run(data_dir, "steer-density", "--source", rho, "--target", sigma, "--eps", "1e-9", "--out", str(program)) == 0
    capsys.readouterr()
    assert _run(data_dir, "apply", "--program", str(program), "--input", rho, "--out", str(reached)) == 0

    summary = json.loads(capsys.readouterr().out)
    assert summary["kind"] == "density"
    assert summary["stage_count"] == 2
    reached_density = parse_density(json.loads(reached.read_text(encoding="utf-8")))
    assert trace_distance(reached_density, sigma_value) <= 1e-9


def test_apply_refuses_kraus_stage_on_state(tmp_path, data_dir, capsys):
    program = _write(
        tmp_path / "program.json",
        {"ops": [{"op": "kraus", "elements": [{"weight": 1.0, "swap": 0, "project": False}], "complement": False}]},
    )
    state = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))
    out = tmp_path / "out.json"

    code = _run(data_dir, "apply", "--program", program, "--input", state, "--out", str(out))

    assert code == 2
    assert "KrausOnState" in capsys.readouterr().err
    assert not out.exists()


def test_verify_universality_writes_150_rows(tmp_path, data_dir, capsys):
    csv_path = tmp_path / "sweep.csv"
    out = tmp_path / "sweep.json"

    code = _run(
        data_dir, "verify", "--suite", "universality", "--kind", "state",
        "--dims", "2,4,8", "--trials", "50", "--eps", "1e-9", "--seed", "7",
        "--csv", str(csv_path), "--out", str(out),
    )

    assert code == 0
    frame = pd.read_csv(csv_path)
    assert len(frame) == 150
    assert list(frame.columns) == [
        "dim", "trial", "op_count", "u2_count", "shift_count", "final_error", "wall_time_s",
    ]
    assert json.loads(out.read_text(encoding="utf-8"))["passed"] is True


def test_verify_csv_is_byte_identical_across_runs(tmp_path, data_dir):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for path, workers in zip(paths, ("1", "4")):
        code = _run(
            data_dir, "verify", "--kind", "density", "--dims", "2:3", "--trials", "2",
            "--seed", "3", "--workers", workers, "--csv", str(path),
        )
        assert code == 0

    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert b"\r\n" in paths[0].read_bytes()


def test_verify_negative_control(tmp_path, data_dir, capsys):
    code = _run(data_dir, "verify", "--suite", "negative", "--target-index", "5", "--word-length", "300")

    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert report["u2_only_fidelity"] == 0.0


def test_verify_coverage(tmp_path, data_dir, capsys):
    csv_path = tmp_path / "coverage.csv"

    code = _run(data_dir, "verify", "--suite", "coverage", "--grid", "8", "--max-length", "2", "--csv", str(csv_path))

    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["monotone"] is True
    assert len(pd.read_csv(csv_path)) == 3


def test_verify_coverage_node_cap_exits_4(tmp_path, data_dir, capsys):
    config = data_dir / "config.yaml"
    config.write_text("limits:\n  coverage_node_cap: 100\n", encoding="utf-8")

    code = _run(data_dir, "verify", "--suite", "coverage", "--grid", "16", "--max-length", "3")

    assert code == 4
    assert "BudgetExceeded" in capsys.readouterr().err


def test_bench_requires_csv(tmp_path, data_dir, capsys):
    code = _run(data_dir, "bench", "--dims", "2,4")

    assert code == 2
    assert "--csv" in capsys.readouterr().err


def test_bench_writes_rows(tmp_path, data_dir, capsys):
    csv_path = tmp_path / "bench.csv"

    code = _run(data_dir, "bench", "--dims", "2,4,8", "--trials", "2", "--csv", str(csv_path))

    assert code == 0
    frame = pd.read_csv(csv_path)
    assert len(frame) == 6
    assert frame["wall_time_s"].eq(0.0).all()
    assert json.loads(capsys.readouterr().out)["rows"] == 6


def test_bench_rejects_oversized_dims(tmp_path, data_dir, capsys):
    code = _run(data_dir, "bench", "--dims", "65", "--csv", str(tmp_path / "b.csv"))

    assert code == 2
    assert not (tmp_path / "b.csv").exists()


def test_unwritable_out_exits_2(tmp_path, data_dir, capsys):
    source = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")

    code = _run(
        data_dir, "steer-state", "--source", source, "--target", source,
        "--eps", "1e-9", "--out", str(blocker / "program.json"),
    )

    assert code == 2
    assert "cannot write" in capsys.readouterr().err


def test_negative_control_oversized_target_exits_4(data_dir, capsys):
    code = _run(data_dir, "verify", "--suite", "negative", "--target-index", "1000000000", "--word-length", "10")

    assert code == 4
    assert "WindowOverflow" in capsys.readouterr().err


def test_apply_ignores_missing_eps(tmp_path, data_dir, capsys):
    program = _write(tmp_path / "program.json", {"ops": [{"op": "shift", "k": 3}]})
    state = _write(tmp_path / "e0.json", serialize_state(basis_state(0)))
    out = tmp_path / "out.json"

    code = _run(data_dir, "apply", "--program", program, "--input", state, "--out", str(out))

    assert code == 0
    reached = parse_state(json.loads(out.read_text(encoding="utf-8")))
    assert inner(basis_state(3), reached) == pytest.approx(1.0)


def _rerun_bytes(data_dir, capsys, outputs, *argv):
    captured = []
    for _ in range(2):
        assert _run(data_dir, *argv) == 0
        captured.append((capsys.readouterr().out, [path.read_bytes() for path in outputs]))
    return captured


def test_steer_state_and_apply_are_byte_identical_across_runs(tmp_path, data_dir, capsys):
    source = _write(tmp_path / "source.json", serialize_state(random_state(4, 21)))
    target = _write(tmp_path / "target.json", serialize_state(make_state(random_state(6, 22).amps, 3)))
    program = tmp_path / "program.json"
    reached = tmp_path / "reached.json"

    steered = _rerun_bytes(
        data_dir, capsys, [program],
        "steer-state", "--source", source, "--target", target, "--eps", "1e-9", "--out", str(program),
    )
    applied = _rerun_bytes(
        data_dir, capsys, [reached],
        "apply", "--program", str(program), "--input", source, "--out", str(reached),
    )

    assert steered[0] == steered[1]
    assert applied[0] == applied[1]


def test_compile_unitary_is_byte_identical_across_runs(tmp_path, data_dir, capsys):
    matrix = _write(tmp_path / "u.json", serialize_unitary(random_unitary(5, 23), Window(-2, 5)))
    out = tmp_path / "program.json"

    runs = _rerun_bytes(data_dir, capsys, [out], "compile-unitary", "--matrix", matrix, "--out", str(out))

    assert runs[0] == runs[1]


def test_bench_is_byte_identical_across_runs(tmp_path, data_dir, capsys):
    csv_path = tmp_path / "bench.csv"

    runs = _rerun_bytes(
        data_dir, capsys, [csv_path],
        "bench", "--dims", "2,4", "--trials", "3", "--seed", "5", "--csv", str(csv_path),
    )

    assert runs[0] == runs[1]
