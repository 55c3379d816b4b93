import subprocess
import sys

import numpy as np
import pytest

from platebem.cli_harness import (
    StudyConfig,
    StudyRow,
    csv_name,
    emit_csv,
    emit_gnuplot_annotations,
    expected_slope,
    fitted_slope,
    main,
    read_csv,
    run_study,
)


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig("circle", 0, 1)
    with pytest.raises(ValueError):
        StudyConfig("circle", -1, 3)
    with pytest.raises(ValueError):
        StudyConfig("circle", 0, 3, projection="l2")
    with pytest.raises(ValueError):
        StudyConfig("custom", 0, 3)
    c = StudyConfig("square", 1, 2)
    assert c.nu == 0.0 and c.projection == "pih"


def test_circle_p0_rows():
    rows = run_study(StudyConfig("circle", 0, 3))
    assert [r.dofs for r in rows] == [2 * 4 * 2**k for k in range(3)]
    assert [r.level for r in rows] == [0, 1, 2]
    assert rows[0].rate is None and all(r.rate < 0 for r in rows[1:])
    assert all(b.error < a.error for a, b in zip(rows, rows[1:]))


def test_square_p2_dofs():
    rows = run_study(StudyConfig("square", 2, 2))
    assert rows[0].dofs == 5 * 4 + 4
    assert rows[1].dofs == 5 * 8 + 4


def test_interpolated_data_and_poisson_ratio():
    rows = run_study(StudyConfig("pacman", 1, 3, nu=0.3, projection="ih"))
    assert all(np.isfinite(r.error) and r.error > 0 for r in rows)
    assert rows[-1].error < rows[0].error


def test_fitted_slope():
    dofs = [10, 20, 40, 80]
    assert fitted_slope(dofs, [3.0 * d**-2.5 for d in dofs]) == pytest.approx(-2.5, abs=1e-12)
    assert expected_slope(1) == -2.5


def test_csv_name():
    assert csv_name("circle", 0) == "geo-circle_sol-quartic_p-0_q-0.csv"
    assert csv_name("square", 2) == "geo-square_sol-sinhcos_p-2_q-2.csv"
    assert csv_name("pacman", 1) == "geo-pacman_sol-singular_p-1_q-1.csv"


def test_emit_csv_roundtrip(tmp_path):
    rows = [StudyRow(0, 8, 0.1234567890123456789, None), StudyRow(1, 16, 1 / 3, -1.5)]
    path = emit_csv(rows, tmp_path / "x.csv")
    raw = path.read_bytes()
    assert raw.startswith(b"dofs,errs\n") and b"\r" not in raw
    assert read_csv(path) == [(8, rows[0].error), (16, rows[1].error)]
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "y.csv")


def test_annotation_file(tmp_path):
    rows = [StudyRow(0, 8, 1e-2, None), StudyRow(1, 16, 3e-3, -1.7)]
    text = emit_gnuplot_annotations(rows, 0, tmp_path / "a.gp").read_text()
    assert text.count("set arrow") == 3 and "dofs^{-1.5}" in text


def test_main_writes_csv_and_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["--domain", "circle", "--p", "1", "--levels", "2", "--out", str(d), "--annotations"]) == 0
        outs.append((d / "geo-circle_sol-quartic_p-1_q-1.csv").read_bytes())
        assert (d / "geo-circle_sol-quartic_p-1_q-1.gp").exists()
    assert outs[0] == outs[1]
    printed = capsys.readouterr().out
    assert "slope over last 2 levels" in printed


def test_main_dump_matrices(tmp_path):
    assert main(["--domain", "square", "--p", "0", "--levels", "2", "--out", str(tmp_path), "--dump-matrices",
                 "--quad-order", "12"]) == 0
    d = tmp_path / "matrices_square_p0_level1"
    A = np.loadtxt(d / "A.txt")
    assert A.shape == (16, 16)
    for name in ("B", "K", "M", "rhs"):
        assert (d / f"{name}.txt").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["--domain", "circle", "--levels", "1"],
        ["--domain", "circle", "--p", "-1"],
        ["--domain", "circle", "--nu", "1.5"],
        ["--domain", "circle", "--quad-order", "0"],
    ],
)
def test_main_validation_errors(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) != 0
    assert "error" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    bad = subprocess.run([sys.executable, "-m", "platebem", "--domain", "hexagon"], capture_output=True, text=True)
    assert bad.returncode != 0 and "invalid choice" in bad.stderr
    ok = subprocess.run(
        [sys.executable, "-m", "platebem", "--domain", "square", "--p", "0", "--levels", "2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert ok.returncode == 0
    assert (tmp_path / "geo-square_sol-sinhcos_p-0_q-0.csv").exists()
