import xml.etree.ElementTree as ET

import pytest

from airpid.csvio import CsvFormatError, write_csv
from airpid.plotting import plot_csv

NS = "{http://www.w3.org/2000/svg}"


def gains_csv(path):
    rows = [[0.04 * i, 2.0 + 0.01 * i, 0.25, 1.0 - 0.005 * i, 3.0 - 0.02 * i, i // 50] for i in range(120)]
    write_csv(path, "gains", rows)
    return path


def test_gains_svg_has_three_series(tmp_path):
    svg = plot_csv(gains_csv(tmp_path / "g.csv"), "gains")
    root = ET.fromstring(svg)
    assert len(root.findall(f"{NS}polyline")) == 3
    labels = {t.text for t in root.iter(f"{NS}text")}
    assert {"kp", "ki", "kd", "PID gains", "Time (s)"} <= labels


def test_deterministic_bytes(tmp_path):
    path = gains_csv(tmp_path / "g.csv")
    assert plot_csv(path, "gains") == plot_csv(path, "gains")


def test_training_iterations_csv(tmp_path):
    path = tmp_path / "training.csv"
    write_csv(path, "training", [[i, 1024 * i, -1.0, 0.6 + 0.01 * i, 7.0, None if i == 2 else 0.1,
                                  0.0, 1.0, 4.2, 0.1] for i in range(1, 6)])
    root = ET.fromstring(plot_csv(path, "training"))
    titles = {t.text for t in root.iter(f"{NS}text")}
    assert {"Effective speed (m/s)", "Settling time (s)", "Overshoot (m)"} <= titles


def test_trajectory_panels(tmp_path):
    path = tmp_path / "traj.csv"
    write_csv(path, "trajectory", [[0.04 * i, i * 0.01, 0, 1, 0.1, 0, 0, 2, 0.25, 1, 0.5, 0, 0,
                                    1 - 0.01 * i, 0] for i in range(50)])
    root = ET.fromstring(plot_csv(path, "trajectory"))
    assert len(root.findall(f"{NS}polyline")) == 4


def test_single_point_and_gaps(tmp_path):
    path = tmp_path / "g.csv"
    write_csv(path, "gains", [[0.0, 1.0, None, 1.0, 1.0, 0]])
    root = ET.fromstring(plot_csv(path, "gains"))
    assert len(root.findall(f"{NS}circle")) == 2


def test_wrong_schema_for_kind(tmp_path):
    path = tmp_path / "p.csv"
    write_csv(path, "path", [[0, 1, 2, 3]])
    with pytest.raises(CsvFormatError, match="needs one of"):
        plot_csv(path, "gains")


def test_unknown_kind(tmp_path):
    with pytest.raises(CsvFormatError):
        plot_csv(gains_csv(tmp_path / "g.csv"), "histogram")
