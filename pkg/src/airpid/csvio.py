"""Versioned CSV files.

Every file starts with a schema line ``#airpid:<kind>/<version>`` followed by
the header row.  Floats are written with ``repr`` so they round-trip exactly.
"""
import csv
import math

import numpy as np

SCHEMA_VERSION = 1

SCHEMAS = {
    "trajectory": ["t", "x", "y", "z", "vx", "vy", "vz", "kp", "ki", "kd",
                   "cmd_x", "cmd_y", "cmd_z", "pe", "leg_id"],
    "legs": ["leg_id", "episode", "start_x", "start_y", "start_z",
             "target_x", "target_y", "target_z", "start_step", "end_step",
             "completed", "effective_speed", "settling_time_s", "overshoot_m", "final_error"],
    "training": ["iteration", "timestep", "mean_reward_raw", "mean_leg_effective_speed",
                 "settling_time_s", "overshoot_m", "surrogate", "value_loss", "entropy",
                 "clip_fraction"],
    "training_legs": ["leg_id", "timestep", "completed", "distance", "effective_speed",
                      "settling_time_s", "overshoot_m", "final_error"],
    "gains": ["t", "kp", "ki", "kd", "pe", "leg_id"],
    "metrics": ["controller", "legs", "effective_speed", "settling_time_s", "overshoot_m",
                "not_settled_rate", "undefined_overshoot_rate", "success_rate"],
    "path": ["t", "x", "y", "z"],
    "waypoints": ["index", "i", "j", "k", "x", "y", "z"],
}


TEXT_COLUMNS = {"controller"}


class CsvFormatError(ValueError):
    pass


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(value)
    if isinstance(value, str):
        return value
    x = float(value)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, kind, rows):
    columns = SCHEMAS[kind]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#airpid:{kind}/{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            if len(r) != len(columns):
                raise CsvFormatError(f"row has {len(r)} fields, {kind} expects {len(columns)}")
            w.writerow([fmt(v) for v in r])


def _parse(cell):
    if cell == "":
        return None
    return float(cell)


def read_csv(path, kind=None):
    """Return ``(kind, columns, rows)`` with every cell parsed to float/None."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("#airpid:") or "/" not in first:
            raise CsvFormatError(f"{path}: missing schema line")
        found, _, version = first[len("#airpid:"):].partition("/")
        if version != str(SCHEMA_VERSION):
            raise CsvFormatError(f"{path}: unsupported schema version {version!r}")
        if found not in SCHEMAS:
            raise CsvFormatError(f"{path}: unknown schema {found!r}")
        if kind is not None and found != kind:
            raise CsvFormatError(f"{path}: expected a {kind} file, got {found}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCHEMAS[found]:
            raise CsvFormatError(f"{path}: header does not match schema {found}")
        text = [c in TEXT_COLUMNS for c in header]
        rows = []
        for lineno, raw in enumerate(reader, start=3):
            if len(raw) != len(header):
                raise CsvFormatError(f"{path}: row {lineno} has {len(raw)} fields, expected {len(header)}")
            try:
                rows.append([c if is_text else _parse(c) for c, is_text in zip(raw, text)])
            except ValueError:
                raise CsvFormatError(f"{path}: row {lineno} has a non-numeric field") from None
    return found, header, rows
