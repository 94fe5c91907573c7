"""On-disk formats.

Q-table snapshot (``*.qtab``)::

    CTQL-QTABLE 1\\n
    {"shape": [39, 37, 25], "dtype": "<f8", "grids": {...sha256...}, "sha256": "..."}\\n
    <raw little-endian float64 values, C order>

Per-episode CSV (``episodes.csv``) has one row per (algorithm, session,
episode); evaluation and robustness CSVs hold one row per frozen evaluation.
Floats are written with ``repr`` so they round-trip exactly. Missing values
are empty cells.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .metrics import EpisodeRecord, SessionLog
from .policies import ACTION_GRID, ANGLE_GRID, VELOCITY_GRID

QTABLE_MAGIC = b"CTQL-QTABLE 1\n"
GRIDS = {"angle": ANGLE_GRID, "velocity": VELOCITY_GRID, "action": ACTION_GRID}

EPISODE_FIELDS = ("algorithm", "beta", "reward_kind", "session", "episode", "cumulative_reward",
                  "tutor_fraction", "goal_met", "settling_time", "steady_state_error")
EVALUATION_FIELDS = ("algorithm", "beta", "reward_kind", "session", "goal_met", "settling_time",
                     "steady_state_error", "cumulative_reward")
ROBUSTNESS_FIELDS = ("algorithm", "beta", "reward_kind", "setup", "angle0", "velocity0", "mass_factor",
                     "length_factor", "goal_met", "settling_time", "steady_state_error")


class QTableError(ValueError):
    pass


def grid_checksums(grids=GRIDS) -> dict:
    return {name: grid.checksum() for name, grid in grids.items()}


def write_qtable(path, q: np.ndarray, grids=GRIDS) -> None:
    expected = tuple(len(g) for g in grids.values())
    if q.shape != expected:
        raise QTableError(f"table shape {q.shape} does not match grids {expected}")
    if not np.all(np.isfinite(q)):
        raise QTableError("refusing to write a table with non-finite entries")
    payload = np.ascontiguousarray(q, dtype="<f8").tobytes()
    header = {
        "shape": list(q.shape),
        "dtype": "<f8",
        "grids": grid_checksums(grids),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(QTABLE_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)


def read_qtable(path, grids=GRIDS) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(QTABLE_MAGIC):
        raise QTableError(f"{path}: not a Q-table snapshot")
    end = data.find(b"\n", len(QTABLE_MAGIC))
    if end < 0:
        raise QTableError(f"{path}: truncated header")
    try:
        header = json.loads(data[len(QTABLE_MAGIC):end])
    except json.JSONDecodeError as exc:
        raise QTableError(f"{path}: corrupt header: {exc}") from None
    if header.get("grids") != grid_checksums(grids):
        raise QTableError(f"{path}: grid checksum mismatch; snapshot was written for different grids")
    shape = tuple(header["shape"])
    payload = data[end + 1:]
    if len(payload) != 8 * math.prod(shape):
        raise QTableError(f"{path}: truncated payload ({len(payload)} bytes, expected {8 * math.prod(shape)})")
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise QTableError(f"{path}: payload checksum mismatch")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def _beta(cfg_beta):
    return None if cfg_beta is None else float(cfg_beta)


def episode_rows(label, beta, reward, session, log: SessionLog):
    for rec in log.records():
        yield (label, _beta(beta), reward, session, rec.episode, rec.cumulative_reward,
               rec.tutor_fraction, rec.goal_met, rec.settling_time, rec.steady_state_error)


def write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _opt_int(s):
    return None if s == "" else int(s)


def _opt_float(s):
    return None if s == "" else float(s)


def read_episodes(path) -> dict:
    """``{(algorithm, session): SessionLog}`` rebuilt from an episode CSV, in any row order."""
    groups = {}
    meta = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EPISODE_FIELDS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            key = (row["algorithm"], int(row["session"]))
            meta[key] = {"beta": _opt_float(row["beta"]), "reward_kind": row["reward_kind"]}
            groups.setdefault(key, []).append(EpisodeRecord(
                episode=int(row["episode"]),
                cumulative_reward=float(row["cumulative_reward"]),
                tutor_fraction=float(row["tutor_fraction"]),
                goal_met=row["goal_met"] == "1",
                settling_time=_opt_int(row["settling_time"]),
                steady_state_error=_opt_float(row["steady_state_error"]),
            ))
    logs = {}
    for key, records in groups.items():
        records.sort(key=lambda r: r.episode)
        logs[key] = SessionLog.from_records(records, algorithm=key[0], session=key[1], **meta[key])
    return dict(sorted(logs.items()))


def read_evaluations(path) -> dict:
    """``{(algorithm, session): EpisodeRecord}`` from an evaluation CSV."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EVALUATION_FIELDS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            out[(row["algorithm"], int(row["session"]))] = EpisodeRecord(
                episode=1,
                cumulative_reward=float(row["cumulative_reward"]),
                tutor_fraction=float("nan"),
                goal_met=row["goal_met"] == "1",
                settling_time=_opt_int(row["settling_time"]),
                steady_state_error=_opt_float(row["steady_state_error"]),
            )
    return dict(sorted(out.items()))


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def qtable_filename(label: str, session: int) -> str:
    return f"{label}_s{session:02d}.qtab"
