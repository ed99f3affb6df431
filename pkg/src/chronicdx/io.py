"""Plain-text file formats for cohorts, feature matrices and labels.

All files are UTF-8 CSV with a fixed header.  Missing values are empty
fields.  Floats are written with ``repr`` so a read-write cycle reproduces
the file byte for byte.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterator, Sequence

from .domain import (
    ActivityEntry,
    BGReading,
    BPReading,
    Cohort,
    Column,
    DailyRecord,
    FeatureMatrix,
    ParticipantProfile,
)
from .features import FEATURE_COLUMNS, matrix_from_cells

PROFILE_HEADER = ("id", "gender", "age", "ethnicity", "bmi", "smoking", "drinking",
                  "diabetes", "hyperlipidemia", "hypertension")
RECORD_HEADER = ("participant_id", "day_index", "field", "value", "tag")
LABEL_HEADER = ("id", "diabetes", "hyperlipidemia", "hypertension")
RECORD_FIELDS = ("steps", "sleep_minutes", "systolic", "diastolic", "glucose", "activity", "empty")


class DataFormatError(ValueError):
    """Malformed input file; the message names the file and line."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path: str | Path, header: Sequence[str], rows: Iterator[Sequence]) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _read(path: str | Path, header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFormatError(path, 0, "file not found") from None
    except UnicodeDecodeError as exc:
        raise DataFormatError(path, 0, f"not UTF-8 text ({exc.reason})") from None
    reader = csv.reader(io.StringIO(text))
    try:
        first = next(reader)
    except StopIteration:
        raise DataFormatError(path, 1, "empty file") from None
    if tuple(first) != tuple(header):
        raise DataFormatError(path, 1, f"unexpected header {first!r}; expected {list(header)!r}")
    for row in reader:
        if len(row) != len(header):
            raise DataFormatError(path, reader.line_num, f"expected {len(header)} fields, found {len(row)}")
        yield reader.line_num, row


def _parse(path, line: int, text: str, kind, what: str, optional: bool = True):
    if text == "":
        if optional:
            return None
        raise DataFormatError(path, line, f"missing {what}")
    try:
        if kind is bool:
            if text not in ("yes", "no"):
                raise ValueError(text)
            return text == "yes"
        return kind(text)
    except ValueError:
        raise DataFormatError(path, line, f"bad {what} {text!r}") from None


# ---------------------------------------------------------------------------
# Cohorts


def write_profiles(profiles: Sequence[ParticipantProfile], path: str | Path) -> Path:
    return _write(path, PROFILE_HEADER, (
        (p.id, p.gender, p.age, p.ethnicity, None if p.bmi is None else float(p.bmi), p.smoking, p.drinking,
         p.diabetes_label, bool(p.hyperlipidemia_label), bool(p.hypertension_label))
        for p in profiles
    ))


def read_profiles(path: str | Path) -> list[ParticipantProfile]:
    out = []
    for line, r in _read(path, PROFILE_HEADER):
        out.append(ParticipantProfile(
            id=_parse(path, line, r[0], str, "id", optional=False),
            gender=r[1] or None,
            age=_parse(path, line, r[2], int, "age"),
            ethnicity=r[3] or None,
            bmi=_parse(path, line, r[4], float, "bmi"),
            smoking=r[5] or None,
            drinking=r[6] or None,
            diabetes_label=_parse(path, line, r[7], str, "diabetes label", optional=False),
            hyperlipidemia_label=_parse(path, line, r[8], bool, "hyperlipidemia label", optional=False),
            hypertension_label=_parse(path, line, r[9], bool, "hypertension label", optional=False),
        ))
    return out


def _record_rows(rec: DailyRecord):
    pid, day = rec.participant_id, rec.day_index
    if not rec.is_upload():
        yield pid, day, "empty", None, None
        return
    if rec.steps is not None:
        yield pid, day, "steps", int(rec.steps), None
    if rec.sleep_minutes is not None:
        yield pid, day, "sleep_minutes", float(rec.sleep_minutes), None
    for i, b in enumerate(rec.bp_readings):
        yield pid, day, "systolic", float(b.systolic), f"{i}@{b.time_of_day}"
        yield pid, day, "diastolic", float(b.diastolic), f"{i}@{b.time_of_day}"
    for g in rec.bg_readings:
        yield pid, day, "glucose", float(g.value), f"{g.meal_tag}@{g.time_of_day}"
    for a in rec.activities:
        yield pid, day, "activity", float(a.duration_minutes), a.kind


def write_records(records: Sequence[DailyRecord], path: str | Path) -> Path:
    return _write(path, RECORD_HEADER, (row for rec in records for row in _record_rows(rec)))


def _split_tag(path, line: int, tag: str) -> tuple[str, int]:
    head, sep, minute = tag.rpartition("@")
    if not sep:
        raise DataFormatError(path, line, f"bad reading tag {tag!r}")
    return head, _parse(path, line, minute, int, "time of day", optional=False)


def read_records(path: str | Path) -> list[DailyRecord]:
    days: dict[tuple[str, int], dict] = {}
    for line, (pid, day_text, fld, value, tag) in _read(path, RECORD_HEADER):
        day = _parse(path, line, day_text, int, "day_index", optional=False)
        if not pid:
            raise DataFormatError(path, line, "missing participant_id")
        if fld not in RECORD_FIELDS:
            raise DataFormatError(path, line, f"unknown field {fld!r}")
        d = days.setdefault((pid, day), {"steps": None, "sleep": None, "bp": {}, "bg": [], "act": []})
        if fld == "empty":
            continue
        v = _parse(path, line, value, int if fld == "steps" else float, fld, optional=False)
        if fld == "steps":
            d["steps"] = v
        elif fld == "sleep_minutes":
            d["sleep"] = v
        elif fld in ("systolic", "diastolic"):
            idx, minute = _split_tag(path, line, tag)
            d["bp"].setdefault(idx, {"time": minute})[fld] = v
        elif fld == "glucose":
            meal, minute = _split_tag(path, line, tag)
            d["bg"].append(BGReading(v, meal, minute))
        else:
            d["act"].append(ActivityEntry(tag, v))
    out = []
    for (pid, day), d in days.items():
        bp = []
        for idx, parts in d["bp"].items():
            if "systolic" not in parts or "diastolic" not in parts:
                raise DataFormatError(path, 0, f"incomplete BP reading {idx!r} for {pid} day {day}")
            bp.append(BPReading(parts["systolic"], parts["diastolic"], parts["time"]))
        out.append(DailyRecord(pid, day, d["steps"], d["sleep"], tuple(bp), tuple(d["bg"]), tuple(d["act"])))
    return out


def write_cohort(cohort: Cohort, directory: str | Path) -> tuple[Path, Path]:
    directory = Path(directory)
    return (write_profiles(cohort.profiles, directory / "profiles.csv"),
            write_records(cohort.records, directory / "daily_records.csv"))


def read_cohort(directory: str | Path) -> Cohort:
    directory = Path(directory)
    return Cohort(tuple(read_profiles(directory / "profiles.csv")),
                  tuple(read_records(directory / "daily_records.csv")))


# ---------------------------------------------------------------------------
# Feature matrices and labels


def write_features(matrix: FeatureMatrix, path: str | Path) -> Path:
    header = ("id",) + tuple(matrix.names)
    return _write(path, header, ((rid, *(matrix.cell(i, j) for j in range(matrix.shape[1])))
                                 for i, rid in enumerate(matrix.row_ids)))


def _columns_from_header(path) -> tuple[Column, ...]:
    """Columns named by a feature file's header; unknown names become numeric columns."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            first = next(csv.reader(fh), None)
    except FileNotFoundError:
        raise DataFormatError(path, 0, "file not found") from None
    except UnicodeDecodeError as exc:
        raise DataFormatError(path, 0, f"not UTF-8 text ({exc.reason})") from None
    if not first or first[0] != "id":
        raise DataFormatError(path, 1, "feature header must start with 'id'")
    known = {c.name: c for c in FEATURE_COLUMNS}
    if len(set(first)) != len(first):
        raise DataFormatError(path, 1, "duplicate column names in header")
    return tuple(known.get(name, Column(name, "numeric")) for name in first[1:])


def read_features(path: str | Path, columns: Sequence[Column] | None = FEATURE_COLUMNS) -> FeatureMatrix:
    """Read a feature file.  With ``columns=None`` the header defines the schema."""
    if columns is None:
        columns = _columns_from_header(path)
    header = ("id",) + tuple(c.name for c in columns)
    ids, rows = [], []
    for line, r in _read(path, header):
        cells = []
        for col, text in zip(columns, r[1:]):
            if text == "":
                cells.append(None)
            elif col.is_categorical:
                if text not in col.categories:
                    raise DataFormatError(path, line, f"unseen category {text!r} in column {col.name!r}")
                cells.append(text)
            else:
                cells.append(_parse(path, line, text, float, col.name))
        ids.append(r[0])
        rows.append(cells)
    try:
        return matrix_from_cells(columns, rows, ids)
    except ValueError as exc:
        raise DataFormatError(path, 0, str(exc)) from None


def write_labels(profiles: Sequence[ParticipantProfile], path: str | Path, row_ids: Sequence[str] | None = None) -> Path:
    by_id = {p.id: p for p in profiles}
    ids = list(row_ids) if row_ids is not None else [p.id for p in profiles]
    return _write(path, LABEL_HEADER, ((i, by_id[i].label("diabetes"), by_id[i].label("hyperlipidemia"),
                                        by_id[i].label("hypertension")) for i in ids))


def read_labels(path: str | Path) -> dict[str, dict[str, str]]:
    """Per disease, a mapping from participant id to label."""
    out: dict[str, dict[str, str]] = {"diabetes": {}, "hyperlipidemia": {}, "hypertension": {}}
    for line, r in _read(path, LABEL_HEADER):
        for disease, text in zip(LABEL_HEADER[1:], r[1:]):
            if not text:
                raise DataFormatError(path, line, f"missing {disease} label")
            out[disease][r[0]] = text
    return out
