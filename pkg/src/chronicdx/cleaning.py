"""Participant-level exclusion rules applied before featurization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Cohort


@dataclass(frozen=True)
class CleaningReport:
    removed_short_upload: frozenset[str]
    removed_missing_profile: frozenset[str]
    removed_constant_sleep: frozenset[str]
    retained: int

    @property
    def counts(self) -> tuple[int, int, int]:
        return (
            len(self.removed_short_upload),
            len(self.removed_missing_profile),
            len(self.removed_constant_sleep),
        )

    @property
    def total_removed(self) -> int:
        return sum(self.counts)

    def to_text(self) -> str:
        total = self.retained + self.total_removed
        pct = 100.0 * self.total_removed / total if total else 0.0
        lines = [
            f"input_participants\t{total}",
            f"removed_short_upload\t{self.counts[0]}",
            f"removed_missing_profile\t{self.counts[1]}",
            f"removed_constant_sleep\t{self.counts[2]}",
            f"removed_total\t{self.total_removed}\t{pct:.2f}%",
            f"retained\t{self.retained}",
        ]
        for name, ids in (
            ("short_upload_ids", self.removed_short_upload),
            ("missing_profile_ids", self.removed_missing_profile),
            ("constant_sleep_ids", self.removed_constant_sleep),
        ):
            lines.append(f"{name}\t{','.join(sorted(ids))}")
        return "\n".join(lines) + "\n"


def upload_days(cohort: Cohort) -> dict[str, int]:
    days: dict[str, set[int]] = {p.id: set() for p in cohort.profiles}
    for r in cohort.records:
        if r.is_upload() and r.participant_id in days:
            days[r.participant_id].add(r.day_index)
    return {pid: len(d) for pid, d in days.items()}


def filter_min_upload_days(cohort: Cohort, min_days: int = 10) -> tuple[Cohort, set[str]]:
    """Drop participants with fewer than ``min_days`` upload days (10 is kept)."""
    if min_days < 1:
        raise ValueError("min_days must be >= 1")
    counts = upload_days(cohort)
    removed = {pid for pid, n in counts.items() if n < min_days}
    return cohort.subset(set(counts) - removed), removed


def filter_missing_critical_profile(cohort: Cohort) -> tuple[Cohort, set[str]]:
    removed = {p.id for p in cohort.profiles if p.age is None or p.gender is None or p.bmi is None}
    return cohort.subset(set(cohort.ids) - removed), removed


def filter_constant_sleep(cohort: Cohort, min_days: int = 10) -> tuple[Cohort, set[str]]:
    """Drop participants whose sleep, reported on more than ``min_days`` days, never varies."""
    sleep: dict[str, list[float]] = {p.id: [] for p in cohort.profiles}
    for r in cohort.records:
        if r.sleep_minutes is not None and r.participant_id in sleep:
            sleep[r.participant_id].append(r.sleep_minutes)
    removed = {pid for pid, xs in sleep.items() if len(xs) > min_days and np.std(xs) == 0.0}
    return cohort.subset(set(sleep) - removed), removed


def clean(
    cohort: Cohort, min_upload_days: int = 10, constant_sleep_days: int = 10
) -> tuple[Cohort, CleaningReport]:
    """Apply the three rules in order; each removal is attributed to the first rule that fires."""
    kept, short = filter_min_upload_days(cohort, min_upload_days)
    kept, profile = filter_missing_critical_profile(kept)
    kept, sleep = filter_constant_sleep(kept, constant_sleep_days)
    report = CleaningReport(frozenset(short), frozenset(profile), frozenset(sleep), len(kept))
    return kept, report
