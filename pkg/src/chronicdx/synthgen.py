"""Synthetic cohorts shaped like the published study population.

Each participant carries a shared metabolic risk ``z`` and one latent
score per disease (``u_d = sqrt(rho) z + sqrt(1 - rho) e_d``).  Labels
follow a logistic link on ``signal_strength * beta * u_d`` with exact class
counts, and the latent scores shift glucose, blood pressure, BMI, activity,
steps and sleep.  Missingness is MCAR per attribute family with exact
counts, so featurized missing ratios land on their targets.

Measurements are truncated normals clamped to the published ranges.  Blood
pressure and BMI are the hypertension drivers and carry comparable
information about it; glucose and activity drive diabetes.  Sleep deviates
from 7 hours in a random direction and the step count drifts up or down
between study halves; in both cases the size of the shift, not its sign,
grows with risk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import (
    ACTIVITY_KINDS,
    DISEASES,
    ETHNICITIES,
    ActivityEntry,
    BGReading,
    BPReading,
    Cohort,
    DailyRecord,
    ParticipantProfile,
)

# Per-measurement hard clamps, taken from the widest published attribute range.
RANGES = {
    "bmi": (16.44, 517.82),
    "bg_before": (4.0, 13.27),
    "bg_after": (4.71, 29.0),
    "systolic": (92.0, 175.5),
    "diastolic": (46.0, 111.0),
    "steps": (1.0, 42608.0),
    "sleep": (30.0, 731.5),
    "activity_minutes": (5.0, 240.0),
}

DEFAULT_CLASS_RATIOS = {
    "diabetes": {"no_DM": 0.5549, "pre_DM": 0.0572, "DM": 0.3879},
    "hyperlipidemia": {"no": 0.4213, "yes": 0.5787},
    "hypertension": {"no": 0.4436, "yes": 0.5564},
}

# Fraction of participants whose featurized attribute is missing.
DEFAULT_MISSINGNESS = {
    "BG": 0.6879,
    "BG_BM": 0.7157,
    "BG_AM": 0.7833,
    "BG_C": 0.8111,
    "SBP": 0.3062,
    "SBP_L": 0.3817,
    "Step": 0.0656,
    "Step_L": 0.0855,
    "Sleep": 0.1511,
    "Sleep_L": 0.2187,
    "Activity": 0.0517,
}

DEFAULT_ETHNICITY_MIX = {"Chinese": 0.7838, "Malay": 0.1065, "Indian": 0.0859, "Others": 0.0238}

# Share of the 629 recruits uploading each activity at least once.
ACTIVITY_UPTAKE = {
    "Housework": 343 / 629,
    "Walking": 315 / 629,
    "Jogging": 235 / 629,
    "AerobicWorkout": 130 / 629,
    "Cycling": 94 / 629,
    "Swimming": 77 / 629,
    "Elliptical": 46 / 629,
    "Gym": 29 / 629,
}

SMOKING_MIX = {"non-smoker": 0.80, "ex-smoker": 0.12, "smoker": 0.08}
DRINKING_MIX = {"non-drinker": 0.70, "ex-drinker": 0.08, "drinker": 0.22}

BMI_BASE = 25.0
BMI_LOADINGS = np.array([0.8, 1.4, 3.5])  # kg/m^2 per unit of the DM, HL, HT latent scores
BMI_SD = 2.3
SBP_PERSON_SD = 6.0  # mmHg, spread of personal mean pressure at a fixed latent score
DBP_PERSON_SD = 4.5
LABEL_SLOPE = 8.0  # logistic slope on the latent score at full signal strength
SHARED_RISK = 0.45  # variance share of z in each disease score


@dataclass(frozen=True)
class GeneratorConfig:
    n_participants: int = 629
    seed: int = 42
    class_ratios: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_CLASS_RATIOS.items()})
    missingness_targets: dict = field(default_factory=lambda: dict(DEFAULT_MISSINGNESS))
    age_mean: float = 57.96
    age_std: float = 13.23
    female_fraction: float = 0.6391
    ethnicity_mix: dict = field(default_factory=lambda: dict(DEFAULT_ETHNICITY_MIX))
    signal_strength: float = 0.9
    min_days: int = 10
    max_days: int = 90
    study_days: int = 92

    def validate(self) -> None:
        if self.n_participants < 1:
            raise ValueError("n_participants must be positive")
        for disease, ratios in self.class_ratios.items():
            if disease not in DISEASES:
                raise ValueError(f"unknown disease {disease!r}")
            if not math.isclose(sum(ratios.values()), 1.0, abs_tol=1e-6):
                raise ValueError(f"class ratios for {disease} sum to {sum(ratios.values())}, not 1")
        for k, v in self.missingness_targets.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"missingness target {k}={v} outside [0, 1]")
        if not math.isclose(sum(self.ethnicity_mix.values()), 1.0, abs_tol=1e-6):
            raise ValueError("ethnicity mix must sum to 1")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must lie in [0, 1]")
        if not 1 <= self.min_days <= self.max_days <= self.study_days:
            raise ValueError("need 1 <= min_days <= max_days <= study_days")


@dataclass(frozen=True)
class ViolationSpec:
    n_short_uploaders: int = 113
    n_missing_profile: int = 6
    n_constant_sleep: int = 7

    def __post_init__(self):
        if min(self.n_short_uploaders, self.n_missing_profile, self.n_constant_sleep) < 0:
            raise ValueError("violation counts must be >= 0")

    @property
    def total(self) -> int:
        return self.n_short_uploaders + self.n_missing_profile + self.n_constant_sleep


@dataclass(frozen=True)
class InjectedIds:
    short_upload: frozenset[str]
    missing_profile: frozenset[str]
    constant_sleep: frozenset[str]

    @property
    def all(self) -> frozenset[str]:
        return self.short_upload | self.missing_profile | self.constant_sleep


@dataclass(frozen=True, eq=False)
class LatentState:
    """Per-participant latent risk, exposed so tests can score a Bayes oracle."""

    ids: tuple[str, ...]
    shared: np.ndarray
    disease_score: dict  # disease -> latent score u_d
    slope: float  # logistic slope applied to u_d
    thresholds: dict  # disease -> ascending cut points on slope * u_d + noise

    def bayes_predict(self, disease: str) -> list[str]:
        """Most probable label given the latent score alone."""
        order = DEFAULT_CLASS_ORDER[disease]
        eta = self.slope * self.disease_score[disease]
        cuts = self.thresholds[disease]
        if len(cuts) == 1:
            return [order[1] if e > cuts[0] else order[0] for e in eta]
        # ordinal logistic: pick the class with the largest probability
        probs = _ordinal_probs(eta, cuts)
        return [order[i] for i in probs.argmax(axis=1)]


DEFAULT_CLASS_ORDER = {
    "diabetes": ("no_DM", "pre_DM", "DM"),
    "hyperlipidemia": ("no", "yes"),
    "hypertension": ("no", "yes"),
}


def _ordinal_probs(eta: np.ndarray, cuts) -> np.ndarray:
    cdf = [1.0 / (1.0 + np.exp(-(c - eta))) for c in cuts]  # P(score <= c)
    cols = [cdf[0]] + [cdf[i] - cdf[i - 1] for i in range(1, len(cdf))] + [1.0 - cdf[-1]]
    return np.column_stack(cols)


def truncated_normal(rng: np.random.Generator, mean, sd, lo: float, hi: float, size=None) -> np.ndarray:
    """Normal draws restricted to [lo, hi] by rejection."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), size if size is not None else np.shape(mean))
    out = rng.normal(mean, sd)
    bad = (out < lo) | (out > hi)
    tries = 0
    while bad.any():
        out[bad] = rng.normal(mean[bad] if mean.ndim else mean, sd if np.ndim(sd) == 0 else np.asarray(sd)[bad])
        bad = (out < lo) | (out > hi)
        tries += 1
        if tries > 200:
            # means far outside the window: fall back to clamping
            out = np.clip(out, lo, hi)
            break
    return out


def _exact_counts(n: int, fractions: list[float]) -> list[int]:
    """Largest-remainder rounding of ``n * fractions`` that sums to n."""
    raw = [n * f for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    rest = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def _assign_exact(rng: np.random.Generator, n: int, labels: list, fractions: list[float]) -> np.ndarray:
    counts = _exact_counts(n, fractions)
    arr = np.empty(n, dtype=object)
    perm = rng.permutation(n)
    start = 0
    for lab, c in zip(labels, counts):
        arr[perm[start:start + c]] = lab
        start += c
    return arr


def _labels_by_rank(score: np.ndarray, order: tuple[str, ...], ratios: dict) -> tuple[np.ndarray, list[float]]:
    """Lowest scores get the first class; counts follow ``ratios`` exactly."""
    n = len(score)
    counts = _exact_counts(n, [ratios[c] for c in order])
    idx = np.argsort(score, kind="stable")
    out = np.empty(n, dtype=object)
    cuts = []
    start = 0
    sorted_scores = score[idx]
    for k, (lab, c) in enumerate(zip(order, counts)):
        out[idx[start:start + c]] = lab
        start += c
        if k < len(order) - 1:
            lo = sorted_scores[start - 1] if start > 0 else sorted_scores[0] - 1.0
            hi = sorted_scores[start] if start < n else sorted_scores[-1] + 1.0
            cuts.append(0.5 * (lo + hi))
    return out, cuts


# Family presence statuses.
NONE, FORMER, FULL = 0, 1, 2
BG_NONE, BG_BOTH, BG_BM_ONLY, BG_AM_ONLY = 0, 1, 2, 3


@dataclass(frozen=True)
class _Plan:
    """Cohort-level draws for one participant."""

    pid: str
    gender: str
    age: int
    ethnicity: str
    bmi: float
    smoking: str
    drinking: str
    labels: tuple[str, bool, bool]
    z: float
    u: tuple[float, float, float]  # diabetes, hyperlipidemia, hypertension
    bg: int
    bp: int
    steps: int
    sleep: int
    activity: bool


def _missingness_plan(rng: np.random.Generator, n: int, targets: dict) -> dict[str, np.ndarray]:
    t = {**DEFAULT_MISSINGNESS, **targets}
    both = 1.0 - t["BG_C"]
    bm_only = max((1.0 - t["BG_BM"]) - both, 0.0)
    am_only = max((1.0 - t["BG_AM"]) - both, 0.0)
    none = max(1.0 - both - bm_only - am_only, 0.0)
    plan = {
        "bg": _assign_exact(rng, n, [BG_NONE, BG_BOTH, BG_BM_ONLY, BG_AM_ONLY], [none, both, bm_only, am_only]),
    }
    for fam, key in (("bp", "SBP"), ("steps", "Step"), ("sleep", "Sleep")):
        miss, miss_l = t[key], max(t[f"{key}_L"], t[key])
        plan[fam] = _assign_exact(rng, n, [NONE, FORMER, FULL], [miss, miss_l - miss, 1.0 - miss_l])
    plan["activity"] = _assign_exact(rng, n, [False, True], [t["Activity"], 1.0 - t["Activity"]])
    for k in plan:
        plan[k] = plan[k].astype(int) if k != "activity" else plan[k].astype(bool)
    _repair_latter_half(plan, n)
    return plan


def _has_full(plan: dict, i: int) -> bool:
    return (
        plan["activity"][i]
        or plan["steps"][i] == FULL
        or plan["sleep"][i] == FULL
        or plan["bp"][i] == FULL
        or plan["bg"][i] != BG_NONE
    )


def _repair_latter_half(plan: dict, n: int) -> None:
    """Every participant needs one family reaching the latter half; swap statuses to keep counts exact."""
    for i in range(n):
        if _has_full(plan, i):
            continue
        for j in range(n):
            if j != i and plan["steps"][j] == FULL:
                plan["steps"][i], plan["steps"][j] = plan["steps"][j], plan["steps"][i]
                if _has_full(plan, j):
                    break
                plan["steps"][i], plan["steps"][j] = plan["steps"][j], plan["steps"][i]


def _cohort_plan(config: GeneratorConfig) -> tuple[list[_Plan], LatentState]:
    n = config.n_participants
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    z = rng.standard_normal(n)
    e = rng.standard_normal((3, n))
    u = math.sqrt(SHARED_RISK) * z + math.sqrt(1.0 - SHARED_RISK) * e
    slope = LABEL_SLOPE * config.signal_strength
    noise = rng.logistic(size=(3, n))

    labels = {}
    cuts = {}
    for k, disease in enumerate(DISEASES):
        ratios = {**DEFAULT_CLASS_RATIOS[disease], **config.class_ratios.get(disease, {})}
        labels[disease], cuts[disease] = _labels_by_rank(slope * u[k] + noise[k], DEFAULT_CLASS_ORDER[disease], ratios)

    gender = _assign_exact(rng, n, ["female", "male"], [config.female_fraction, 1 - config.female_fraction])
    eth_names = [e_ for e_ in ETHNICITIES if e_ in config.ethnicity_mix]
    ethnicity = _assign_exact(rng, n, eth_names, [config.ethnicity_mix[e_] for e_ in eth_names])
    smoking = rng.choice(list(SMOKING_MIX), size=n, p=list(SMOKING_MIX.values()))
    drinking = rng.choice(list(DRINKING_MIX), size=n, p=list(DRINKING_MIX.values()))
    age_sd = config.age_std * math.sqrt(1 - 0.35**2)
    age = np.rint(truncated_normal(rng, config.age_mean + 0.35 * config.age_std * z, age_sd, 18.0, 100.0)).astype(int)
    bmi_mean = BMI_BASE + BMI_LOADINGS @ u
    bmi = truncated_normal(rng, bmi_mean, BMI_SD, *RANGES["bmi"], size=n)
    miss = _missingness_plan(rng, n, config.missingness_targets)

    ids = tuple(f"P{i:04d}" for i in range(n))
    plans = [
        _Plan(
            ids[i], str(gender[i]), int(age[i]), str(ethnicity[i]), round(float(bmi[i]), 2), str(smoking[i]),
            str(drinking[i]),
            (str(labels["diabetes"][i]), labels["hyperlipidemia"][i] == "yes", labels["hypertension"][i] == "yes"),
            float(z[i]), (float(u[0, i]), float(u[1, i]), float(u[2, i])),
            int(miss["bg"][i]), int(miss["bp"][i]), int(miss["steps"][i]), int(miss["sleep"][i]),
            bool(miss["activity"][i]),
        )
        for i in range(n)
    ]
    latent = LatentState(
        ids, z, {d: u[k] for k, d in enumerate(DISEASES)}, slope, {d: tuple(cuts[d]) for d in DISEASES}
    )
    return plans, latent


def _time(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi))


def _participant_records(plan: _Plan, config: GeneratorConfig, rng: np.random.Generator, n_days: int | None = None) -> list[DailyRecord]:
    if n_days is None:
        n_days = int(rng.integers(config.min_days, config.max_days + 1))
    days = np.sort(rng.choice(config.study_days, size=n_days, replace=False))
    cut = (n_days + 1) // 2
    in_latter = np.arange(n_days) >= cut
    u_dm, u_hl, u_ht = plan.u
    z = plan.z

    # person-level means
    sbp_mu = 124.0 + 11.0 * u_ht + rng.normal(0, SBP_PERSON_SD)
    dbp_mu = 77.0 + 7.0 * u_ht + rng.normal(0, DBP_PERSON_SD)
    dbp_mu = min(dbp_mu, sbp_mu - 25.0)
    bm_mu = 5.7 + 1.3 * u_dm + 0.3 * u_hl + rng.normal(0, 0.35)
    am_mu = bm_mu + 2.2 + 1.2 * u_dm + rng.normal(0, 0.5)
    steps_mu = math.exp(math.log(6500.0) - 0.18 * z - 0.15 * u_dm + rng.normal(0, 0.25))
    # Sleep and step trends carry risk in their magnitude, not their direction:
    # at-risk participants sleep either too little or too much and change
    # their walking habit in either direction.
    sleep_dev = 60.0 * max(u_hl + 0.2, 0.0) + 35.0 * max(u_dm + 0.2, 0.0)
    sleep_mu = 420.0 + (sleep_dev if rng.random() < 0.5 else -sleep_dev) - 6.0 * z + rng.normal(0, 25.0)
    trend = 0.16 * max(u_hl + 0.2, 0.0)
    steps_trend = (trend if rng.random() < 0.5 else -trend) + rng.normal(0, 0.04)
    act_rate = float(np.clip(0.35 - 0.10 * u_dm - 0.04 * z + rng.normal(0, 0.05), 0.04, 0.9))
    act_minutes = 32.0 * math.exp(-0.18 * u_dm + rng.normal(0, 0.2))
    kinds = [k for k, p in ACTIVITY_UPTAKE.items() if rng.random() < p]
    if plan.activity and not kinds:
        kinds = [str(rng.choice(list(ACTIVITY_UPTAKE), p=np.array(list(ACTIVITY_UPTAKE.values())) / sum(ACTIVITY_UPTAKE.values())))]

    p_steps = rng.uniform(0.6, 1.0)
    p_sleep = rng.uniform(0.5, 0.95)
    p_bp = rng.uniform(0.3, 0.9)
    p_bg = rng.uniform(0.2, 0.8)

    def allowed(status: int, latter: bool) -> bool:
        return status == FULL or (status == FORMER and not latter)

    steps = [None] * n_days
    sleep = [None] * n_days
    bp = [()] * n_days
    bg = [()] * n_days
    acts = [()] * n_days

    def draw_steps(d):
        mu = steps_mu * (1.0 + steps_trend if in_latter[d] else 1.0)
        return int(round(float(truncated_normal(rng, mu, 0.25 * mu, *RANGES["steps"], size=1)[0])))

    def draw_sleep(d):
        return float(round(float(truncated_normal(rng, sleep_mu, 40.0, *RANGES["sleep"], size=1)[0])))

    def draw_bp(d):
        out = []
        for _ in range(1 + int(rng.random() < 0.5)):
            s = float(truncated_normal(rng, sbp_mu, 6.0, *RANGES["systolic"], size=1)[0])
            lo, hi = RANGES["diastolic"]
            dia = float(truncated_normal(rng, dbp_mu, 4.5, lo, min(hi, s - 10.0), size=1)[0])
            out.append(BPReading(round(s, 1), round(dia, 1), _time(rng, 360, 1320)))
        out.sort(key=lambda b: b.time_of_day)
        return tuple(out)

    def draw_bg(d):
        out = []
        want_bm = plan.bg in (BG_BOTH, BG_BM_ONLY)
        want_am = plan.bg in (BG_BOTH, BG_AM_ONLY)
        if want_bm and want_am:
            r = rng.random()
            want_bm, want_am = r < 0.8, r >= 0.35
        if want_bm:
            v = float(truncated_normal(rng, bm_mu, 0.6, *RANGES["bg_before"], size=1)[0])
            out.append(BGReading(round(v, 2), "before_meal", _time(rng, 360, 540)))
        if want_am:
            v = float(truncated_normal(rng, am_mu, 1.0, *RANGES["bg_after"], size=1)[0])
            out.append(BGReading(round(v, 2), "after_meal", _time(rng, 600, 1260)))
        return tuple(out)

    def draw_act(d):
        kind = kinds[int(rng.integers(len(kinds)))]
        m = float(truncated_normal(rng, act_minutes, 0.4 * act_minutes, *RANGES["activity_minutes"], size=1)[0])
        return (ActivityEntry(kind, round(m, 1)),)

    for d in range(n_days):
        lat = bool(in_latter[d])
        if allowed(plan.steps, lat) and rng.random() < p_steps:
            steps[d] = draw_steps(d)
        if allowed(plan.sleep, lat) and rng.random() < p_sleep:
            sleep[d] = draw_sleep(d)
        if allowed(plan.bp, lat) and rng.random() < p_bp:
            bp[d] = draw_bp(d)
        if plan.bg != BG_NONE and rng.random() < p_bg:
            bg[d] = draw_bg(d)
        if plan.activity and rng.random() < act_rate:
            acts[d] = draw_act(d)

    # Guarantee each planned family appears in every half it is planned for.
    halves = [np.flatnonzero(~in_latter), np.flatnonzero(in_latter)]
    for h, idx in enumerate(halves):
        if len(idx) == 0:
            continue
        latter = h == 1
        if allowed(plan.steps, latter) and all(steps[d] is None for d in idx):
            d = int(rng.choice(idx)); steps[d] = draw_steps(d)
        if allowed(plan.sleep, latter) and all(sleep[d] is None for d in idx):
            d = int(rng.choice(idx)); sleep[d] = draw_sleep(d)
        if allowed(plan.bp, latter) and all(not bp[d] for d in idx):
            d = int(rng.choice(idx)); bp[d] = draw_bp(d)
        if plan.activity and h == 0 and all(not acts[d] for d in range(n_days)):
            d = int(rng.choice(idx)); acts[d] = draw_act(d)
    if plan.bg != BG_NONE:
        tags = {g.meal_tag for d in range(n_days) for g in bg[d]}
        need = {BG_BOTH: {"before_meal", "after_meal"}, BG_BM_ONLY: {"before_meal"}, BG_AM_ONLY: {"after_meal"}}[plan.bg]
        for tag in sorted(need - tags):
            d = int(rng.integers(n_days))
            if tag == "before_meal":
                v = float(truncated_normal(rng, bm_mu, 0.6, *RANGES["bg_before"], size=1)[0])
                reading = BGReading(round(v, 2), tag, _time(rng, 360, 540))
            else:
                v = float(truncated_normal(rng, am_mu, 1.0, *RANGES["bg_after"], size=1)[0])
                reading = BGReading(round(v, 2), tag, _time(rng, 600, 1260))
            bg[d] = tuple(sorted(bg[d] + (reading,), key=lambda g: g.time_of_day))

    # Every day must be an upload day.
    for d in range(n_days):
        if steps[d] is None and sleep[d] is None and not bp[d] and not bg[d] and not acts[d]:
            lat = bool(in_latter[d])
            if allowed(plan.steps, lat):
                steps[d] = draw_steps(d)
            elif allowed(plan.sleep, lat):
                sleep[d] = draw_sleep(d)
            elif plan.activity:
                acts[d] = draw_act(d)
            elif allowed(plan.bp, lat):
                bp[d] = draw_bp(d)
            else:
                bg[d] = draw_bg(d)

    # Constant reported sleep is a cleaning violation; clean participants must not trip it.
    sleep_vals = [s for s in sleep if s is not None]
    if len(sleep_vals) > 1 and len(set(sleep_vals)) == 1:
        d = next(d for d in range(n_days) if sleep[d] is not None)
        sleep[d] = sleep[d] + 1.0 if sleep[d] < RANGES["sleep"][1] else sleep[d] - 1.0

    return [
        DailyRecord(plan.pid, int(days[d]), steps[d], sleep[d], bp[d], bg[d], acts[d])
        for d in range(n_days)
    ]


def _profile(plan: _Plan) -> ParticipantProfile:
    dm, hl, ht = plan.labels
    return ParticipantProfile(plan.pid, plan.gender, plan.age, plan.ethnicity, plan.bmi, plan.smoking, plan.drinking, dm, hl, ht)


def generate_cohort_with_latent(config: GeneratorConfig) -> tuple[Cohort, LatentState]:
    config.validate()
    plans, latent = _cohort_plan(config)
    profiles = []
    records: list[DailyRecord] = []
    for i, plan in enumerate(plans):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, i]))
        profiles.append(_profile(plan))
        records.extend(_participant_records(plan, config, rng))
    return Cohort(tuple(profiles), tuple(records)), latent


def generate_cohort(config: GeneratorConfig | None = None) -> Cohort:
    """Deterministic synthetic cohort for ``config`` (seed included)."""
    return generate_cohort_with_latent(config or GeneratorConfig())[0]


def inject_violations(
    cohort: Cohort, spec: ViolationSpec, seed: int, config: GeneratorConfig | None = None
) -> tuple[Cohort, InjectedIds]:
    """Append participants that each break exactly one cleaning rule.

    New ids continue the numbering after the largest existing id.  Returns
    the extended cohort and the ground-truth id sets per rule.
    """
    if spec.total == 0:
        return cohort, InjectedIds(frozenset(), frozenset(), frozenset())
    config = config or GeneratorConfig()
    base = GeneratorConfig(
        n_participants=spec.total, seed=seed, signal_strength=config.signal_strength,
        class_ratios=config.class_ratios, missingness_targets=config.missingness_targets,
        min_days=config.min_days, max_days=config.max_days, study_days=config.study_days,
    )
    if base.study_days < 11:
        raise ValueError("study too short to host constant-sleep violators")
    plans, _ = _cohort_plan(replace(base, seed=seed + 7919))
    start = 1 + max((int(p.id[1:]) for p in cohort.profiles if p.id[1:].isdigit()), default=-1)
    width = max(4, len(str(start + spec.total)))

    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    order = rng.permutation(spec.total)
    kinds = ["short"] * spec.n_short_uploaders + ["profile"] * spec.n_missing_profile + ["sleep"] * spec.n_constant_sleep
    profiles = list(cohort.profiles)
    records = list(cohort.records)
    ids: dict[str, set[str]] = {"short": set(), "profile": set(), "sleep": set()}
    for j, slot in enumerate(order):
        kind = kinds[j]
        pid = f"P{start + int(slot):0{width}d}"
        plan = replace(plans[j], pid=pid)
        prng = np.random.default_rng(np.random.SeedSequence([seed, 3, j]))
        if kind == "short":
            recs = _participant_records(plan, base, prng, n_days=int(prng.integers(1, 10)))
            prof = _profile(plan)
        elif kind == "profile":
            recs = _participant_records(plan, base, prng, n_days=int(prng.integers(max(base.min_days, 10), base.max_days + 1)))
            drop = [f for f in ("age", "gender", "bmi") if prng.random() < 0.5] or [str(prng.choice(["age", "gender", "bmi"]))]
            prof = replace(_profile(plan), **{f: None for f in drop})
        else:
            plan = replace(plan, sleep=FULL)
            recs = _participant_records(plan, base, prng, n_days=int(prng.integers(max(15, base.min_days), base.max_days + 1)))
            value = float(round(float(prng.normal(420, 40))))
            recs = [replace(r, sleep_minutes=value) if r.sleep_minutes is not None else r for r in recs]
            missing_sleep = [i for i, r in enumerate(recs) if r.sleep_minutes is None]
            n_sleep = len(recs) - len(missing_sleep)
            for i in missing_sleep[: max(0, 11 - n_sleep)]:
                recs[i] = replace(recs[i], sleep_minutes=value)
            prof = _profile(plan)
        ids[kind].add(pid)
        profiles.append(prof)
        records.extend(recs)
    injected = InjectedIds(frozenset(ids["short"]), frozenset(ids["profile"]), frozenset(ids["sleep"]))
    return Cohort(tuple(profiles), tuple(records)), injected


def generate_study_cohort(config: GeneratorConfig, violations: ViolationSpec) -> tuple[Cohort, InjectedIds]:
    """``config.n_participants`` in total, of which ``violations.total`` break a cleaning rule."""
    n_clean = config.n_participants - violations.total
    if n_clean < 1:
        raise ValueError(
            f"{config.n_participants} participants cannot host {violations.total} injected violations"
        )
    clean = generate_cohort(replace(config, n_participants=n_clean))
    return inject_violations(clean, violations, seed=config.seed + 1, config=config)
