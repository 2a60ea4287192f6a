"""Domain types for the synthetic screening cohort."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from ..pupilseg.ellipse import EllipsePair

SEXES = ("male", "female")
RACES = ("Hispanic", "White", "Black", "AsianPacific", "NativeAmerican", "Other")
SIDES = ("left", "right")

# (lo, hi] bins; ages above the last edge map to the top bin.
AGE_BIN_EDGES = (0.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0)
DURATION_BIN_EDGES = (0.0, 1.5, 5.0, 10.5, 15.5, float("inf"))

DR_GRADES = 5  # none, mild, moderate, severe, proliferative


def age_bin(age: float) -> int:
    idx = int(np.searchsorted(AGE_BIN_EDGES[1:-1], age, side="left"))
    return min(idx, len(AGE_BIN_EDGES) - 2)


def duration_bin(years: float) -> int:
    return int(np.searchsorted(DURATION_BIN_EDGES[1:-1], years, side="left"))


@dataclass(frozen=True)
class PatientRecord:
    """Recorded state of one patient at one visit; None marks a missing value."""

    patient_id: int
    site_id: int
    age: float
    sex: str
    race_ethnicity: str | None
    years_with_diabetes: float | None
    hba1c: float | None
    dr_grade: int | None
    dme: bool | None
    cataract_per_eye: tuple[bool | None, bool | None]
    dilated: bool

    def __post_init__(self) -> None:
        if not 0.0 < self.age <= 95.0:
            raise ValueError(f"age {self.age} outside (0, 95]")
        if self.sex not in SEXES:
            raise ValueError(f"unknown sex {self.sex!r}")
        if self.race_ethnicity is not None and self.race_ethnicity not in RACES:
            raise ValueError(f"unknown race/ethnicity {self.race_ethnicity!r}")
        if self.years_with_diabetes is not None and not (
            0.0 <= self.years_with_diabetes <= self.age
        ):
            raise ValueError("years_with_diabetes must be in [0, age]")
        if self.hba1c is not None and not 4.0 <= self.hba1c <= 16.0:
            raise ValueError(f"hba1c {self.hba1c} outside [4, 16]")
        if self.dr_grade is not None and self.dr_grade not in range(DR_GRADES):
            raise ValueError(f"dr_grade {self.dr_grade} outside 0..4")


@dataclass(frozen=True)
class LabelVector:
    """Per-eye training/evaluation targets; None means the head is absent."""

    hba1c_gt7: bool | None
    hba1c_gt8: bool | None
    hba1c_gt9: bool | None
    dr_grade: int | None
    mild_plus: bool | None
    moderate_plus: bool | None
    severe_plus: bool | None
    dme: bool | None
    vtdr: bool | None
    cataract: bool | None
    age_bin: int | None
    sex: int | None
    race_bin: int | None
    duration_bin: int | None

    def __post_init__(self) -> None:
        if self.vtdr is not None and self.dr_grade is not None and self.dme is not None:
            if self.vtdr != (self.dr_grade >= 3 or self.dme):
                raise ValueError("vtdr must equal (dr_grade >= 3) or dme")
        thresholds = (self.hba1c_gt7, self.hba1c_gt8, self.hba1c_gt9)
        known = [t for t in thresholds if t is not None]
        if len(known) == 3 and (
            (self.hba1c_gt9 and not self.hba1c_gt8)
            or (self.hba1c_gt8 and not self.hba1c_gt7)
        ):
            raise ValueError("hba1c threshold labels must be monotone")

    def value(self, head: str):
        return getattr(self, HEAD_FIELDS[head])

    def present(self, head: str) -> bool:
        return self.value(head) is not None


# training/evaluation head name -> LabelVector field
HEAD_FIELDS = {
    "hba1c_gt7": "hba1c_gt7",
    "hba1c_gt8": "hba1c_gt8",
    "hba1c_gt9": "hba1c_gt9",
    "dr": "dr_grade",
    "mild_plus": "mild_plus",
    "moderate_plus": "moderate_plus",
    "severe_plus": "severe_plus",
    "dme": "dme",
    "vtdr": "vtdr",
    "cataract": "cataract",
    "age": "age_bin",
    "sex": "sex",
    "race": "race_bin",
    "duration": "duration_bin",
}


@dataclass(frozen=True)
class Vessel:
    points: np.ndarray  # (T, 2) x,y fractions along the polyline
    caliber_px: float
    tortuosity: float


@dataclass(frozen=True)
class EyeAnatomy:
    laterality: str
    iris_center: tuple[float, float]
    iris_semi_axes: tuple[float, float]
    pupil_semi_axes: tuple[float, float]
    vessel_set: tuple[Vessel, ...]
    lens_opacity: float
    red_reflex: float

    def __post_init__(self) -> None:
        if self.laterality not in SIDES:
            raise ValueError(f"laterality must be left/right, got {self.laterality!r}")
        for v in (*self.iris_center, *self.iris_semi_axes, *self.pupil_semi_axes):
            if not 0.0 < v < 1.0:
                raise ValueError(f"anatomy fraction {v} outside (0, 1)")
        if not (
            self.pupil_semi_axes[0] < self.iris_semi_axes[0]
            and self.pupil_semi_axes[1] < self.iris_semi_axes[1]
        ):
            raise ValueError("pupil semi-axes must be strictly inside the iris")
        if not 0.0 <= self.lens_opacity <= 1.0:
            raise ValueError("lens_opacity outside [0, 1]")
        if not 0.0 <= self.red_reflex <= 1.0:
            raise ValueError("red_reflex outside [0, 1]")

    def ellipses(self) -> EllipsePair:
        cx, cy = self.iris_center
        pa, pb = self.pupil_semi_axes
        ia, ib = self.iris_semi_axes
        return EllipsePair(
            pupil=(cx, cy, 2 * pa, 2 * pb), iris=(cx, cy, 2 * ia, 2 * ib)
        )


@dataclass(frozen=True)
class EyeEntry:
    side: str
    image_key: str
    labels: LabelVector
    ellipses: EllipsePair
    anatomy_seed: int


@dataclass(frozen=True)
class Visit:
    """One visit with true patient state (drives rendering) plus recorded labels."""

    patient_id: int
    visit_id: int
    site_id: int
    age: float
    sex: str
    race: str
    years_with_diabetes: float
    hba1c: float
    dr_grade: int
    dme: bool
    cataract: tuple[bool, bool]  # left, right
    dilated: bool
    eyes: tuple[EyeEntry, EyeEntry]


@dataclass(frozen=True)
class GenConfig:
    n_patients: int = 1000
    n_sites: int = 20
    image_size: int = 64

    # planted signal strengths (all >= 0; directions are fixed)
    pupil_shrink_per_hba1c: float = 0.015
    vessel_caliber_gain: float = 0.04
    vessel_tortuosity_loss: float = 0.004
    red_reflex_loss_per_dr_grade: float = 0.10
    opacity_if_cataract: float = 0.55

    # pixel-level nuisance
    pixel_noise_sd: float = 0.02
    illumination_gradient: float = 0.05
    center_jitter: float = 0.02
    exposure_jitter: float = 0.04

    # anatomy baselines
    iris_semi_base: float = 0.33
    iris_semi_jitter: float = 0.015
    pupil_base_fraction: float = 0.50
    pupil_noise_sd: float = 0.05
    dilation_factor: float = 1.8
    dilated_prob: float = 0.0
    vessel_count_base: float = 6.0
    vessel_caliber_base: float = 1.6  # px at image_size 64, scaled proportionally
    vessel_tortuosity_base: float = 1.08
    vessel_arc_budget: float = 1.5  # total arc length, in image widths
    red_reflex_base: float = 0.55
    opacity_haze_max: float = 0.05

    # demographics / longitudinal structure
    visit_count_probs: tuple[float, ...] = (0.7, 0.2, 0.1)  # P(1), P(2), P(3) visits
    hba1c_visit_sd: float = 0.25
    male_fraction: float = 0.45
    race_probs: tuple[float, ...] = (0.55, 0.18, 0.12, 0.08, 0.02, 0.05)

    # label missingness (recorded labels only; true state always exists)
    missing_hba1c: float = 0.08
    missing_grading: float = 0.08  # knocks out dr, dme, vtdr and the dr cutoffs
    missing_cataract: float = 0.15
    missing_duration: float = 0.12
    missing_race: float = 0.05

    # prevalence targets, hit by empirical-quantile calibration per cohort
    prevalence: dict[str, float] = field(
        default_factory=lambda: {
            "hba1c_gt7": 0.639,
            "hba1c_gt8": 0.441,
            "hba1c_gt9": 0.296,
            "mild_plus": 0.191,
            "moderate_plus": 0.120,
            "severe_plus": 0.015,
            "proliferative": 0.009,
            "dme": 0.030,
            "cataract": 0.023,
        }
    )

    def __post_init__(self) -> None:
        if self.n_patients < 0:
            raise ValueError("n_patients must be >= 0")
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if self.image_size < 8:
            raise ValueError("image_size must be >= 8")
        for name in (
            "pupil_shrink_per_hba1c",
            "vessel_caliber_gain",
            "vessel_tortuosity_loss",
            "red_reflex_loss_per_dr_grade",
            "opacity_if_cataract",
            "pixel_noise_sd",
            "illumination_gradient",
            "center_jitter",
            "exposure_jitter",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 < self.pupil_base_fraction < 1.0:
            raise ValueError("pupil_base_fraction must be in (0, 1)")
        if self.dilation_factor < 1.0:
            raise ValueError("dilation_factor must be >= 1")
        if abs(sum(self.visit_count_probs) - 1.0) > 1e-9:
            raise ValueError("visit_count_probs must sum to 1")
        if len(self.race_probs) != len(RACES) or abs(sum(self.race_probs) - 1.0) > 1e-9:
            raise ValueError(f"race_probs must be {len(RACES)} values summing to 1")
        for name, p in self.prevalence.items():
            if not 0.0 < p < 1.0:
                raise ValueError(f"prevalence[{name!r}] must be in (0, 1)")
        for name in (
            "dilated_prob",
            "missing_hba1c",
            "missing_grading",
            "missing_cataract",
            "missing_duration",
            "missing_race",
        ):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    def with_(self, **kw) -> "GenConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class CohortManifest:
    visits: tuple[Visit, ...]
    config: GenConfig
    seed: int

    def patient_ids(self) -> list[int]:
        return sorted({v.patient_id for v in self.visits})

    def site_ids(self) -> set[int]:
        return {v.site_id for v in self.visits}

    def n_eyes(self) -> int:
        return 2 * len(self.visits)

    def eye_entries(self) -> Iterator[tuple[Visit, EyeEntry]]:
        for v in self.visits:
            for e in v.eyes:
                yield v, e

    def by_patient(self) -> dict[int, list[Visit]]:
        out: dict[int, list[Visit]] = {}
        for v in self.visits:
            out.setdefault(v.patient_id, []).append(v)
        return out

    def subset(self, keep) -> "CohortManifest":
        return CohortManifest(
            visits=tuple(v for v in self.visits if keep(v)),
            config=self.config,
            seed=self.seed,
        )
