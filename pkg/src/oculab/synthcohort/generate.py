"""Cohort sampling, label derivation, anatomy generation, and site splits.

Generative graph (per patient): age, sex, race, diabetes duration are drawn
first; a latent control variable z mixes age and duration effects with noise;
HbA1c = 4 + exp(mu + sigma*z) with (mu, sigma) solved from the configured
threshold prevalences; DR grade comes from an ordered latent in (z, duration)
cut at empirical quantiles matching the configured prevalences; DME is
Bernoulli conditional on grade with rates rescaled to hit the DME and VTDR
targets; cataract risk increases with age, calibrated to its target. Anatomy
is a deterministic function of the true labels plus per-eye noise:
  * pupil fraction shrinks linearly in HbA1c (and is multiplied by the
    dilation factor when dilated),
  * vessels get wider, fewer, and straighter as HbA1c rises, with the total
    drawn arc length held fixed so overall vessel mass stays uninformative,
  * red reflex fades with DR grade,
  * lens opacity jumps when the eye has cataract.
"""

from __future__ import annotations

import math
import warnings
from statistics import NormalDist

import numpy as np

from ..seeding import derive_rng, mix_seed
from .types import (
    RACES,
    SEXES,
    SIDES,
    CohortManifest,
    EyeAnatomy,
    EyeEntry,
    GenConfig,
    LabelVector,
    PatientRecord,
    Vessel,
    Visit,
    age_bin,
    duration_bin,
)

_HBA1C_THRESHOLDS = (7.0, 8.0, 9.0)

# P(dme | dr grade) before rescaling to the configured targets
_DME_BASE = np.array([0.002, 0.02, 0.10, 0.35, 0.45])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _hba1c_lognormal_params(prevalence: dict[str, float]) -> tuple[float, float]:
    """Solve HbA1c = 4 + exp(mu + sigma*Z) for the configured threshold rates."""
    nd = NormalDist()
    qs = []
    ys = []
    for thr, key in zip(_HBA1C_THRESHOLDS, ("hba1c_gt7", "hba1c_gt8", "hba1c_gt9")):
        qs.append(nd.inv_cdf(1.0 - prevalence[key]))
        ys.append(math.log(thr - 4.0))
    qs = np.array(qs)
    ys = np.array(ys)
    sigma = float(np.sum((qs - qs.mean()) * (ys - ys.mean())) / np.sum((qs - qs.mean()) ** 2))
    mu = float(ys.mean() - sigma * qs.mean())
    return mu, sigma


def derive_labels(record: PatientRecord, eye: str) -> LabelVector:
    """Recorded per-eye labels for one visit; None where the record is missing."""
    if eye not in SIDES:
        raise ValueError(f"eye must be left/right, got {eye!r}")
    h = record.hba1c
    gt = {t: (None if h is None else h > t) for t in _HBA1C_THRESHOLDS}
    g = record.dr_grade
    dme = record.dme
    if dme is True or (g is not None and g >= 3):
        vtdr: bool | None = True
    elif g is not None and dme is not None:
        vtdr = False
    else:
        vtdr = None
    cat = record.cataract_per_eye[SIDES.index(eye)]
    return LabelVector(
        hba1c_gt7=gt[7.0],
        hba1c_gt8=gt[8.0],
        hba1c_gt9=gt[9.0],
        dr_grade=g,
        mild_plus=None if g is None else g >= 1,
        moderate_plus=None if g is None else g >= 2,
        severe_plus=None if g is None else g >= 3,
        dme=dme,
        vtdr=vtdr,
        cataract=cat,
        age_bin=age_bin(record.age),
        sex=SEXES.index(record.sex),
        race_bin=None if record.race_ethnicity is None else RACES.index(record.race_ethnicity),
        duration_bin=None
        if record.years_with_diabetes is None
        else duration_bin(record.years_with_diabetes),
    )


# ---------------------------------------------------------------------------
# vessel geometry

# Arc/chord ratio of a unit-chord quadratic Bezier whose control point sits at
# perpendicular offset h above the chord midpoint; tabulated once, inverted by
# interpolation.
_H_TABLE = np.linspace(0.0, 1.5, 301)


def _bezier_points(p0, p1, p2, t):
    t = t[:, None]
    return (1 - t) ** 2 * p0 + 2 * t * (1 - t) * p1 + t**2 * p2


def _arc_ratio_table() -> np.ndarray:
    t = np.linspace(0.0, 1.0, 1025)
    p0 = np.array([0.0, 0.0])
    p2 = np.array([1.0, 0.0])
    out = np.empty_like(_H_TABLE)
    for i, h in enumerate(_H_TABLE):
        pts = _bezier_points(p0, np.array([0.5, h]), p2, t)
        out[i] = np.sum(np.hypot(*np.diff(pts, axis=0).T))
    return out


_RATIO_TABLE = _arc_ratio_table()


def _offset_for_tortuosity(tort: float) -> float:
    return float(np.interp(tort, _RATIO_TABLE, _H_TABLE))


def _make_vessel(
    rng: np.random.Generator,
    center: tuple[float, float],
    iris_semi: tuple[float, float],
    nasal_sign: float,
    caliber_px: float,
    tort: float,
    arc_len: float,
) -> Vessel:
    cx, cy = center
    a, b = iris_semi
    # vessels favor the nasal side of the sclera
    if rng.random() < 0.6:
        phi = nasal_sign * rng.uniform(-0.45 * math.pi, 0.45 * math.pi)
        phi = phi if nasal_sign > 0 else math.pi + phi
    else:
        phi = rng.uniform(0.0, 2.0 * math.pi)
    p0 = np.array([cx + 1.06 * a * math.cos(phi), cy + 1.06 * b * math.sin(phi)])
    radial = p0 - np.array([cx, cy])
    radial /= np.hypot(*radial)
    ang = rng.uniform(-0.35, 0.35)
    rot = np.array(
        [[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]]
    )
    chord_vec = rot @ radial
    p2 = np.clip(p0 + (arc_len / tort) * chord_vec, 0.03, 0.97)
    chord_vec = p2 - p0
    chord = float(np.hypot(*chord_vec))
    if chord < 1e-6:
        p2 = np.clip(p0 + 0.05 * radial, 0.03, 0.97)
        chord_vec = p2 - p0
        chord = float(np.hypot(*chord_vec))
    unit = chord_vec / chord
    perp = np.array([-unit[1], unit[0]])
    side = 1.0 if rng.random() < 0.5 else -1.0
    p1 = (p0 + p2) / 2 + side * _offset_for_tortuosity(tort) * chord * perp
    pts = _bezier_points(p0, p1, p2, np.linspace(0.0, 1.0, 33))

    # push any sampled point back outside the iris
    rel = (pts - np.array([cx, cy])) / np.array([1.04 * a, 1.04 * b])
    rho = np.hypot(rel[:, 0], rel[:, 1])
    inside = rho < 1.0
    if np.any(inside):
        scale = np.where(inside, 1.0 / np.maximum(rho, 1e-9), 1.0)
        pts = np.array([cx, cy]) + (pts - np.array([cx, cy])) * scale[:, None]
    pts = np.clip(pts, 0.01, 0.99)

    seg = np.hypot(*np.diff(pts, axis=0).T)
    arc = float(np.sum(seg))
    chord = float(np.hypot(*(pts[-1] - pts[0])))
    realized = arc / max(chord, 1e-9)
    return Vessel(points=pts, caliber_px=caliber_px, tortuosity=realized)


def eye_anatomy(
    side: str,
    hba1c: float,
    dr_grade: int,
    cataract: bool,
    dilated: bool,
    config: GenConfig,
    anatomy_seed: int,
    ellipses_only: bool = False,
) -> EyeAnatomy:
    """Deterministic anatomy for one eye from true state plus seeded noise.

    Ellipse-related draws come first in the stream, so the ellipse truth is
    identical whether or not vessels are generated.
    """
    rng = np.random.default_rng(anatomy_seed)
    cj = config.center_jitter
    center = (
        float(0.5 + rng.uniform(-cj, cj)),
        float(0.5 + rng.uniform(-cj, cj)),
    )
    iris = (
        float(np.clip(rng.normal(config.iris_semi_base, config.iris_semi_jitter), 0.22, 0.42)),
        float(np.clip(rng.normal(config.iris_semi_base, config.iris_semi_jitter), 0.22, 0.42)),
    )
    frac = (
        config.pupil_base_fraction
        - config.pupil_shrink_per_hba1c * (hba1c - 7.0)
        + rng.normal(0.0, config.pupil_noise_sd)
    )
    if dilated:
        frac *= config.dilation_factor
    frac = float(np.clip(frac, 0.15, 0.92))
    pupil = (
        float(np.clip(frac * iris[0] * (1 + rng.normal(0, 0.02)), 1e-3, 0.94 * iris[0])),
        float(np.clip(frac * iris[1] * (1 + rng.normal(0, 0.02)), 1e-3, 0.94 * iris[1])),
    )
    reflex = float(
        np.clip(
            config.red_reflex_base
            - config.red_reflex_loss_per_dr_grade * dr_grade
            + rng.normal(0.0, 0.05),
            0.0,
            1.0,
        )
    )
    opacity = float(
        np.clip(
            config.opacity_if_cataract * bool(cataract) + rng.uniform(0.0, config.opacity_haze_max),
            0.0,
            1.0,
        )
    )

    vessels: tuple[Vessel, ...] = ()
    if not ellipses_only:
        width_factor = float(np.clip(1.0 + config.vessel_caliber_gain * (hba1c - 7.0), 0.45, 2.6))
        count = max(2, int(round(config.vessel_count_base / width_factor)))
        arc_each = config.vessel_arc_budget / count
        caliber_scale = config.vessel_caliber_base * (config.image_size / 64.0) * width_factor
        nasal_sign = 1.0 if side == "right" else -1.0
        made = []
        for _ in range(count):
            caliber = caliber_scale * float(np.clip(1 + rng.normal(0, 0.08), 0.6, 1.6))
            tort = float(
                np.clip(
                    config.vessel_tortuosity_base
                    - config.vessel_tortuosity_loss * (hba1c - 7.0)
                    + rng.normal(0.0, 0.015),
                    1.002,
                    1.6,
                )
            )
            made.append(
                _make_vessel(rng, center, iris, nasal_sign, caliber, tort, arc_each)
            )
        vessels = tuple(made)

    return EyeAnatomy(
        laterality=side,
        iris_center=center,
        iris_semi_axes=iris,
        pupil_semi_axes=pupil,
        vessel_set=vessels,
        lens_opacity=opacity,
        red_reflex=reflex,
    )


def anatomy_for(visit: Visit, entry: EyeEntry, config: GenConfig) -> EyeAnatomy:
    """Regenerate the full anatomy behind a manifest eye entry."""
    return eye_anatomy(
        side=entry.side,
        hba1c=visit.hba1c,
        dr_grade=visit.dr_grade,
        cataract=visit.cataract[SIDES.index(entry.side)],
        dilated=visit.dilated,
        config=config,
        anatomy_seed=entry.anatomy_seed,
    )


# ---------------------------------------------------------------------------
# cohort sampling


def sample_cohort(config: GenConfig, seed: int) -> CohortManifest:
    """Sample a full cohort manifest; deterministic in (config, seed)."""
    mu, sigma = _hba1c_lognormal_params(config.prevalence)

    # pass 1: patient-level latents
    patients = []
    for pid in range(config.n_patients):
        rng = derive_rng(seed, "patient", pid)
        site = int(rng.integers(config.n_sites))
        age = float(np.clip(rng.normal(58.0, 12.0), 20.0, 90.0))
        sex = "male" if rng.random() < config.male_fraction else "female"
        race = RACES[rng.choice(len(RACES), p=config.race_probs)]
        duration = float(np.clip(rng.normal(0.35 * (age - 40.0), 6.0), 0.0, age))
        u_age = (age - 58.0) / 12.0
        u_dur = (duration - 8.0) / 7.0
        z_raw = -0.20 * u_age + 0.28 * u_dur + 0.936 * rng.standard_normal()
        eps_dr = rng.standard_normal()
        u_dme = rng.random()
        u_cat = rng.random(2)
        n_visits = 1 + int(rng.choice(len(config.visit_count_probs), p=config.visit_count_probs))
        visit_dilated = rng.random(n_visits) < config.dilated_prob
        visit_delta = rng.normal(0.0, config.hba1c_visit_sd, n_visits)
        miss = {
            "hba1c": rng.random(n_visits) < config.missing_hba1c,
            "grading": rng.random(n_visits) < config.missing_grading,
            "cataract": rng.random(n_visits) < config.missing_cataract,
            "duration": rng.random() < config.missing_duration,
            "race": rng.random() < config.missing_race,
        }
        patients.append(
            dict(
                pid=pid,
                site=site,
                age=age,
                sex=sex,
                race=race,
                duration=duration,
                u_dur=u_dur,
                z_raw=z_raw,
                eps_dr=eps_dr,
                u_dme=u_dme,
                u_cat=u_cat,
                visit_dilated=visit_dilated,
                visit_delta=visit_delta,
                miss=miss,
            )
        )

    if not patients:
        return CohortManifest(visits=(), config=config, seed=seed)

    # Gaussianize the control latent by rank so the lognormal HbA1c map, and
    # with it the threshold prevalences, hold exactly for the realized cohort
    z_raw = np.array([p["z_raw"] for p in patients])
    n = len(z_raw)
    if n > 1:
        nd = NormalDist()
        ranks = np.argsort(np.argsort(z_raw))
        z = np.array([nd.inv_cdf((r + 0.5) / n) for r in ranks])
    else:
        z = np.zeros(n)
    base_hba1c = np.clip(4.0 + np.exp(mu + sigma * z), 4.0, 16.0)
    for i, p in enumerate(patients):
        p["visit_hba1c"] = np.clip(base_hba1c[i] + p["visit_delta"], 4.0, 16.0)

    # calibrate DR grade thresholds to the configured prevalences
    t_all = np.array(
        [0.55 * z[i] + 0.30 * p["u_dur"] + 0.775 * p["eps_dr"] for i, p in enumerate(patients)]
    )
    prev = config.prevalence
    cuts = [
        np.quantile(t_all, 1.0 - prev["mild_plus"]),
        np.quantile(t_all, 1.0 - prev["moderate_plus"]),
        np.quantile(t_all, 1.0 - prev["severe_plus"]),
        np.quantile(t_all, 1.0 - prev["proliferative"]),
    ]
    grades = np.sum(t_all[:, None] > np.array(cuts)[None, :], axis=1)

    # calibrate DME rates: grades <3 drive the VTDR excess over severe+,
    # grades >=3 make up the remaining DME mass
    shares = np.bincount(grades, minlength=5) / len(grades)
    p_sev = float(np.sum(shares[3:]))
    base_low = float(np.sum(shares[:3] * _DME_BASE[:3]))
    base_high = float(np.sum(shares[3:] * _DME_BASE[3:]))
    vtdr_target = prev.get("vtdr", prev["severe_plus"] + 0.024)
    s_low = max(0.0, (vtdr_target - p_sev) / base_low) if base_low > 0 else 0.0
    s_high = (
        max(0.0, (prev["dme"] - (vtdr_target - p_sev)) / base_high) if base_high > 0 else 0.0
    )
    dme_p = np.clip(_DME_BASE * np.where(np.arange(5) < 3, s_low, s_high), 0.0, 0.95)

    # calibrate cataract risk intercept against the age profile
    ages = np.array([p["age"] for p in patients])
    slope_term = 0.9 * (ages - 65.0) / 10.0
    lo, hi = -14.0, 4.0
    for _ in range(80):
        mid = (lo + hi) / 2
        if float(np.mean(_sigmoid(mid + slope_term))) > prev["cataract"]:
            hi = mid
        else:
            lo = mid
    cat_p = _sigmoid((lo + hi) / 2 + slope_term)

    # pass 2: assemble visits
    visits = []
    for i, p in enumerate(patients):
        grade = int(grades[i])
        dme = bool(p["u_dme"] < dme_p[grade])
        cataract = (bool(p["u_cat"][0] < cat_p[i]), bool(p["u_cat"][1] < cat_p[i]))
        for v in range(len(p["visit_hba1c"])):
            h = float(p["visit_hba1c"][v])
            grading_missing = bool(p["miss"]["grading"][v])
            record = PatientRecord(
                patient_id=p["pid"],
                site_id=p["site"],
                age=p["age"],
                sex=p["sex"],
                race_ethnicity=None if p["miss"]["race"] else p["race"],
                years_with_diabetes=None if p["miss"]["duration"] else p["duration"],
                hba1c=None if p["miss"]["hba1c"][v] else h,
                dr_grade=None if grading_missing else grade,
                dme=None if grading_missing else dme,
                cataract_per_eye=(None, None) if p["miss"]["cataract"][v] else cataract,
                dilated=bool(p["visit_dilated"][v]),
            )
            eyes = []
            for side in SIDES:
                aseed = mix_seed(seed, "anatomy", p["pid"], v, side)
                truth = eye_anatomy(
                    side,
                    h,
                    grade,
                    cataract[SIDES.index(side)],
                    record.dilated,
                    config,
                    aseed,
                    ellipses_only=True,
                )
                eyes.append(
                    EyeEntry(
                        side=side,
                        image_key=f"{p['pid']:06d}_{v}_{side}",
                        labels=derive_labels(record, side),
                        ellipses=truth.ellipses(),
                        anatomy_seed=aseed,
                    )
                )
            visits.append(
                Visit(
                    patient_id=p["pid"],
                    visit_id=v,
                    site_id=p["site"],
                    age=p["age"],
                    sex=p["sex"],
                    race=p["race"],
                    years_with_diabetes=p["duration"],
                    hba1c=h,
                    dr_grade=grade,
                    dme=dme,
                    cataract=cataract,
                    dilated=record.dilated,
                    eyes=(eyes[0], eyes[1]),
                )
            )

    return CohortManifest(visits=tuple(visits), config=config, seed=seed)


def split_by_site(
    manifest: CohortManifest, ratio: tuple[int, int] = (7, 1), seed: int = 0
) -> tuple[CohortManifest, CohortManifest]:
    """Site-disjoint train/tune split approximating the requested patient ratio."""
    sites = sorted(manifest.site_ids())
    if len(sites) < 2:
        raise ValueError(f"need at least 2 sites to split, have {len(sites)}")
    site_patients: dict[int, set[int]] = {s: set() for s in sites}
    for v in manifest.visits:
        site_patients[v.site_id].add(v.patient_id)
    total = len(manifest.patient_ids())
    target_tune = total * ratio[1] / (ratio[0] + ratio[1])

    rng = derive_rng(seed, "site-split")
    order = rng.permutation(len(sites))
    tune_sites: set[int] = set()
    count = 0
    for idx in order:
        if count >= target_tune:
            break
        tune_sites.add(sites[idx])
        count += len(site_patients[sites[idx]])

    train = manifest.subset(lambda v: v.site_id not in tune_sites)
    tune = manifest.subset(lambda v: v.site_id in tune_sites)
    share = len(train.patient_ids()) / total if total else 0.0
    want = ratio[0] / (ratio[0] + ratio[1])
    if abs(share - want) > 0.04:
        warnings.warn(
            f"site split realized train share {share:.3f}, requested {want:.3f}"
        )
    return train, tune
