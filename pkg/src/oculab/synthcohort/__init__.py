from .generate import anatomy_for, derive_labels, eye_anatomy, sample_cohort, split_by_site
from .io import (
    load_image_bank,
    load_manifest,
    read_f32_sidecar,
    read_png,
    render_cohort,
    render_seed,
    save_manifest,
    to_float,
    to_uint8,
    write_f32_sidecar,
    write_png,
)
from .render import render_eye
from .types import (
    AGE_BIN_EDGES,
    DURATION_BIN_EDGES,
    HEAD_FIELDS,
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
