"""Manifest and image persistence.

Manifest: JSONL, one visit per line, preceded by a header line carrying
`schema: 1`, the master seed, and the full generator config. Images: 8-bit
RGB PNG named `{patient}_{visit}_{eye}.png`, with an optional float-exact
sidecar (16-byte header: 4-byte magic, then height/width/channels as
little-endian uint32, followed by little-endian float32 pixels).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..pupilseg.ellipse import EllipsePair
from ..seeding import mix_seed
from .generate import anatomy_for
from .render import render_eye
from .types import CohortManifest, EyeEntry, GenConfig, LabelVector, Visit

SCHEMA_VERSION = 1
_F32_MAGIC = b"EYEF"


def _config_to_json(config: GenConfig) -> dict:
    d = dataclasses.asdict(config)
    d["visit_count_probs"] = list(config.visit_count_probs)
    d["race_probs"] = list(config.race_probs)
    return d


def _config_from_json(d: dict) -> GenConfig:
    d = dict(d)
    d["visit_count_probs"] = tuple(d["visit_count_probs"])
    d["race_probs"] = tuple(d["race_probs"])
    return GenConfig(**d)


def _visit_to_json(v: Visit) -> dict:
    return {
        "patient_id": v.patient_id,
        "visit_id": v.visit_id,
        "site_id": v.site_id,
        "age": v.age,
        "sex": v.sex,
        "race": v.race,
        "years_with_diabetes": v.years_with_diabetes,
        "hba1c": v.hba1c,
        "dr_grade": v.dr_grade,
        "dme": v.dme,
        "cataract": list(v.cataract),
        "dilated": v.dilated,
        "eyes": [
            {
                "side": e.side,
                "image": e.image_key,
                "labels": dataclasses.asdict(e.labels),
                "pupil": list(e.ellipses.pupil),
                "iris": list(e.ellipses.iris),
                "anatomy_seed": e.anatomy_seed,
            }
            for e in v.eyes
        ],
    }


def _visit_from_json(d: dict) -> Visit:
    eyes = tuple(
        EyeEntry(
            side=e["side"],
            image_key=e["image"],
            labels=LabelVector(**e["labels"]),
            ellipses=EllipsePair(pupil=tuple(e["pupil"]), iris=tuple(e["iris"])),
            anatomy_seed=e["anatomy_seed"],
        )
        for e in d["eyes"]
    )
    return Visit(
        patient_id=d["patient_id"],
        visit_id=d["visit_id"],
        site_id=d["site_id"],
        age=d["age"],
        sex=d["sex"],
        race=d["race"],
        years_with_diabetes=d["years_with_diabetes"],
        hba1c=d["hba1c"],
        dr_grade=d["dr_grade"],
        dme=d["dme"],
        cataract=tuple(d["cataract"]),
        dilated=d["dilated"],
        eyes=eyes,
    )


def save_manifest(manifest: CohortManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "schema": SCHEMA_VERSION,
            "seed": manifest.seed,
            "config": _config_to_json(manifest.config),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for v in manifest.visits:
            fh.write(json.dumps(_visit_to_json(v), sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> CohortManifest:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported manifest schema {header.get('schema')!r}")
        visits = tuple(_visit_from_json(json.loads(line)) for line in fh if line.strip())
    return CohortManifest(
        visits=visits, config=_config_from_json(header["config"]), seed=header["seed"]
    )


# ---------------------------------------------------------------------------
# images


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_float(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img.astype(np.float32) / np.float32(255.0)
    return img.astype(np.float32)


def write_png(img: np.ndarray, path: str | Path) -> None:
    if img.dtype != np.uint8:
        img = to_uint8(img)
    Image.fromarray(img, mode="RGB").save(Path(path), format="PNG")


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        return np.asarray(im.convert("RGB"))


def write_f32_sidecar(img: np.ndarray, path: str | Path) -> None:
    img = np.ascontiguousarray(img, dtype="<f4")
    h, w, c = img.shape
    with Path(path).open("wb") as fh:
        fh.write(_F32_MAGIC + struct.pack("<III", h, w, c))
        fh.write(img.tobytes())


def read_f32_sidecar(path: str | Path) -> np.ndarray:
    with Path(path).open("rb") as fh:
        head = fh.read(16)
        if head[:4] != _F32_MAGIC:
            raise ValueError(f"{path}: not a float image sidecar")
        h, w, c = struct.unpack("<III", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    return data.reshape(h, w, c)


def render_seed(manifest: CohortManifest, visit: Visit, entry: EyeEntry) -> int:
    return mix_seed(manifest.seed, "render", visit.patient_id, visit.visit_id, entry.side)


def render_cohort(
    manifest: CohortManifest, out_dir: str | Path | None = None
) -> dict[str, np.ndarray]:
    """Render every eye in the manifest; returns image_key -> uint8 (H, W, 3).

    When out_dir is given, PNGs are also written there. Pixel values are
    identical whether images come from this bank or from the PNG files.
    """
    bank: dict[str, np.ndarray] = {}
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    for visit, entry in manifest.eye_entries():
        anatomy = anatomy_for(visit, entry, manifest.config)
        img = render_eye(anatomy, manifest.config, render_seed(manifest, visit, entry))
        img8 = to_uint8(img)
        bank[entry.image_key] = img8
        if out_path is not None:
            write_png(img8, out_path / f"{entry.image_key}.png")
    return bank


def load_image_bank(manifest: CohortManifest, image_dir: str | Path) -> dict[str, np.ndarray]:
    image_dir = Path(image_dir)
    return {
        e.image_key: read_png(image_dir / f"{e.image_key}.png")
        for _, e in manifest.eye_entries()
    }
