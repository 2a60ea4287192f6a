"""Rasterization of eye anatomy into small RGB images.

Layout follows the anterior-eye geometry: light sclera, mid-tone iris disk,
dark pupil with a red-reflex tint, lens opacity whitening the pupil disk, and
reddish anti-aliased vessels on the sclera. Values are float32 in [0, 1].
"""

from __future__ import annotations

import numpy as np

from .types import EyeAnatomy, GenConfig

_SCLERA = np.array([0.93, 0.87, 0.82], dtype=np.float32)
_IRIS = np.array([0.38, 0.28, 0.22], dtype=np.float32)
_PUPIL = np.array([0.06, 0.05, 0.05], dtype=np.float32)
_REFLEX = np.array([0.30, 0.06, 0.03], dtype=np.float32)
_OPACITY = np.array([0.86, 0.86, 0.84], dtype=np.float32)
_VESSEL = np.array([0.55, 0.12, 0.10], dtype=np.float32)


def _grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    f = (np.arange(size, dtype=np.float32) + 0.5) / size
    return np.meshgrid(f, f)  # X varies along axis 1, Y along axis 0


def _ellipse_alpha(
    x: np.ndarray, y: np.ndarray, center, semi, size: int
) -> np.ndarray:
    """Anti-aliased coverage of an axis-aligned ellipse (1 inside, 0 outside)."""
    cx, cy = center
    a, b = semi
    rho = np.sqrt(((x - cx) / a) ** 2 + ((y - cy) / b) ** 2)
    d_px = (1.0 - rho) * (0.5 * (a + b) * size)
    return np.clip(d_px + 0.5, 0.0, 1.0).astype(np.float32)


def _vessel_alpha(shape: tuple[int, int], pts_frac: np.ndarray, caliber_px: float, size: int) -> np.ndarray:
    """Coverage of an anti-aliased stroked polyline, computed on its bounding box."""
    h, w = shape
    pts = pts_frac.astype(np.float32) * size
    margin = caliber_px / 2 + 1.5
    x0 = max(0, int(np.floor(pts[:, 0].min() - margin)))
    x1 = min(w, int(np.ceil(pts[:, 0].max() + margin)))
    y0 = max(0, int(np.floor(pts[:, 1].min() - margin)))
    y1 = min(h, int(np.ceil(pts[:, 1].max() + margin)))
    alpha = np.zeros(shape, dtype=np.float32)
    if x0 >= x1 or y0 >= y1:
        return alpha
    xs = np.arange(x0, x1, dtype=np.float32) + 0.5
    ys = np.arange(y0, y1, dtype=np.float32) + 0.5
    px = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)  # (P, 2)

    p = pts[:-1]  # (S, 2)
    d = pts[1:] - p  # (S, 2)
    len2 = np.maximum(np.sum(d * d, axis=1), 1e-12)
    diff = px[:, None, :] - p[None, :, :]  # (P, S, 2)
    t = np.clip(np.einsum("psk,sk->ps", diff, d) / len2[None, :], 0.0, 1.0)
    nearest = diff - t[:, :, None] * d[None, :, :]
    dist = np.sqrt(np.min(np.sum(nearest * nearest, axis=2), axis=1))
    cov = np.clip(caliber_px / 2 + 0.5 - dist, 0.0, 1.0)
    alpha[y0:y1, x0:x1] = cov.reshape(y1 - y0, x1 - x0)
    return alpha


def render_eye(anatomy: EyeAnatomy, config: GenConfig, seed: int) -> np.ndarray:
    """Render one eye to a (size, size, 3) float32 image in [0, 1]."""
    size = config.image_size
    rng = np.random.default_rng(seed)
    x, y = _grid(size)

    theta = rng.uniform(0.0, 2.0 * np.pi)
    exposure = rng.uniform(-config.exposure_jitter, config.exposure_jitter)
    sclera = np.clip(_SCLERA + rng.uniform(-0.02, 0.02, 3).astype(np.float32), 0, 1)
    iris_c = np.clip(_IRIS + rng.uniform(-0.04, 0.04, 3).astype(np.float32), 0, 1)
    vessel_c = np.clip(_VESSEL + rng.uniform(-0.03, 0.03, 3).astype(np.float32), 0, 1)

    img = np.broadcast_to(sclera.astype(np.float32), (size, size, 3)).copy()

    a_iris = _ellipse_alpha(x, y, anatomy.iris_center, anatomy.iris_semi_axes, size)
    a_pupil = _ellipse_alpha(x, y, anatomy.iris_center, anatomy.pupil_semi_axes, size)

    for v in anatomy.vessel_set:
        a_v = _vessel_alpha((size, size), v.points, v.caliber_px, size)
        a_v *= (1.0 - a_iris) * 0.85
        img = img * (1.0 - a_v[:, :, None]) + vessel_c * a_v[:, :, None]

    img = img * (1.0 - a_iris[:, :, None]) + iris_c * a_iris[:, :, None]

    pupil_c = _PUPIL + anatomy.red_reflex * _REFLEX
    pupil_c = pupil_c * (1.0 - anatomy.lens_opacity) + _OPACITY * anatomy.lens_opacity
    img = img * (1.0 - a_pupil[:, :, None]) + pupil_c * a_pupil[:, :, None]

    plane = 2.0 * ((x - 0.5) * np.cos(theta) + (y - 0.5) * np.sin(theta))
    img = img + (config.illumination_gradient * plane[:, :, None]).astype(np.float32)
    img = img * np.float32(1.0 + exposure)
    if config.pixel_noise_sd > 0:
        img = img + rng.normal(0.0, config.pixel_noise_sd, img.shape).astype(np.float32)
    return np.clip(img, 0.0, 1.0)
