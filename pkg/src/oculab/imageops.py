"""Deterministic image transforms.

Images are numpy arrays of shape (H, W) or (H, W, C) with float values in
[0, 1]. All operations are pure: they never modify their input and are safe
to apply concurrently across images.

Resampling conventions:
  * area_downsample: each output pixel is the exact box-overlap-weighted mean
    of the input pixels it covers.
  * bilinear_upsample: half-pixel centers, x_in = (i + 0.5) * in/out - 0.5,
    clamped at the edges. With this kernel pure upsampling needs no extra
    antialias filtering, so the antialias flag of the original pipeline is a
    documented no-op here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Rec.601 luma weights, used for the saturation blend.
_LUMA = np.array([0.299, 0.587, 0.114])


# ---------------------------------------------------------------------------
# resampling


def _box_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) matrix of box-overlap weights; each row sums to 1."""
    scale = n_in / n_out
    w = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(np.floor(lo))
        j1 = min(int(np.ceil(hi)), n_in)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def _lerp_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) linear-interpolation matrix, half-pixel convention."""
    w = np.zeros((n_out, n_in))
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1.0)
    j0 = np.floor(x).astype(int)
    j1 = np.minimum(j0 + 1, n_in - 1)
    t = x - j0
    for i in range(n_out):
        w[i, j0[i]] += 1.0 - t[i]
        w[i, j1[i]] += t[i]
    return w


def _apply_separable(img: np.ndarray, wy: np.ndarray, wx: np.ndarray) -> np.ndarray:
    out = np.tensordot(wy, img, axes=(1, 0))
    out = np.moveaxis(np.tensordot(wx, out, axes=(1, 1)), 0, 1)
    return out.astype(img.dtype, copy=False)


def area_downsample(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Downsample by exact box averaging. Requires out <= in per axis."""
    h, w = img.shape[:2]
    if out_h > h or out_w > w or out_h < 1 or out_w < 1:
        raise ValueError(
            f"area_downsample only shrinks: requested {out_h}x{out_w} from {h}x{w}"
        )
    return _apply_separable(img, _box_weights(h, out_h), _box_weights(w, out_w))


def bilinear_upsample(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Upsample by bilinear interpolation. Requires out >= in per axis."""
    h, w = img.shape[:2]
    if out_h < h or out_w < w:
        raise ValueError(
            f"bilinear_upsample only grows: requested {out_h}x{out_w} from {h}x{w}"
        )
    if out_h == h and out_w == w:
        return img.copy()
    return _apply_separable(img, _lerp_weights(h, out_h), _lerp_weights(w, out_w))


def degrade_resolution(img: np.ndarray, n: int) -> np.ndarray:
    """Box-downsample to n x n, then bilinear-upsample back to the input size."""
    h, w = img.shape[:2]
    if n < 1 or n > min(h, w):
        raise ValueError(f"degrade_resolution: n={n} outside [1, {min(h, w)}]")
    return bilinear_upsample(area_downsample(img, n, n), h, w)


# ---------------------------------------------------------------------------
# circular masks


@dataclass(frozen=True)
class MaskSpec:
    mode: str  # "center" or "rim"
    visible_fraction: float

    def __post_init__(self) -> None:
        if self.mode not in ("center", "rim"):
            raise ValueError(f"mask mode must be 'center' or 'rim', got {self.mode!r}")
        if not 0.0 < self.visible_fraction <= 1.0:
            raise ValueError(
                f"visible_fraction must be in (0, 1], got {self.visible_fraction}"
            )


def _center_distances(h: int, w: int) -> np.ndarray:
    yy = np.arange(h) + 0.5 - h / 2.0
    xx = np.arange(w) + 0.5 - w / 2.0
    return np.hypot(yy[:, None], xx[None, :])


def _radius_for_count(dist: np.ndarray, k: int) -> float:
    """Radius r such that exactly the k smallest center distances satisfy d <= r.

    Ties at the cut distance are all kept, so the realized count can slightly
    exceed k; that keeps center(f) and rim(1-f) exact set complements.
    """
    if k <= 0:
        return -1.0
    flat = dist.ravel()
    if k >= flat.size:
        return float(flat.max())
    return float(np.partition(flat, k - 1)[k - 1])


def mask_keep(shape: tuple[int, int], spec: MaskSpec) -> np.ndarray:
    """Boolean keep-mask for a square image."""
    h, w = shape
    if h != w:
        raise ValueError(f"circular masks require a square image, got {h}x{w}")
    dist = _center_distances(h, w)
    n_pix = h * w
    if spec.mode == "center":
        r = _radius_for_count(dist, round(spec.visible_fraction * n_pix))
        return dist <= r
    # rim: hide a center disk holding the complementary fraction
    r = _radius_for_count(dist, round((1.0 - spec.visible_fraction) * n_pix))
    return dist > r


def apply_circular_mask(img: np.ndarray, spec: MaskSpec) -> np.ndarray:
    """Zero out pixels outside the visible region of the mask."""
    keep = mask_keep(img.shape[:2], spec)
    if img.ndim == 3:
        keep = keep[:, :, None]
    return img * keep.astype(img.dtype)


# ---------------------------------------------------------------------------
# training augmentation


@dataclass(frozen=True)
class AugConfig:
    flip_horizontal: bool = True
    flip_vertical: bool = True
    brightness_max_delta: float = 0.1148
    hue_max_delta: float = 0.0251
    saturation_range: tuple[float, float] = (0.5597, 1.2749)
    contrast_range: tuple[float, float] = (0.9997, 1.7705)
    scale_factors: dict[float, float] = field(
        default_factory=lambda: {1.0: 0.6, 1.3: 0.2, 1.5: 0.2}
    )

    def __post_init__(self) -> None:
        if self.brightness_max_delta < 0 or self.hue_max_delta < 0:
            raise ValueError("max deltas must be >= 0")
        for name, rng in (
            ("saturation_range", self.saturation_range),
            ("contrast_range", self.contrast_range),
        ):
            if rng[0] > rng[1]:
                raise ValueError(f"{name} must be ordered, got {rng}")
        total = sum(self.scale_factors.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"scale factor probabilities sum to {total}, not 1")
        if any(f < 1.0 for f in self.scale_factors):
            raise ValueError("scale factors must be >= 1 (central-crop zoom)")

    @classmethod
    def disabled(cls) -> "AugConfig":
        return cls(
            flip_horizontal=False,
            flip_vertical=False,
            brightness_max_delta=0.0,
            hue_max_delta=0.0,
            saturation_range=(1.0, 1.0),
            contrast_range=(1.0, 1.0),
            scale_factors={1.0: 1.0},
        )


def _rotate_hue(imgs: np.ndarray, turns: np.ndarray) -> np.ndarray:
    # HSV is only defined on [0, 1]; earlier steps may have overshot.
    from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

    hsv = rgb_to_hsv(np.clip(imgs, 0.0, 1.0))
    hsv[..., 0] = (hsv[..., 0] + turns[:, None, None]) % 1.0
    return hsv_to_rgb(hsv)


def augment_batch(imgs: np.ndarray, cfg: AugConfig, rng: np.random.Generator) -> np.ndarray:
    """Apply the augmentation chain to a batch (N, H, W, 3).

    Order: flips, brightness, contrast, saturation, hue, scale, clamp.
    One parameter draw per image per step, in fixed order, so the result is
    fully determined by the rng state.
    """
    n, h, w, _ = imgs.shape
    out = np.array(imgs, dtype=imgs.dtype, copy=True)

    if cfg.flip_horizontal:
        do = rng.random(n) < 0.5
        out[do] = out[do, :, ::-1]
    if cfg.flip_vertical:
        do = rng.random(n) < 0.5
        out[do] = out[do, ::-1]

    d = cfg.brightness_max_delta
    if d > 0:
        delta = rng.uniform(-d, d, size=n).astype(out.dtype)
        out += delta[:, None, None, None]

    c = rng.uniform(*cfg.contrast_range, size=n)
    if not np.all(c == 1.0):
        mean = out.mean(axis=(1, 2), keepdims=True)  # per image, per channel
        out = (out - mean) * c[:, None, None, None].astype(out.dtype) + mean

    s = rng.uniform(*cfg.saturation_range, size=n)
    if not np.all(s == 1.0):
        gray = (out @ _LUMA.astype(out.dtype))[..., None]
        out = gray + (out - gray) * s[:, None, None, None].astype(out.dtype)

    if cfg.hue_max_delta > 0:
        turns = rng.uniform(-cfg.hue_max_delta, cfg.hue_max_delta, size=n)
        out = _rotate_hue(out, turns).astype(imgs.dtype, copy=False)

    factors = sorted(cfg.scale_factors)
    probs = [cfg.scale_factors[f] for f in factors]
    chosen = rng.choice(len(factors), size=n, p=probs)
    if any(factors[i] != 1.0 for i in np.unique(chosen)):
        for idx in np.unique(chosen):
            f = factors[idx]
            if f == 1.0:
                continue
            sel = np.nonzero(chosen == idx)[0]
            ch = max(1, int(round(h / f)))
            cw = max(1, int(round(w / f)))
            y0 = (h - ch) // 2
            x0 = (w - cw) // 2
            crop = out[sel, y0 : y0 + ch, x0 : x0 + cw]
            out[sel] = _apply_separable(
                crop.transpose(1, 2, 0, 3).reshape(ch, cw, -1),
                _lerp_weights(ch, h),
                _lerp_weights(cw, w),
            ).reshape(h, w, len(sel), 3).transpose(2, 0, 1, 3)

    return np.clip(out, 0.0, 1.0)


def augment(img: np.ndarray, cfg: AugConfig, rng: np.random.Generator) -> np.ndarray:
    """Single-image augmentation; see augment_batch."""
    return augment_batch(img[None], cfg, rng)[0]
