"""Planar float image containers, color-space conversions and resampling.

Images are stored row-major, top row first, channels interleaved, as
float32. All shading math elsewhere in the package happens in linear
light; Lab is CIE L*a*b* under D65 (2-degree observer), the same white
point implied by sRGB inputs.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ContractError


COLOR_SPACES = ("linear-rgb", "srgb", "lab", "scalar")

# sRGB -> CIE XYZ (D65). The reference white is taken as the row sums of
# this exact matrix so that linear (1,1,1) maps to L=100, a=b=0 exactly.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
], dtype=np.float64)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = _RGB_TO_XYZ.sum(axis=1)


@dataclass
class ImageF:
    """Float image: ``data`` has shape (height, width, channels)."""

    data: np.ndarray
    space: str = "linear-rgb"

    def __post_init__(self):
        self.data = np.atleast_3d(np.asarray(self.data, dtype=np.float32))
        if self.data.ndim != 3:
            raise ContractError(f"image data must be HxWxC, got shape {self.data.shape}")
        if not 1 <= self.data.shape[2] <= 4:
            raise ContractError(f"channel count must be 1..4, got {self.data.shape[2]}")
        if self.space not in COLOR_SPACES:
            raise ContractError(f"unknown color space {self.space!r}")
        if self.space == "lab" and self.data.shape[2] != 3:
            raise ContractError("lab images must have 3 channels")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def copy(self):
        return ImageF(self.data.copy(), self.space)

    def require_space(self, space):
        if self.space != space:
            raise ContractError(f"expected {space} image, got {self.space}")

    def assert_finite(self):
        if not np.isfinite(self.data).all():
            raise ContractError("image contains NaN/Inf samples")


@dataclass
class Mask:
    """Per-pixel weights in [0,1], shape (height, width)."""

    data: np.ndarray = field(default=None)

    def __post_init__(self):
        self.data = np.clip(np.asarray(self.data, dtype=np.float32), 0.0, 1.0)
        if self.data.ndim != 2:
            raise ContractError(f"mask must be HxW, got shape {self.data.shape}")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def nonzero_count(self):
        return int(np.count_nonzero(self.data))

    def require_match(self, img):
        if (self.height, self.width) != (img.height, img.width):
            raise ContractError(
                f"mask size {self.data.shape} does not match image "
                f"{(img.height, img.width)}")


def full_mask(height, width, value=1.0):
    return Mask(np.full((height, width), value, dtype=np.float32))


# ---------------------------------------------------------------------------
# sRGB transfer

def srgb_to_linear(img: ImageF) -> ImageF:
    """Invert the sRGB electro-optical transfer, per channel."""
    img.require_space("srgb")
    s = img.data.astype(np.float64)
    lin = np.where(s <= 0.04045, s / 12.92, ((s + 0.055) / 1.055) ** 2.4)
    return ImageF(lin.astype(np.float32), "linear-rgb")


def linear_to_srgb(img: ImageF) -> ImageF:
    """Apply the sRGB transfer; clamps to [0,1] (display encode)."""
    img.require_space("linear-rgb")
    lin = np.clip(img.data.astype(np.float64), 0.0, 1.0)
    s = np.where(lin <= 0.0031308, lin * 12.92, 1.055 * lin ** (1 / 2.4) - 0.055)
    return ImageF(np.clip(s, 0.0, 1.0).astype(np.float32), "srgb")


# ---------------------------------------------------------------------------
# CIE L*a*b* (D65)

def _lab_f(t):
    d3 = (6.0 / 29.0) ** 3
    return np.where(t > d3, np.cbrt(t), t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)


def _lab_f_inv(ft):
    d = 6.0 / 29.0
    return np.where(ft > d, ft ** 3, 3 * d * d * (ft - 4.0 / 29.0))


def rgb_to_lab(img: ImageF) -> ImageF:
    """Linear RGB to CIE L*a*b*.

    Output is clamped to the Lab container ranges (L in [0,100], a/b in
    [-128,128]); in-gamut inputs never hit the clamp. HDR values above
    1.0 therefore saturate at L=100.
    """
    img.require_space("linear-rgb")
    if img.channels != 3:
        raise ContractError("rgb_to_lab expects 3 channels")
    rgb = img.data.astype(np.float64)
    xyz = rgb @ _RGB_TO_XYZ.T
    f = _lab_f(np.maximum(xyz / _WHITE, 0.0))
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    lab = np.stack([np.clip(L, 0.0, 100.0),
                    np.clip(a, -128.0, 128.0),
                    np.clip(b, -128.0, 128.0)], axis=-1)
    return ImageF(lab.astype(np.float32), "lab")


def lab_to_rgb(img: ImageF) -> ImageF:
    """CIE L*a*b* back to linear RGB.

    Out-of-gamut results pass through unclamped; clamping happens only
    at display encode (``linear_to_srgb``).
    """
    img.require_space("lab")
    lab = img.data.astype(np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE
    rgb = xyz @ _XYZ_TO_RGB.T
    return ImageF(rgb.astype(np.float32), "linear-rgb")


# ---------------------------------------------------------------------------
# Resampling

@lru_cache(maxsize=64)
def _box_weights(n_out, n_in):
    # Interval-overlap weights; each output row sums to 1 so constants
    # (and total energy, up to the area ratio) are preserved.
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for o in range(n_out):
        lo, hi = o * scale, (o + 1) * scale
        i0, i1 = int(np.floor(lo)), int(np.ceil(hi))
        for i in range(i0, min(i1, n_in)):
            overlap = min(hi, i + 1) - max(lo, i)
            if overlap > 0:
                w[o, i] = overlap
        w[o] /= w[o].sum()
    return w


def _bilinear_axis(data, n_out, axis):
    n_in = data.shape[axis]
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = src - i0
    a = np.take(data, i0, axis=axis)
    b = np.take(data, i1, axis=axis)
    shape = [1] * data.ndim
    shape[axis] = n_out
    t = t.reshape(shape)
    # a + t*(b-a) keeps constants exact
    return a + t * (b - a)


def resample(img: ImageF, new_w, new_h, filter="bilinear") -> ImageF:
    """Resize to (new_h, new_w) with a box or bilinear filter.

    Box downscaling is energy preserving (area averaging); bilinear is
    the intended upscale path. Identity sizes return a copy bit-exactly.
    """
    if new_w < 1 or new_h < 1:
        raise ContractError(f"resample target {new_w}x{new_h} must be >= 1")
    if filter not in ("bilinear", "box"):
        raise ContractError(f"unknown filter {filter!r}")
    if (new_h, new_w) == (img.height, img.width):
        return img.copy()
    data = img.data.astype(np.float64)
    if filter == "box":
        wh = _box_weights(new_h, img.height)
        ww = _box_weights(new_w, img.width)
        out = np.tensordot(wh, data, axes=(1, 0))
        out = np.tensordot(out, ww, axes=(1, 1)).transpose(0, 2, 1)
    else:
        out = _bilinear_axis(data, new_h, axis=0)
        out = _bilinear_axis(out, new_w, axis=1)
    return ImageF(out.astype(np.float32), img.space)
