"""Skin-tone conditioning: shift the skin region's mean albedo to a
chosen color while preserving local detail.

The tone map is the skin mask filled with the target color. Applying it
removes the mask-scaled current mean and adds the tone map, so for a
binary mask the post-shift mask-weighted mean equals the target exactly
and pixels outside the mask are untouched. Soft mask edges scale the
shift by the mask value.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .image import ImageF, Mask

log = logging.getLogger(__name__)


@dataclass
class ToneMap:
    image: ImageF          # skin mask times source color
    source_color: np.ndarray

    def __post_init__(self):
        self.source_color = np.asarray(self.source_color, dtype=np.float64)
        if self.source_color.shape != (3,):
            raise ContractError("tone color must be an rgb triple")


def mean_skin_color(albedo: ImageF, skin: Mask):
    """Mask-weighted mean rgb over the skin region."""
    albedo.require_space("linear-rgb")
    skin.require_match(albedo)
    w = skin.data.astype(np.float64)
    total = w.sum()
    if total <= 0:
        raise ContractError("skin mask is empty")
    return (albedo.data.astype(np.float64) * w[..., None]).sum(axis=(0, 1)) / total


def make_tone_map(skin: Mask, color) -> ToneMap:
    """T = skin mask (broadcast) times the target color."""
    color = np.asarray(color, dtype=np.float64)
    data = skin.data.astype(np.float64)[..., None] * color
    return ToneMap(ImageF(data.astype(np.float32), "linear-rgb"), color)


def apply_tone_shift(albedo: ImageF, tone: ToneMap, skin: Mask) -> ImageF:
    """Shift the skin region's mean to the tone color, detail preserved.

    out = (albedo - skin * current_mean) + T, clamped to >= 0; the
    number of clamped samples is logged when nonzero.
    """
    albedo.require_space("linear-rgb")
    skin.require_match(albedo)
    if tone.image.data.shape != albedo.data.shape:
        raise ContractError("tone map size does not match albedo")
    current = mean_skin_color(albedo, skin)
    shifted = (albedo.data.astype(np.float64)
               - skin.data.astype(np.float64)[..., None] * current
               + tone.image.data.astype(np.float64))
    clamped = int((shifted < 0).sum())
    if clamped:
        log.warning("tone shift clamped %d negative samples to 0", clamped)
    return ImageF(np.maximum(shifted, 0.0).astype(np.float32), "linear-rgb")


def shift_skin_tone(albedo: ImageF, skin: Mask, color=None) -> ImageF:
    """Convenience: no color means the unconditional path (albedo untouched)."""
    if color is None:
        return albedo
    return apply_tone_shift(albedo, make_tone_map(skin, color), skin)


def parse_hex_color(text):
    """'#RRGGBB' sRGB hex to a linear rgb triple."""
    t = text.lstrip("#")
    if len(t) != 6:
        raise ContractError(f"expected #RRGGBB hex color, got {text!r}")
    try:
        srgb = np.array([int(t[i:i + 2], 16) for i in (0, 2, 4)], dtype=np.float64) / 255.0
    except ValueError:
        raise ContractError(f"invalid hex color {text!r}")
    return np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)
