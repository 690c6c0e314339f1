"""Phong shading from normals and prefiltered irradiance, plus the
albedo/shading composition pair.

The final shading blends the two prefiltered lobes as
0.85 * diffuse + 0.15 * specular, looked up at the surface normal and
the view reflection respectively. The viewer is orthographic along +z.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .envmap import (DIFFUSE_WEIGHT, SPECULAR_WEIGHT, IrradiancePair,
                     sample_bilinear)
from .errors import ContractError
from .image import ImageF, Mask, full_mask

log = logging.getLogger(__name__)

VIEW_DIR = np.array([0.0, 0.0, 1.0])


@dataclass
class NormalMap:
    """Camera-space unit normals (3 channels) with a validity mask."""

    image: ImageF
    valid: Mask = None

    def __post_init__(self):
        if isinstance(self.image, np.ndarray):
            self.image = ImageF(self.image, "linear-rgb")
        if self.image.channels != 3:
            raise ContractError("normal map needs 3 channels")
        if self.valid is None:
            self.valid = full_mask(self.image.height, self.image.width)
        self.valid.require_match(self.image)
        n = self.image.data
        v = self.valid.data > 0
        if v.any():
            norms = np.linalg.norm(n[v], axis=-1)
            if abs(float(norms.max(initial=1.0)) - 1.0) > 1e-3 or \
                    abs(float(norms.min(initial=1.0)) - 1.0) > 1e-3:
                raise ContractError("normals must be unit length within 1e-3")
            if (n[v][:, 2] < 0).any():
                log.warning("normal map has back-facing normals (z < 0)")

    @property
    def height(self):
        return self.image.height

    @property
    def width(self):
        return self.image.width


def normals_from_png16(img: ImageF, valid: Mask = None) -> NormalMap:
    """Decode normals stored in a 16-bit PNG as n = 2*v - 1, renormalized."""
    n = img.data.astype(np.float64) * 2.0 - 1.0
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    n = np.where(norm > 1e-6, n / np.maximum(norm, 1e-6), [0.0, 0.0, 1.0])
    return NormalMap(ImageF(n.astype(np.float32), "linear-rgb"), valid)


def reflect(v, n):
    """Mirror direction(s) v about normal(s) n: 2(n.v)n - v."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ndv = (n * v).sum(axis=-1, keepdims=True)
    return 2.0 * ndv * n - v


def phong_shade(normals: NormalMap, irr: IrradiancePair, view=VIEW_DIR) -> ImageF:
    """Render an RGB shading map; invalid pixels come out black."""
    n = normals.image.data.astype(np.float64)
    valid = normals.valid.data > 0
    flat_n = n.reshape(-1, 3)
    safe_n = np.where(np.linalg.norm(flat_n, axis=-1, keepdims=True) > 1e-6,
                      flat_n, [0.0, 0.0, 1.0])
    d = sample_bilinear(irr.diffuse, safe_n)
    r = reflect(view, safe_n)
    r /= np.maximum(np.linalg.norm(r, axis=-1, keepdims=True), 1e-12)
    s = sample_bilinear(irr.specular, r)
    shading = DIFFUSE_WEIGHT * d.astype(np.float64) + SPECULAR_WEIGHT * s.astype(np.float64)
    shading = shading.reshape(n.shape)
    shading[~valid] = 0.0
    return ImageF(shading.astype(np.float32), "linear-rgb")


def compose_relit(albedo: ImageF, shading: ImageF) -> ImageF:
    """Relit image as the elementwise product albedo * shading (linear light)."""
    albedo.require_space("linear-rgb")
    shading.require_space("linear-rgb")
    if albedo.data.shape != shading.data.shape:
        raise ContractError(
            f"albedo {albedo.data.shape} and shading {shading.data.shape} differ")
    return ImageF(albedo.data * shading.data, "linear-rgb")


def delight_baseline(image: ImageF, shading: ImageF, eps=1e-3) -> ImageF:
    """Albedo estimate image / max(shading, eps), clamped to [0, 10].

    A classical stand-in for a learned delighting model; exact wherever
    the true image is albedo * shading with shading > eps.
    """
    image.require_space("linear-rgb")
    shading.require_space("linear-rgb")
    if image.data.shape != shading.data.shape:
        raise ContractError("image and shading dimensions differ")
    est = image.data.astype(np.float64) / np.maximum(shading.data.astype(np.float64), eps)
    return ImageF(np.clip(est, 0.0, 10.0).astype(np.float32), "linear-rgb")
