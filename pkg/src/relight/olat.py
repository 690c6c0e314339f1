"""Synthetic one-light-at-a-time stacks and Debevec-style image-based
relighting; the ground-truth factory that stands in for a light stage.

Light rigs are spherical Fibonacci point sets (near-uniform); per-light
weights are the solid angles of nearest-neighbor cells, estimated on a
128x256 direction grid and normalized to sum to 4*pi exactly. Rendering
under an environment bins every environment pixel to its nearest light
and sums the stack with those weights, divided by the white-furnace
normalizer Z = 0.85*pi + 0.15*2*pi/(exponent+1) so a unit-constant
environment reproduces the fully-lit (albedo) reference.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .codecs import load_pfm, save_pfm, save_mask_png, load_mask_png, _atomic_write
from .envmap import (DEFAULT_PHONG_EXPONENT, DIFFUSE_WEIGHT, SPECULAR_WEIGHT,
                     EnvMap, grid_directions, rotate_direction_yaw,
                     solid_angle_map)
from .errors import ContractError
from .image import ImageF, Mask
from .shading import NormalMap, reflect, VIEW_DIR

_WEIGHT_GRID_H = 128


@dataclass
class LightRig:
    directions: np.ndarray  # (n, 3) unit vectors
    weights: np.ndarray     # (n,) steradians, sums to 4*pi

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.directions.ndim != 2 or self.directions.shape[1] != 3:
            raise ContractError("rig directions must be (n, 3)")
        if not np.allclose(np.linalg.norm(self.directions, axis=1), 1.0, atol=1e-6):
            raise ContractError("rig directions must be unit vectors")
        if (self.weights <= 0).any():
            raise ContractError("rig weights must be positive")
        if abs(self.weights.sum() - 4 * np.pi) > 1e-6:
            raise ContractError("rig weights must sum to 4*pi")

    @property
    def count(self):
        return self.directions.shape[0]


@dataclass
class OlatStack:
    rig: LightRig
    images: list                 # one ImageF[linear-rgb] per light
    subject: Mask
    albedo_gt: ImageF
    normals_gt: NormalMap
    exponent: float = DEFAULT_PHONG_EXPONENT

    def __post_init__(self):
        if len(self.images) != self.rig.count:
            raise ContractError("image count must equal light count")
        shape = self.images[0].data.shape
        for im in self.images:
            if im.data.shape != shape:
                raise ContractError("OLAT images must share dimensions")
            if (im.data < 0).any():
                raise ContractError("OLAT images must be nonnegative")


def _nearest_light(dirs, rig_dirs):
    """Index of the nearest rig light (max cosine) for each direction."""
    flat = dirs.reshape(-1, 3)
    best = np.empty(flat.shape[0], dtype=np.int64)
    chunk = 65536
    for s in range(0, flat.shape[0], chunk):
        best[s:s + chunk] = np.argmax(flat[s:s + chunk] @ rig_dirs.T, axis=1)
    return best.reshape(dirs.shape[:-1])


def make_light_rig(n, seed=0) -> LightRig:
    """Spherical Fibonacci rig of n lights with Voronoi-cell solid angles."""
    if n < 1:
        raise ContractError("rig needs at least one light")
    i = np.arange(n, dtype=np.float64)
    y = 1.0 - 2.0 * (i + 0.5) / n
    radius = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    golden = np.pi * (3.0 - np.sqrt(5.0))
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    az = golden * i + phase
    dirs = np.stack([radius * np.sin(az), y, radius * np.cos(az)], axis=1)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if n == 1:
        return LightRig(dirs, np.array([4.0 * np.pi]))
    h, w = _WEIGHT_GRID_H, 2 * _WEIGHT_GRID_H
    grid = grid_directions(h, w)
    dw = solid_angle_map(h, w)
    owner = _nearest_light(grid, dirs)
    weights = np.bincount(owner.ravel(), weights=dw.ravel(), minlength=n)
    if (weights <= 0).any():
        raise ContractError(f"rig of {n} lights exceeds the weight-grid resolution")
    weights *= 4.0 * np.pi / weights.sum()
    return LightRig(dirs, weights)


def rotate_rig_yaw(rig: LightRig, angle) -> LightRig:
    """Rotate all lights about the vertical axis; weights are preserved."""
    return LightRig(rotate_direction_yaw(rig.directions, angle), rig.weights.copy())


# ---------------------------------------------------------------------------
# Synthetic scenes

def make_sphere_scene(size, albedo="checker", albedo_scale=0.7):
    """Front-facing sphere: analytic normals, disk subject mask, albedo texture."""
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    cx = cy = (size - 1) / 2.0
    radius = 0.45 * size
    nx = (xx - cx) / radius
    ny = (cy - yy) / radius  # image rows grow downward, camera y grows up
    rr2 = nx * nx + ny * ny
    inside = rr2 <= 1.0
    nz = np.sqrt(np.maximum(0.0, 1.0 - rr2))
    normals = np.stack([nx, ny, nz], axis=-1)
    normals[~inside] = [0.0, 0.0, 1.0]
    albedo_img = _albedo_texture(size, albedo, albedo_scale)
    albedo_img[~inside] = 0.0
    return {
        "normals": NormalMap(ImageF(normals.astype(np.float32), "linear-rgb"),
                             Mask(inside.astype(np.float32))),
        "subject": Mask(inside.astype(np.float32)),
        "albedo": ImageF(albedo_img.astype(np.float32), "linear-rgb"),
    }


def make_heightfield_scene(size, seed=0, bumps=6, albedo="checker", albedo_scale=0.7):
    """Smooth random bump field covering the frame; normals from the gradient."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size),
                         indexing="ij")
    z = np.zeros((size, size))
    for _ in range(bumps):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        s = rng.uniform(0.08, 0.25)
        amp = rng.uniform(-0.15, 0.3)
        z += amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    gy, gx = np.gradient(z * size, edge_order=2)
    normals = np.stack([-gx, gy, np.ones_like(z)], axis=-1)
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    albedo_img = _albedo_texture(size, albedo, albedo_scale)
    subject = Mask(np.ones((size, size), dtype=np.float32))
    return {
        "normals": NormalMap(ImageF(normals.astype(np.float32), "linear-rgb"), subject),
        "subject": subject,
        "albedo": ImageF(albedo_img.astype(np.float32), "linear-rgb"),
    }


def _albedo_texture(size, kind, scale):
    if kind == "white":
        return np.full((size, size, 3), 1.0)
    if kind == "constant":
        return np.full((size, size, 3), scale)
    if kind == "checker":
        yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
        cells = ((yy // max(1, size // 8) + xx // max(1, size // 8)) % 2).astype(np.float64)
        base = np.stack([0.75 - 0.3 * cells, 0.55 + 0.2 * cells, 0.45 + 0.1 * cells],
                        axis=-1)
        return base * scale / 0.7
    raise ContractError(f"unknown albedo texture {kind!r}")


def make_scene(geometry, size, seed=0, albedo="checker"):
    if geometry == "sphere":
        return make_sphere_scene(size, albedo=albedo)
    if geometry == "heightfield":
        return make_heightfield_scene(size, seed=seed, albedo=albedo)
    raise ContractError(f"unknown geometry {geometry!r}")


def synth_olat(scene, rig: LightRig, exponent=DEFAULT_PHONG_EXPONENT) -> OlatStack:
    """Render one image per rig light under the blended Phong model."""
    normals = scene["normals"]
    subject = scene["subject"]
    albedo = scene["albedo"]
    n = normals.image.data.astype(np.float64).reshape(-1, 3)
    valid = (normals.valid.data > 0).ravel()
    r = reflect(VIEW_DIR, n)
    r /= np.maximum(np.linalg.norm(r, axis=-1, keepdims=True), 1e-12)
    shape = normals.image.data.shape
    images = []
    alb = albedo.data.astype(np.float64)
    for k in range(rig.count):
        d = rig.directions[k]
        ndot = n @ d
        # lights below the local horizon contribute nothing, so a light
        # fully behind the subject yields an all-zero image
        lobe = (DIFFUSE_WEIGHT * np.maximum(0.0, ndot)
                + SPECULAR_WEIGHT * np.maximum(0.0, r @ d) ** exponent
                * (ndot > 0.0))
        lobe[~valid] = 0.0
        img = alb * lobe.reshape(shape[0], shape[1], 1)
        images.append(ImageF(img.astype(np.float32), "linear-rgb"))
    return OlatStack(rig=rig, images=images, subject=subject,
                     albedo_gt=albedo, normals_gt=normals, exponent=exponent)


# ---------------------------------------------------------------------------
# Image-based relighting

def env_to_light_weights(env: EnvMap, rig: LightRig):
    """(n, 3) rgb weights: env radiance times solid angle, binned by nearest light."""
    h, w = env.height, env.width
    dirs = grid_directions(h, w)
    owner = _nearest_light(dirs, rig.directions).ravel()
    dw = solid_angle_map(h, w).ravel()
    radiance = env.data.reshape(-1, 3).astype(np.float64)
    weights = np.empty((rig.count, 3))
    for c in range(3):
        weights[:, c] = np.bincount(owner, weights=radiance[:, c] * dw,
                                    minlength=rig.count)
    return weights


def furnace_normalizer(exponent=DEFAULT_PHONG_EXPONENT):
    """Z such that a unit-constant environment renders the albedo itself."""
    return DIFFUSE_WEIGHT * np.pi + SPECULAR_WEIGHT * 2.0 * np.pi / (exponent + 1.0)


def ibr_render(stack: OlatStack, env: EnvMap) -> ImageF:
    """Relight the stack under an environment (compensated weighted sum)."""
    weights = env_to_light_weights(env, stack.rig)
    h, w, _ = stack.images[0].data.shape
    acc = np.zeros((h, w, 3), dtype=np.float64)
    comp = np.zeros_like(acc)  # Kahan compensation
    for k in range(stack.rig.count):
        term = stack.images[k].data.astype(np.float64) * weights[k]
        y = term - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    out = acc / furnace_normalizer(stack.exponent)
    return ImageF(out.astype(np.float32), "linear-rgb")


# ---------------------------------------------------------------------------
# Persistence: manifest JSON + per-light PFM images

def save_olat_stack(dir_path, stack: OlatStack, scene_spec=None):
    os.makedirs(dir_path, exist_ok=True)
    manifest = {
        "schema_version": 1,
        "count": stack.rig.count,
        "exponent": stack.exponent,
        "directions": stack.rig.directions.tolist(),
        "weights": stack.rig.weights.tolist(),
        "scene": scene_spec,
        "images": [f"light_{k:04d}.pfm" for k in range(stack.rig.count)],
    }
    for k, img in enumerate(stack.images):
        save_pfm(os.path.join(dir_path, manifest["images"][k]), img)
    save_pfm(os.path.join(dir_path, "albedo.pfm"), stack.albedo_gt)
    save_pfm(os.path.join(dir_path, "normals.pfm"), stack.normals_gt.image)
    save_mask_png(os.path.join(dir_path, "subject.png"), stack.subject)
    _atomic_write(os.path.join(dir_path, "manifest.json"),
                  json.dumps(manifest, indent=2).encode())


def load_olat_stack(dir_path) -> OlatStack:
    with open(os.path.join(dir_path, "manifest.json")) as f:
        manifest = json.load(f)
    rig = LightRig(np.array(manifest["directions"]), np.array(manifest["weights"]))
    images = [load_pfm(os.path.join(dir_path, name)) for name in manifest["images"]]
    subject = load_mask_png(os.path.join(dir_path, "subject.png"))
    albedo = load_pfm(os.path.join(dir_path, "albedo.pfm"))
    normals = NormalMap(load_pfm(os.path.join(dir_path, "normals.pfm")), subject)
    return OlatStack(rig=rig, images=images, subject=subject, albedo_gt=albedo,
                     normals_gt=normals, exponent=manifest["exponent"])
