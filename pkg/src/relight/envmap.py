"""Equirectangular environment maps: spherical geometry, irradiance
prefiltering, rotation augmentation and synthetic ellipse environments.

Conventions (y-up, +z forward camera frame):
  latitude   theta = pi * (0.5 - (i + 0.5) / h), +pi/2 at the top row
  longitude  phi   = 2*pi * ((j + 0.5) / w - 0.5)
  direction        = (cos(theta)*sin(phi), sin(theta), cos(theta)*cos(phi))

Prefiltered lobes are normalized so a unit-constant environment maps to
a unit irradiance map in both modes, which bakes the ambient term into
the lookup.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .image import ImageF

DEFAULT_PHONG_EXPONENT = 32.0
DIFFUSE_WEIGHT = 0.85
SPECULAR_WEIGHT = 0.15


@dataclass
class EnvMap:
    """HDR radiance panorama; width is always twice the height."""

    radiance: ImageF

    def __post_init__(self):
        if isinstance(self.radiance, np.ndarray):
            self.radiance = ImageF(self.radiance, "linear-rgb")
        r = self.radiance
        if r.channels != 3:
            raise ContractError(f"environment map needs 3 channels, got {r.channels}")
        if r.height < 1 or r.width != 2 * r.height:
            raise ContractError(
                f"environment map must be 2h x h, got {r.width}x{r.height}")
        if (r.data < 0).any():
            raise ContractError("environment radiance must be nonnegative")

    @property
    def height(self):
        return self.radiance.height

    @property
    def width(self):
        return self.radiance.width

    @property
    def data(self):
        return self.radiance.data


@dataclass
class IrradiancePair:
    """Prefiltered diffuse (normal-indexed) and specular (reflection-indexed) maps."""

    diffuse: EnvMap
    specular: EnvMap
    exponent: float = DEFAULT_PHONG_EXPONENT


# ---------------------------------------------------------------------------
# Spherical geometry

def pixel_to_direction(i, j, h, w):
    """Pixel-center (i=row, j=col) to unit direction; broadcasts over arrays."""
    i, j = np.broadcast_arrays(np.asarray(i, dtype=np.float64),
                               np.asarray(j, dtype=np.float64))
    theta = np.pi * (0.5 - (i + 0.5) / h)
    phi = 2.0 * np.pi * ((j + 0.5) / w - 0.5)
    ct = np.cos(theta)
    return np.stack([ct * np.sin(phi), np.sin(theta), ct * np.cos(phi)], axis=-1)


def direction_to_pixel(d, h, w):
    """Unit direction(s) to continuous pixel coordinates (i, j)."""
    d = np.asarray(d, dtype=np.float64)
    theta = np.arcsin(np.clip(d[..., 1], -1.0, 1.0))
    phi = np.arctan2(d[..., 0], d[..., 2])
    i = h * (0.5 - theta / np.pi) - 0.5
    j = w * (phi / (2.0 * np.pi) + 0.5) - 0.5
    return i, j


def grid_directions(h, w):
    """(h, w, 3) array of pixel-center directions."""
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return pixel_to_direction(ii, jj, h, w)


def solid_angle(i, h, w):
    """Solid angle in steradians of pixel(s) on row i of an h x w map."""
    theta = np.pi * (0.5 - (np.asarray(i, dtype=np.float64) + 0.5) / h)
    return (2.0 * np.pi / w) * (np.pi / h) * np.cos(theta)


def solid_angle_map(h, w):
    """(h, w) array of per-pixel solid angles."""
    return np.broadcast_to(solid_angle(np.arange(h), h, w)[:, None], (h, w)).copy()


def rotate_direction_yaw(d, angle):
    """Rotate direction(s) about the vertical axis; +angle adds longitude."""
    d = np.asarray(d, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    x = d[..., 0] * c + d[..., 2] * s
    z = d[..., 2] * c - d[..., 0] * s
    return np.stack([x, d[..., 1], z], axis=-1)


# ---------------------------------------------------------------------------
# Sampling

def sample_bilinear(env: EnvMap, d):
    """Bilinear lookup at direction(s) with longitude wrap, latitude clamp.

    Directions are normalized internally; a zero vector is an error.
    """
    d = np.asarray(d, dtype=np.float64)
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    if (norm < 1e-12).any():
        raise ContractError("cannot sample a zero direction")
    d = d / norm
    h, w = env.height, env.width
    i, j = direction_to_pixel(d, h, w)
    i = np.clip(i, 0.0, h - 1.0)
    i0 = np.floor(i).astype(np.int64)
    i1 = np.minimum(i0 + 1, h - 1)
    ti = (i - i0)[..., None]
    j0 = np.floor(j).astype(np.int64)
    tj = (j - j0)[..., None]
    j0 %= w
    j1 = (j0 + 1) % w
    data = env.data.astype(np.float64)
    top = data[i0, j0] + tj * (data[i0, j1] - data[i0, j0])
    bot = data[i1, j0] + tj * (data[i1, j1] - data[i1, j0])
    return (top + ti * (bot - top)).astype(np.float32)


# ---------------------------------------------------------------------------
# Prefiltering

def _lobe(cosv, mode, exponent):
    k = np.maximum(cosv, 0.0)
    if mode == "specular":
        k = k ** exponent
    elif mode != "diffuse":
        raise ContractError(f"unknown prefilter mode {mode!r}")
    return k


def prefilter_directions(env: EnvMap, dirs, mode, exponent=DEFAULT_PHONG_EXPONENT,
                         chunk=512):
    """Normalized cosine-lobe integral of the environment at given directions.

    Evaluates sum(L * k * dw) / sum(k * dw) over every environment pixel
    with k = max(0, d.w) (diffuse) or max(0, d.w)**exponent (specular).
    Each output direction is independent, so results do not depend on
    how the evaluation is partitioned.
    """
    if mode == "specular" and exponent < 1:
        raise ContractError("specular exponent must be >= 1")
    h, w = env.height, env.width
    env_dirs = grid_directions(h, w).reshape(-1, 3)
    dw = solid_angle_map(h, w).reshape(-1)
    radiance = env.data.reshape(-1, 3).astype(np.float64) * dw[:, None]
    dirs = np.asarray(dirs, dtype=np.float64)
    flat = dirs.reshape(-1, 3)
    out = np.empty((flat.shape[0], 3), dtype=np.float64)
    for s in range(0, flat.shape[0], chunk):
        block = flat[s:s + chunk]
        k = _lobe(block @ env_dirs.T, mode, exponent)
        denom = k @ dw
        out[s:s + chunk] = (k @ radiance) / denom[:, None]
    return out.reshape(dirs.shape).astype(np.float32)


def prefilter(env: EnvMap, mode, exponent=DEFAULT_PHONG_EXPONENT, out_h=32,
              threads=1) -> EnvMap:
    """Prefilter into an out_h x 2*out_h irradiance map (see prefilter_directions)."""
    if out_h < 1:
        raise ContractError("output height must be >= 1")
    if out_h > env.height:
        raise ContractError(
            f"output height {out_h} exceeds environment height {env.height}")
    out_w = 2 * out_h
    dirs = grid_directions(out_h, out_w)
    if threads <= 1:
        data = prefilter_directions(env, dirs, mode, exponent)
    else:
        rows = np.array_split(np.arange(out_h), threads)
        data = np.empty((out_h, out_w, 3), dtype=np.float32)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {pool.submit(prefilter_directions, env, dirs[r], mode, exponent): r
                    for r in rows if len(r)}
            for fut, r in futs.items():
                data[r] = fut.result()
    return EnvMap(ImageF(data, "linear-rgb"))


def prefilter_pair(env: EnvMap, exponent=DEFAULT_PHONG_EXPONENT, out_h=32,
                   threads=1) -> IrradiancePair:
    return IrradiancePair(
        diffuse=prefilter(env, "diffuse", exponent, out_h, threads),
        specular=prefilter(env, "specular", exponent, out_h, threads),
        exponent=exponent,
    )


# ---------------------------------------------------------------------------
# Rotation and synthesis

def rotate_yaw(env: EnvMap, angle) -> EnvMap:
    """Rotate about the vertical axis; +angle moves content toward +phi.

    Whole-pixel rotations are exact column rolls; fractional parts are
    linearly interpolated.
    """
    w = env.width
    shift = angle / (2.0 * np.pi) * w
    s0 = int(np.floor(shift))
    frac = shift - s0
    data = env.data.astype(np.float64)
    rolled = np.roll(data, s0, axis=1)
    if frac > 1e-12:
        rolled = rolled + frac * (np.roll(data, s0 + 1, axis=1) - rolled)
    return EnvMap(ImageF(rolled.astype(np.float32), "linear-rgb"))


def synth_ellipse_env(canvas_h, ellipses) -> EnvMap:
    """Render feathered colored ellipses over a black panorama.

    Each ellipse is a dict with ``center`` (phi, theta) radians, ``radii``
    (phi, theta) radians, ``color`` rgb, and optional ``feather`` in [0,1]
    (fraction of the radius over which coverage fades). Ellipses composite
    in order (alpha-over).
    """
    h, w = canvas_h, 2 * canvas_h
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    theta = np.pi * (0.5 - (ii + 0.5) / h)
    phi = 2.0 * np.pi * ((jj + 0.5) / w - 0.5)
    out = np.zeros((h, w, 3), dtype=np.float64)
    for e in ellipses:
        pc, tc = e["center"]
        rp, rt = e["radii"]
        if rp <= 0 or rt <= 0:
            raise ContractError(f"ellipse radii must be positive, got {(rp, rt)}")
        feather = float(e.get("feather", 0.0))
        dphi = (phi - pc + np.pi) % (2.0 * np.pi) - np.pi
        rho = np.sqrt((dphi / rp) ** 2 + ((theta - tc) / rt) ** 2)
        if feather > 0:
            cov = np.clip((1.0 - rho) / feather, 0.0, 1.0)
        else:
            cov = (rho <= 1.0).astype(np.float64)
        color = np.asarray(e["color"], dtype=np.float64)
        out = out * (1.0 - cov[..., None]) + color * cov[..., None]
    return EnvMap(ImageF(out.astype(np.float32), "linear-rgb"))


def random_ellipse_spec(rng, count_range=(1, 4), radius_range=(0.15, 0.9),
                        intensity_range=(0.3, 1.5), feather_range=(0.2, 0.6)):
    """Draw a random ellipse-environment spec (the CLI's synthesis source)."""
    n = int(rng.integers(count_range[0], count_range[1] + 1))
    ellipses = []
    for _ in range(n):
        ellipses.append({
            "center": [float(rng.uniform(-np.pi, np.pi)),
                       float(rng.uniform(-np.pi / 2, np.pi / 2))],
            "radii": [float(rng.uniform(*radius_range)),
                      float(rng.uniform(*radius_range))],
            "color": [float(rng.uniform(*intensity_range)) for _ in range(3)],
            "feather": float(rng.uniform(*feather_range)),
        })
    return ellipses
