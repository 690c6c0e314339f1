"""Synthetic scribble generation from a full shading map.

Pipeline: convert shading to Lab, quantize the luminance into shifted
bins, segment with SEEDS, average each segment, keep a random subset of
segments (always including the brightest/darkest ones), and fill the
rest with Gaussian noise. The result doubles as the canonical raster
form of user scribbles.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ContractError
from .image import ImageF, Mask, rgb_to_lab
from .seeds import SegmentLabels, seeds_segment

LAB_LO = np.array([0.0, -128.0, -128.0])
LAB_HI = np.array([100.0, 128.0, 128.0])


@dataclass
class SimParams:
    n_bins: int = 25
    superpixels: int = 256
    seeds_levels: int = 4
    seeds_iters: int = 8
    rate_lambda: float = 3.0
    keep_fraction: float = 0.05
    noise_sigma: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.n_bins < 2:
            raise ContractError("n_bins must be >= 2")
        if self.rate_lambda <= 0:
            raise ContractError("rate_lambda must be positive")
        if not 0.0 <= self.keep_fraction <= 0.5:
            raise ContractError("keep_fraction must be in [0, 0.5]")

    @property
    def bin_width(self):
        return 100.0 / self.n_bins

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


@dataclass
class ScribbleMap:
    """Sparse Lab shading hints: color where valid, optionally noise elsewhere."""

    color: ImageF
    valid: Mask
    noise_filled: bool = False

    def __post_init__(self):
        self.color.require_space("lab")
        self.valid.require_match(self.color)
        self.valid = Mask((self.valid.data > 0.5).astype(np.float32))


def quantize_luminance(lab: ImageF, n_bins, shift) -> ImageF:
    """Quantize L to the centers of n_bins shifted bins; a, b unchanged.

    Bins are [shift + k*width, shift + (k+1)*width) with the boundary
    bins absorbing the partial intervals at 0 and 100, so an image never
    holds more than n_bins distinct L values. Centers are clamped to
    [0, 100].
    """
    lab.require_space("lab")
    width = 100.0 / n_bins
    if not 0.0 <= shift < width:
        raise ContractError(f"shift must be in [0, {width}), got {shift}")
    L = lab.data[..., 0].astype(np.float64)
    idx = np.clip(np.floor((L - shift) / width), 0, n_bins - 1)
    quant = np.clip(shift + (idx + 0.5) * width, 0.0, 100.0)
    out = lab.data.copy()
    out[..., 0] = quant.astype(np.float32)
    return ImageF(out, "lab")


def average_segments(img: ImageF, seg: SegmentLabels) -> ImageF:
    """Replace every pixel by its segment's mean color."""
    if seg.labels.shape != (img.height, img.width):
        raise ContractError("label map size does not match image")
    flat = img.data.reshape(-1, img.channels).astype(np.float64)
    labels = seg.labels.ravel()
    counts = np.bincount(labels, minlength=seg.count).astype(np.float64)
    means = np.empty((seg.count, img.channels))
    for c in range(img.channels):
        means[:, c] = np.bincount(labels, weights=flat[:, c], minlength=seg.count) / counts
    return ImageF(means[labels].reshape(img.data.shape).astype(np.float32), img.space)


def segment_mean_luminance(avg_lab: ImageF, seg: SegmentLabels):
    """Per-segment mean L of an already segment-averaged Lab image."""
    flat = avg_lab.data[..., 0].ravel().astype(np.float64)
    labels = seg.labels.ravel()
    counts = np.bincount(labels, minlength=seg.count).astype(np.float64)
    return np.bincount(labels, weights=flat, minlength=seg.count) / counts


def draw_truncated_exp_rate(rng, lam):
    """Inverse-CDF draw from the exponential truncated to [0, 1]."""
    u = rng.random()
    return -np.log1p(-u * (1.0 - np.exp(-lam))) / lam


def sample_segments(seg: SegmentLabels, avg: ImageF, params: SimParams, rng,
                    rate=None) -> ScribbleMap:
    """Keep a random subset of segments as the scribble.

    The subset size is ceil(rate * count) with the rate drawn from the
    truncated exponential (unless forced); the top and bottom
    keep_fraction of segments by mean luminance are always included,
    ties broken by segment id.
    """
    avg.require_space("lab")
    if rate is None:
        rate = draw_truncated_exp_rate(rng, params.rate_lambda)
    count = seg.count
    take = int(np.ceil(np.clip(rate, 0.0, 1.0) * count))
    chosen = np.zeros(count, dtype=bool)
    if take > 0:
        chosen[rng.choice(count, size=min(take, count), replace=False)] = True
    mean_l = segment_mean_luminance(avg, seg)
    n_keep = max(1, int(np.ceil(params.keep_fraction * count))) \
        if params.keep_fraction > 0 else 0
    if n_keep:
        order = np.lexsort((np.arange(count), mean_l))
        chosen[order[:n_keep]] = True   # darkest
        chosen[order[-n_keep:]] = True  # brightest
    valid = chosen[seg.labels].astype(np.float32)
    return ScribbleMap(color=avg.copy(), valid=Mask(valid))


def noise_fill(scr: ScribbleMap, subject: Mask, sigma, rng) -> ScribbleMap:
    """Fill invalid or background pixels with Lab Gaussian noise.

    Noise is N(50, sigma) for L and N(0, sigma) for a/b, clamped to the
    Lab ranges. Validity is intersected with the subject mask; pixels
    valid in the result keep their color bit-exactly.
    """
    subject.require_match(scr.color)
    inside = subject.data > 0.5
    valid = (scr.valid.data > 0.5) & inside
    fill = ~valid
    color = scr.color.data.copy()
    noise = rng.normal(0.0, sigma, size=(int(fill.sum()), 3))
    noise += [50.0, 0.0, 0.0]
    color[fill] = np.clip(noise, LAB_LO, LAB_HI).astype(np.float32)
    return ScribbleMap(color=ImageF(color, "lab"),
                       valid=Mask(valid.astype(np.float32)),
                       noise_filled=True)


def _stage_rngs(seed):
    root = np.random.SeedSequence(np.uint64(seed))
    shift_ss, seeds_ss, sample_ss, noise_ss = root.spawn(4)
    make = lambda ss: np.random.Generator(np.random.Philox(ss))
    return make(shift_ss), int(seeds_ss.generate_state(1)[0]), make(sample_ss), make(noise_ss)


def simulate(shading: ImageF, subject: Mask, params: SimParams,
             rate=None, shift=None) -> ScribbleMap:
    """Full scribble simulation; deterministic for a given params.seed."""
    shading.require_space("linear-rgb")
    subject.require_match(shading)
    shift_rng, seeds_seed, sample_rng, noise_rng = _stage_rngs(params.seed)
    lab = rgb_to_lab(shading)
    if shift is None:
        shift = shift_rng.random() * params.bin_width
    quant = quantize_luminance(lab, params.n_bins, shift)
    seg = seeds_segment(quant, params.superpixels, params.seeds_levels,
                        params.seeds_iters, seed=seeds_seed)
    avg = average_segments(quant, seg)
    scr = sample_segments(seg, avg, params, sample_rng, rate=rate)
    return noise_fill(scr, subject, params.noise_sigma, noise_rng)


# ---------------------------------------------------------------------------
# Serialization: 16-bit PNG for the packed Lab color + 8-bit validity PNG.

def pack_lab(color: ImageF) -> ImageF:
    """Affine-pack Lab into [0,1]: L/100, (a+128)/256, (b+128)/256."""
    packed = (color.data.astype(np.float64) - LAB_LO) / (LAB_HI - LAB_LO)
    return ImageF(packed.astype(np.float32), "scalar")


def unpack_lab(packed: ImageF) -> ImageF:
    lab = packed.data.astype(np.float64) * (LAB_HI - LAB_LO) + LAB_LO
    return ImageF(lab.astype(np.float32), "lab")


def save_scribble(dir_path, scr: ScribbleMap):
    import os
    from .codecs import save_png, save_mask_png
    os.makedirs(dir_path, exist_ok=True)
    save_png(os.path.join(dir_path, "color.png"), pack_lab(scr.color), bits=16)
    save_mask_png(os.path.join(dir_path, "valid.png"), scr.valid)


def load_scribble(dir_path) -> ScribbleMap:
    import os
    from .codecs import load_png, load_mask_png
    packed = load_png(os.path.join(dir_path, "color.png"))
    valid = load_mask_png(os.path.join(dir_path, "valid.png"))
    if packed.channels != 3:
        raise ContractError("scribble color PNG must have 3 channels")
    return ScribbleMap(color=unpack_lab(ImageF(packed.data, "scalar")),
                       valid=valid)
