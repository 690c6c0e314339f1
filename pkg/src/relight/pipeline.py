"""The shared relight path used by both the CLI and the HTTP service,
so identical inputs produce byte-identical PNG outputs on either route.
"""

import time
from dataclasses import dataclass

import numpy as np

from .codecs import encode_png
from .completion import (CompletionCache, CompletionParams,
                         build_completion_cache, complete_shading)
from .errors import ContractError
from .image import ImageF, Mask, full_mask, linear_to_srgb
from .scribble import ScribbleMap
from .shading import NormalMap, compose_relit
from .skinfill import shift_skin_tone


@dataclass
class PortraitBundle:
    """Decoded inputs for one subject: everything relighting needs."""

    image: ImageF            # linear-rgb portrait
    normals: NormalMap
    subject: Mask
    skin: Mask = None        # defaults to the subject mask
    albedo: ImageF = None    # defaults to the portrait itself (identity prior)

    def __post_init__(self):
        h, w = self.image.height, self.image.width
        if (self.normals.height, self.normals.width) != (h, w):
            raise ContractError("normals size does not match image")
        self.subject.require_match(self.image)
        if self.skin is None:
            self.skin = self.subject
        else:
            self.skin.require_match(self.image)
        if self.albedo is None:
            self.albedo = self.image
        elif self.albedo.data.shape != self.image.data.shape:
            raise ContractError("albedo size does not match image")


def relight_portrait(bundle: PortraitBundle, scribble: ScribbleMap,
                     params: CompletionParams = None, skin_tone=None,
                     cache: CompletionCache = None):
    """Scribbles to relit portrait: skin shift, completion, composition.

    Returns (relit ImageF[linear-rgb], shading ImageF, diagnostics).
    """
    t0 = time.perf_counter()
    albedo = shift_skin_tone(bundle.albedo, bundle.skin, skin_tone)
    shading, diag = complete_shading(scribble, bundle.normals, bundle.subject,
                                     params, cache=cache)
    relit = compose_relit(albedo, shading)
    # keep the untouched background from the source portrait
    outside = bundle.subject.data <= 0.5
    relit.data[outside] = bundle.image.data[outside]
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    diagnostics = dict(diag.to_dict(), elapsed_ms=elapsed_ms)
    return relit, shading, diagnostics


def encode_relit_png(relit: ImageF) -> bytes:
    return encode_png(linear_to_srgb(relit), bits=8)


def make_completion_cache(bundle: PortraitBundle,
                          params: CompletionParams = None) -> CompletionCache:
    return build_completion_cache(bundle.normals, bundle.subject,
                                  params or CompletionParams())


# ---------------------------------------------------------------------------
# Run-length scribble payloads (the service wire format)

def scribble_from_runs(payload, expect_shape=None) -> ScribbleMap:
    """Decode {width, height, runs:[{y, x0, n, lab}]} into a ScribbleMap.

    Runs apply in order; later runs overwrite earlier ones.
    """
    try:
        w = int(payload["width"])
        h = int(payload["height"])
        runs = payload["runs"]
    except (KeyError, TypeError) as e:
        raise ContractError(f"malformed scribble payload: missing {e}")
    if expect_shape is not None and (h, w) != expect_shape:
        raise ContractError(
            f"scribble raster {w}x{h} does not match session {expect_shape[1]}x{expect_shape[0]}")
    color = np.zeros((h, w, 3), dtype=np.float32)
    valid = np.zeros((h, w), dtype=np.float32)
    for run in runs:
        y, x0, n = int(run["y"]), int(run["x0"]), int(run["n"])
        if not (0 <= y < h and 0 <= x0 and x0 + n <= w and n > 0):
            raise ContractError(f"run out of bounds: y={y} x0={x0} n={n}")
        if run.get("erase", False):
            valid[y, x0:x0 + n] = 0.0
            color[y, x0:x0 + n] = 0.0
        else:
            lab = run.get("lab")
            if lab is None or len(lab) != 3:
                raise ContractError(f"run at y={y} x0={x0} needs a 3-element lab color")
            color[y, x0:x0 + n] = np.asarray(lab, dtype=np.float32)
            valid[y, x0:x0 + n] = 1.0
    return ScribbleMap(color=ImageF(color, "lab"), valid=Mask(valid))


def scribble_to_runs(scr: ScribbleMap):
    """Inverse of scribble_from_runs (merges equal-color horizontal spans)."""
    h, w = scr.color.height, scr.color.width
    runs = []
    valid = scr.valid.data > 0.5
    color = scr.color.data
    for y in range(h):
        x = 0
        while x < w:
            if not valid[y, x]:
                x += 1
                continue
            x0 = x
            lab = color[y, x]
            while x < w and valid[y, x] and (color[y, x] == lab).all():
                x += 1
            runs.append({"y": y, "x0": x0, "n": x - x0,
                         "lab": [float(v) for v in lab]})
    return {"width": w, "height": h, "runs": runs}
