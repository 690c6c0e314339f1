"""
The full interactive loop, headless
===================================

What the service does per request: take a portrait bundle and a
scribble raster, optionally shift the skin tone, complete the shading
along the geometry, and compose the relit portrait. Here the scribbles
come from the portrait's own shading, so the output should come back to
the input (the identity round trip).
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relight.envmap import EnvMap, prefilter_pair, synth_ellipse_env
from relight.image import ImageF
from relight.metrics import psnr_masked, ssim_masked
from relight.olat import make_sphere_scene
from relight.pipeline import PortraitBundle, relight_portrait
from relight.scribble import SimParams, simulate
from relight.shading import compose_relit, phong_shade

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

scene = make_sphere_scene(512)
env = synth_ellipse_env(16, [
    {"center": [1.0, 0.3], "radii": [0.8, 0.6], "color": [1.1, 1.0, 0.9],
     "feather": 0.4}])
env = EnvMap(ImageF(env.data + 0.2, "linear-rgb"))
shading = phong_shade(scene["normals"], prefilter_pair(env, out_h=16))
portrait = compose_relit(scene["albedo"], shading)

bundle = PortraitBundle(image=portrait, normals=scene["normals"],
                        subject=scene["subject"], albedo=scene["albedo"])
scr = simulate(shading, scene["subject"], SimParams(seed=8), rate=1.0)
relit, completed, diag = relight_portrait(bundle, scr)

print("solver:", diag)
print("identity PSNR:", round(psnr_masked(relit, portrait, scene["subject"]), 1),
      "dB, SSIM:", round(ssim_masked(relit, portrait, scene["subject"]), 4))

fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.5))
for ax, img, title in [(axes[0], portrait.data, "portrait"),
                       (axes[1], completed.data, "completed shading"),
                       (axes[2], relit.data, "relit from scribbles")]:
    ax.imshow(np.clip(img, 0, 1) ** (1 / 2.2))
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "07_pipeline.png"), dpi=120)
print("wrote", os.path.join(out_dir, "07_pipeline.png"))
