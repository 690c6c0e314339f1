"""
Prefiltering an environment map
===============================

Build a synthetic panorama from colored ellipses, prefilter it into
diffuse and specular irradiance maps, and look at how the lobes smear
the radiance. A unit-constant environment prefilters to a unit map in
both modes (the white-furnace property), which is what bakes the
ambient term into the lookup.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relight.envmap import EnvMap, prefilter_pair, synth_ellipse_env
from relight.image import ImageF

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

# a warm key light high on the left, a cool rim on the right
env = synth_ellipse_env(64, [
    {"center": [-1.2, 0.5], "radii": [0.6, 0.45], "color": [1.6, 1.3, 0.9],
     "feather": 0.35},
    {"center": [1.8, -0.1], "radii": [0.4, 0.5], "color": [0.3, 0.5, 0.9],
     "feather": 0.5},
])
env = EnvMap(ImageF(env.data + 0.08, "linear-rgb"))  # ambient floor

pair = prefilter_pair(env, exponent=32, out_h=32)

fig, axes = plt.subplots(3, 1, figsize=(7, 8))
for ax, img, title in [
        (axes[0], env.data, "radiance"),
        (axes[1], pair.diffuse.data, "diffuse irradiance (cosine lobe)"),
        (axes[2], pair.specular.data, "specular irradiance (Phong 32)")]:
    ax.imshow(np.clip(img, 0, 1) ** (1 / 2.2))
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "01_prefilter.png"), dpi=120)
print("wrote", os.path.join(out_dir, "01_prefilter.png"))

# white furnace: constant in, constant out
furnace = EnvMap(ImageF(np.ones((32, 64, 3), np.float32), "linear-rgb"))
fp = prefilter_pair(furnace, out_h=16)
print("furnace deviation:", float(np.abs(fp.diffuse.data - 1).max()),
      float(np.abs(fp.specular.data - 1).max()))
