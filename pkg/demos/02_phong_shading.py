"""
Shading a sphere from prefiltered irradiance
============================================

Render the shading of a synthetic sphere by looking up the diffuse map
at the surface normal and the specular map at the view reflection,
blended 0.85/0.15, then compose a relit image as albedo times shading.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relight.envmap import EnvMap, prefilter_pair, synth_ellipse_env
from relight.image import ImageF
from relight.olat import make_sphere_scene
from relight.shading import compose_relit, delight_baseline, phong_shade

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

scene = make_sphere_scene(256, albedo="checker")
env = synth_ellipse_env(32, [
    {"center": [-0.9, 0.4], "radii": [0.7, 0.5], "color": [1.4, 1.2, 1.0],
     "feather": 0.4}])
env = EnvMap(ImageF(env.data + 0.12, "linear-rgb"))

shading = phong_shade(scene["normals"], prefilter_pair(env, out_h=32))
relit = compose_relit(scene["albedo"], shading)
albedo_back = delight_baseline(relit, shading)

fig, axes = plt.subplots(1, 4, figsize=(13, 3.5))
for ax, img, title in [(axes[0], scene["albedo"].data, "albedo"),
                       (axes[1], shading.data, "shading"),
                       (axes[2], relit.data, "relit = albedo x shading"),
                       (axes[3], albedo_back.data, "recovered albedo")]:
    ax.imshow(np.clip(img, 0, 1) ** (1 / 2.2))
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "02_shading.png"), dpi=120)
print("wrote", os.path.join(out_dir, "02_shading.png"))
