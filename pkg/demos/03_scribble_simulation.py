"""
Simulating user scribbles from a shading map
============================================

The training-input generator: quantize the shading's luminance into
shifted bins, segment with SEEDS, average each superpixel, keep a
random subset of segments (always the brightest and darkest), and fill
the rest with Gaussian noise.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relight.envmap import EnvMap, prefilter_pair, synth_ellipse_env
from relight.image import ImageF, lab_to_rgb, rgb_to_lab
from relight.olat import make_sphere_scene
from relight.scribble import (SimParams, average_segments, quantize_luminance,
                              simulate)
from relight.seeds import seeds_segment
from relight.shading import phong_shade

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

scene = make_sphere_scene(256)
env = synth_ellipse_env(32, [
    {"center": [1.1, 0.3], "radii": [0.8, 0.6], "color": [1.3, 1.1, 0.9],
     "feather": 0.4}])
env = EnvMap(ImageF(env.data + 0.15, "linear-rgb"))
shading = phong_shade(scene["normals"], prefilter_pair(env, out_h=32))

# the stages, spelled out
lab = rgb_to_lab(shading)
quant = quantize_luminance(lab, n_bins=25, shift=1.5)
seg = seeds_segment(quant, 256, seed=7)
averaged = average_segments(quant, seg)

# and the one-call pipeline
scr = simulate(shading, scene["subject"], SimParams(seed=7))

def show(ax, lab_img, title):
    rgb = np.clip(lab_to_rgb(lab_img).data, 0, 1) ** (1 / 2.2)
    ax.imshow(rgb)
    ax.set_title(title)
    ax.axis("off")

fig, axes = plt.subplots(1, 4, figsize=(13, 3.5))
show(axes[0], lab, "full shading (ideal scribble)")
show(axes[1], quant, "quantized luminance")
show(axes[2], averaged, "SEEDS + per-segment average")
show(axes[3], scr.color, "sampled + noise-filled scribble")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "03_scribbles.png"), dpi=120)
print("wrote", os.path.join(out_dir, "03_scribbles.png"))
print("segments:", seg.count, "| kept fraction:",
      float(scr.valid.data.mean()))
