"""
Skin-tone conditioning
======================

Shift the mean color of the masked skin region to a chosen swatch while
preserving per-pixel detail: the tone map (mask times target color) is
added to the mean-removed albedo. Without a target color the albedo
passes through untouched.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from relight.image import ImageF, Mask
from relight.olat import make_sphere_scene
from relight.skinfill import mean_skin_color, parse_hex_color, shift_skin_tone

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

scene = make_sphere_scene(256, albedo="checker")
skin = scene["subject"]  # treat the whole disk as skin for the demo

swatches = ["#C68E6E", "#8D5524", "#F1C27D"]
fig, axes = plt.subplots(1, 1 + len(swatches), figsize=(13, 3.5))
axes[0].imshow(np.clip(scene["albedo"].data, 0, 1) ** (1 / 2.2))
axes[0].set_title("input albedo")
axes[0].axis("off")
for ax, hexcode in zip(axes[1:], swatches):
    target = parse_hex_color(hexcode)
    shifted = shift_skin_tone(scene["albedo"], skin, target)
    got = mean_skin_color(shifted, skin)
    ax.imshow(np.clip(shifted.data, 0, 1) ** (1 / 2.2))
    ax.set_title(f"{hexcode}\nmean err {np.abs(got - target).max():.1e}")
    ax.axis("off")
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "06_skin_tone.png"), dpi=120)
print("wrote", os.path.join(out_dir, "06_skin_tone.png"))
