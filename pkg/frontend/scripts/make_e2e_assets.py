"""Emit a synthetic portrait bundle for the frontend e2e test.

Usage: python3 make_e2e_assets.py OUT_DIR [SIZE]
Writes portrait.png, normals.pfm, subject.png, albedo.pfm.
"""

import os
import sys

import numpy as np

from relight.codecs import save_mask_png, save_pfm, save_png
from relight.envmap import EnvMap, prefilter_pair, synth_ellipse_env
from relight.image import ImageF, linear_to_srgb
from relight.olat import make_sphere_scene
from relight.shading import compose_relit, phong_shade


def main():
    out = sys.argv[1]
    size = int(sys.argv[2]) if len(sys.argv) > 2 else 128
    os.makedirs(out, exist_ok=True)
    scene = make_sphere_scene(size)
    env = synth_ellipse_env(16, [{"center": [1.0, 0.3], "radii": [0.8, 0.6],
                                  "color": [1.1, 1.0, 0.9], "feather": 0.4}])
    env = EnvMap(ImageF(env.data + 0.2, "linear-rgb"))
    shading = phong_shade(scene["normals"], prefilter_pair(env, out_h=16))
    portrait = compose_relit(scene["albedo"], shading)
    save_png(os.path.join(out, "portrait.png"), linear_to_srgb(portrait), bits=16)
    save_pfm(os.path.join(out, "normals.pfm"), scene["normals"].image)
    save_pfm(os.path.join(out, "albedo.pfm"), scene["albedo"])
    save_mask_png(os.path.join(out, "subject.png"), scene["subject"])
    print(out)


if __name__ == "__main__":
    main()
