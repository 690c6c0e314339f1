import numpy as np
import pytest

from relight.envmap import EnvMap, prefilter_pair, synth_ellipse_env
from relight.image import ImageF
from relight.olat import make_sphere_scene
from relight.shading import compose_relit, phong_shade


def smooth_test_env(seed=0, height=32, ambient=0.2):
    """A moderate, feathered ellipse environment over an ambient floor."""
    rng = np.random.default_rng(seed)
    ellipses = []
    for _ in range(rng.integers(2, 4)):
        ellipses.append({
            "center": [rng.uniform(-np.pi, np.pi), rng.uniform(-0.9, 0.9)],
            "radii": [rng.uniform(0.4, 0.9), rng.uniform(0.3, 0.8)],
            "color": list(rng.uniform(0.3, 1.1, 3)),
            "feather": rng.uniform(0.3, 0.6),
        })
    env = synth_ellipse_env(height, ellipses)
    return EnvMap(ImageF(env.data + ambient, "linear-rgb"))


@pytest.fixture(scope="session")
def sphere256():
    return make_sphere_scene(256)

@pytest.fixture(scope="session")
def sphere128():
    return make_sphere_scene(128)


@pytest.fixture(scope="session")
def env_smooth():
    return smooth_test_env(seed=5)


@pytest.fixture(scope="session")
def irr_smooth(env_smooth):
    return prefilter_pair(env_smooth, out_h=16)


@pytest.fixture(scope="session")
def shading_gt(sphere256, irr_smooth):
    return phong_shade(sphere256["normals"], irr_smooth)


@pytest.fixture(scope="session")
def portrait_gt(sphere256, shading_gt):
    return compose_relit(sphere256["albedo"], shading_gt)
