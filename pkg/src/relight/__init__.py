"""Scribble-driven portrait relighting toolkit.

Submodules:
  image       float image containers, color conversion, resampling
  metrics     masked PSNR / SSIM
  codecs      PNG and PFM io
  hdr         Radiance RGBE codec
  envmap      equirectangular environments and irradiance prefiltering
  shading     Phong shading, composition, baseline delighting
  seeds       SEEDS superpixel segmentation
  scribble    scribble simulation pipeline
  completion  screened-Poisson shading completion
  olat        synthetic OLAT stacks and image-based relighting
  skinfill    skin-tone conditioning
  pipeline    the shared relight path (CLI + service)
  cli         batch command line
  service     session-oriented HTTP API
"""

__version__ = "0.1.0"

from .errors import ContractError, DecodeError, RelightError, SolverError
from .image import ImageF, Mask

__all__ = [
    "ContractError", "DecodeError", "RelightError", "SolverError",
    "ImageF", "Mask", "__version__",
]
