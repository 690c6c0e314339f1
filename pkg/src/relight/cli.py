"""Batch command line for dataset generation, rendering, simulation,
completion, relighting and evaluation.

Every command prints a one-line JSON summary on stdout (human logging
goes to stderr), writes outputs atomically, and echoes its seed and
input hashes into a manifest so runs are reproducible. Exit codes:
0 success, 1 usage error, 2 processing error.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .codecs import (load_mask_png, load_pfm, load_png, save_mask_png,
                     save_pfm, save_png, _atomic_write)
from .completion import CompletionParams, complete_shading
from .envmap import (DEFAULT_PHONG_EXPONENT, EnvMap, prefilter_pair,
                     random_ellipse_spec, rotate_yaw, synth_ellipse_env)
from .errors import RelightError
from .hdr import decode_hdr, encode_hdr
from .image import ImageF, Mask, full_mask, linear_to_srgb, srgb_to_linear
from .metrics import psnr_masked, ssim_masked
from .olat import ibr_render, load_olat_stack, make_light_rig, make_scene, save_olat_stack, synth_olat
from .pipeline import PortraitBundle, encode_relit_png, relight_portrait, scribble_from_runs
from .scribble import SimParams, load_scribble, save_scribble, simulate
from .shading import NormalMap, compose_relit, delight_baseline, normals_from_png16, phong_shade
from .skinfill import parse_hex_color, shift_skin_tone


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    return int(os.environ.get("RELIGHT_THREADS", "1"))


def _manifest(args, inputs, outputs, extra=None):
    m = {
        "schema_version": 1,
        "tool": f"relight {__version__}",
        "command": args.command,
        "config": {k: v for k, v in vars(args).items()
                   if k not in ("command", "func") and v is not None},
        "inputs": {os.path.basename(p): _sha256(p) for p in inputs if os.path.isfile(p)},
        "outputs": outputs,
    }
    if extra:
        m.update(extra)
    return m


def _emit(manifest, manifest_path=None):
    if manifest_path:
        _atomic_write(manifest_path, json.dumps(manifest, indent=2).encode())
    print(json.dumps({"status": "ok", "command": manifest["command"],
                      "outputs": manifest["outputs"]}))


def _load_env(path) -> EnvMap:
    with open(path, "rb") as f:
        return EnvMap(ImageF(decode_hdr(f.read()), "linear-rgb"))


def _load_normals(path, valid=None) -> NormalMap:
    if path.endswith(".pfm"):
        return NormalMap(load_pfm(path), valid)
    return normals_from_png16(load_png(path), valid)


def _load_scribble_any(path, expect_shape=None):
    if os.path.isdir(path):
        return load_scribble(path)
    with open(path) as f:
        return scribble_from_runs(json.load(f), expect_shape)


def _load_portrait(path) -> ImageF:
    img = load_png(path)
    if img.channels == 4:
        img = ImageF(img.data[..., :3], "srgb")
    if img.channels == 1:
        img = ImageF(np.repeat(img.data, 3, axis=-1), "srgb")
    return srgb_to_linear(img)


def _completion_params(args):
    kwargs = {}
    for flag, field in (("data_weight", "data_weight"), ("kappa", "normal_sharpness"),
                        ("connectivity", "connectivity"), ("solve_height", "solve_h"),
                        ("tol", "tol"), ("max_iter", "max_iter")):
        v = getattr(args, flag, None)
        if v is not None:
            kwargs[field] = v
    return CompletionParams(**kwargs)


# ---------------------------------------------------------------------------
# Commands

def cmd_prefilter(args):
    env = _load_env(args.env)
    pair = prefilter_pair(env, exponent=args.exponent, out_h=args.out_height,
                          threads=_threads(args))
    os.makedirs(args.out, exist_ok=True)
    d_path = os.path.join(args.out, "diffuse.pfm")
    s_path = os.path.join(args.out, "specular.pfm")
    save_pfm(d_path, pair.diffuse.radiance)
    save_pfm(s_path, pair.specular.radiance)
    m = _manifest(args, [args.env], [d_path, s_path],
                  {"exponent": args.exponent})
    _emit(m, os.path.join(args.out, "manifest.json"))


def cmd_shade(args):
    if not args.irradiance and not args.env:
        raise UsageError("shade needs --irradiance or --env")
    valid = load_mask_png(args.valid) if args.valid else None
    normals = _load_normals(args.normal, valid)
    if args.irradiance:
        from .envmap import IrradiancePair
        pair = IrradiancePair(
            diffuse=EnvMap(load_pfm(os.path.join(args.irradiance, "diffuse.pfm"))),
            specular=EnvMap(load_pfm(os.path.join(args.irradiance, "specular.pfm"))),
            exponent=args.exponent)
    else:
        pair = prefilter_pair(_load_env(args.env), exponent=args.exponent,
                              out_h=args.out_height, threads=_threads(args))
    shading = phong_shade(normals, pair)
    save_pfm(args.out, shading)
    inputs = [p for p in (args.normal, args.valid, args.env) if p]
    _emit(_manifest(args, inputs, [args.out]), args.out + ".manifest.json")


def cmd_synth_env(args):
    if args.spec:
        with open(args.spec) as f:
            spec = json.load(f)
        ellipses = spec["ellipses"]
        args.height = spec.get("height", args.height)
    else:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(args.seed)))
        ellipses = random_ellipse_spec(
            rng, count_range=(args.count_min, args.count_max),
            radius_range=(args.radius_min, args.radius_max),
            intensity_range=(args.intensity_min, args.intensity_max))
    env = synth_ellipse_env(args.height, ellipses)
    if args.ambient > 0:
        env = EnvMap(ImageF(env.data + args.ambient, "linear-rgb"))
    _atomic_write(args.out, encode_hdr(env.data))
    m = _manifest(args, [args.spec] if args.spec else [], [args.out],
                  {"seed": args.seed, "ellipses": ellipses})
    _emit(m, args.out + ".manifest.json")


def cmd_rotate_env(args):
    env = _load_env(args.env)
    rotated = rotate_yaw(env, np.deg2rad(args.angle_deg))
    _atomic_write(args.out, encode_hdr(rotated.data))
    _emit(_manifest(args, [args.env], [args.out]), args.out + ".manifest.json")


def cmd_synth_olat(args):
    scene = make_scene(args.geometry, args.size, seed=args.seed, albedo=args.albedo)
    rig = make_light_rig(args.lights, seed=args.seed)
    stack = synth_olat(scene, rig, exponent=args.exponent)
    scene_spec = {"geometry": args.geometry, "size": args.size,
                  "albedo": args.albedo, "seed": args.seed}
    save_olat_stack(args.out, stack, scene_spec)
    _emit(_manifest(args, [], [args.out], {"seed": args.seed,
                                           "lights": args.lights}))


def cmd_ibr(args):
    if not args.out and not args.png:
        raise UsageError("ibr needs --out and/or --png")
    stack = load_olat_stack(args.stack)
    env = _load_env(args.env)
    out = ibr_render(stack, env)
    outputs = []
    if args.out:
        save_pfm(args.out, out)
        outputs.append(args.out)
    if args.png:
        save_png(args.png, linear_to_srgb(out))
        outputs.append(args.png)
    _emit(_manifest(args, [args.env], outputs),
          (args.out or args.png) + ".manifest.json")


def cmd_simulate(args):
    shading = load_pfm(args.shading)
    subject = load_mask_png(args.mask) if args.mask else full_mask(shading.height, shading.width)
    params = SimParams(seed=args.seed, superpixels=args.superpixels,
                       n_bins=args.bins, rate_lambda=args.rate_lambda,
                       keep_fraction=args.keep_fraction, noise_sigma=args.noise_sigma)
    scr = simulate(shading, subject, params, rate=args.rate)
    save_scribble(args.out, scr)
    _atomic_write(os.path.join(args.out, "params.json"), params.to_json().encode())
    inputs = [p for p in (args.shading, args.mask) if p]
    m = _manifest(args, inputs, [args.out], {"seed": args.seed})
    _emit(m, os.path.join(args.out, "manifest.json"))


def cmd_complete(args):
    subject = load_mask_png(args.mask)
    normals = _load_normals(args.normal, subject)
    scr = _load_scribble_any(args.scribble, (subject.height, subject.width))
    shading, diag = complete_shading(scr, normals, subject, _completion_params(args))
    save_pfm(args.out, shading)
    diag_path = args.diagnostics or args.out + ".diagnostics.json"
    _atomic_write(diag_path, json.dumps(diag.to_dict(), indent=2).encode())
    inputs = [p for p in (args.normal, args.mask) if p]
    _emit(_manifest(args, inputs, [args.out, diag_path], {"solver": diag.to_dict()}),
          args.out + ".manifest.json")


def _run_relight(args, write_shading=False):
    image = _load_portrait(args.image)
    subject = load_mask_png(args.mask) if args.mask else full_mask(image.height, image.width)
    normals = _load_normals(args.normal, subject)
    albedo = load_pfm(args.albedo) if args.albedo else None
    skin = load_mask_png(args.skin_mask) if args.skin_mask else None
    bundle = PortraitBundle(image=image, normals=normals, subject=subject,
                            skin=skin, albedo=albedo)
    scr = _load_scribble_any(args.scribble, (image.height, image.width))
    tone = parse_hex_color(args.skin_tone) if args.skin_tone else None
    relit, shading, diag = relight_portrait(bundle, scr, _completion_params(args),
                                            skin_tone=tone)
    _atomic_write(args.out, encode_relit_png(relit))
    outputs = [args.out]
    if write_shading and args.shading_out:
        save_pfm(args.shading_out, shading)
        outputs.append(args.shading_out)
    extra = {"solver": diag}
    if getattr(args, "gt", None):
        gt = _load_portrait(args.gt)
        extra["psnr_db"] = psnr_masked(relit, gt, subject)
        extra["ssim"] = ssim_masked(relit, gt, subject)
    inputs = [p for p in (args.image, args.normal, args.mask, args.albedo,
                          args.skin_mask, getattr(args, "gt", None)) if p]
    m = _manifest(args, inputs, outputs, extra)
    _emit(m, args.out + ".manifest.json")


def cmd_relight(args):
    _run_relight(args)


def cmd_pipeline(args):
    _run_relight(args, write_shading=True)


def cmd_tone_shift(args):
    albedo = load_pfm(args.albedo) if args.albedo.endswith(".pfm") \
        else _load_portrait(args.albedo)
    skin = load_mask_png(args.skin_mask)
    shifted = shift_skin_tone(albedo, skin, parse_hex_color(args.skin_tone))
    if args.out.endswith(".pfm"):
        save_pfm(args.out, shifted)
    else:
        save_png(args.out, linear_to_srgb(shifted))
    _emit(_manifest(args, [args.albedo, args.skin_mask], [args.out]),
          args.out + ".manifest.json")


def _load_metric_image(path):
    if path.endswith(".pfm"):
        return load_pfm(path)
    return _load_portrait(path)


def cmd_eval(args):
    a = _load_metric_image(args.a)
    b = _load_metric_image(args.b)
    mask = load_mask_png(args.mask) if args.mask else full_mask(a.height, a.width)
    result = {"status": "ok", "command": "eval",
              "psnr_db": psnr_masked(a, b, mask), "ssim": ssim_masked(a, b, mask)}
    print(json.dumps(result))


def cmd_serve(args):
    import uvicorn
    from .service import create_app
    app = create_app(ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def cmd_delight(args):
    image = _load_portrait(args.image)
    shading = load_pfm(args.shading)
    save_pfm(args.out, delight_baseline(image, shading, eps=args.eps))
    _emit(_manifest(args, [args.image, args.shading], [args.out]),
          args.out + ".manifest.json")


# ---------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="relight", description=__doc__,
                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--threads", type=int, default=None,
                   help="cap internal parallelism (default: RELIGHT_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help,
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.set_defaults(func=fn)
        return sp

    sp = add("prefilter", cmd_prefilter, "prefilter an environment into irradiance maps")
    sp.add_argument("--env", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--exponent", type=float, default=DEFAULT_PHONG_EXPONENT)
    sp.add_argument("--out-height", type=int, default=32)

    sp = add("shade", cmd_shade, "render a shading map from normals")
    sp.add_argument("--normal", required=True)
    sp.add_argument("--valid", default=None, help="validity mask PNG")
    sp.add_argument("--irradiance", default=None, help="prefiltered directory")
    sp.add_argument("--env", default=None, help="environment .hdr (prefiltered on the fly)")
    sp.add_argument("--exponent", type=float, default=DEFAULT_PHONG_EXPONENT)
    sp.add_argument("--out-height", type=int, default=32)
    sp.add_argument("--out", required=True)

    sp = add("synth-env", cmd_synth_env, "synthesize a random ellipse environment")
    sp.add_argument("--out", required=True)
    sp.add_argument("--height", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--spec", default=None, help="ellipse spec JSON (overrides sampling)")
    sp.add_argument("--count-min", type=int, default=1)
    sp.add_argument("--count-max", type=int, default=4)
    sp.add_argument("--radius-min", type=float, default=0.15)
    sp.add_argument("--radius-max", type=float, default=0.9)
    sp.add_argument("--intensity-min", type=float, default=0.3)
    sp.add_argument("--intensity-max", type=float, default=1.5)
    sp.add_argument("--ambient", type=float, default=0.0)

    sp = add("rotate-env", cmd_rotate_env, "rotate an environment about the vertical axis")
    sp.add_argument("--env", required=True)
    sp.add_argument("--angle-deg", type=float, required=True)
    sp.add_argument("--out", required=True)

    sp = add("synth-olat", cmd_synth_olat, "render a synthetic OLAT stack")
    sp.add_argument("--geometry", choices=["sphere", "heightfield"], default="sphere")
    sp.add_argument("--size", type=int, default=512)
    sp.add_argument("--lights", type=int, default=160)
    sp.add_argument("--albedo", default="checker")
    sp.add_argument("--exponent", type=float, default=DEFAULT_PHONG_EXPONENT)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("ibr", cmd_ibr, "image-based relighting of an OLAT stack")
    sp.add_argument("--stack", required=True)
    sp.add_argument("--env", required=True)
    sp.add_argument("--out", default=None, help="output PFM")
    sp.add_argument("--png", default=None, help="optional sRGB PNG")

    sp = add("simulate", cmd_simulate, "simulate scribbles from a shading map")
    sp.add_argument("--shading", required=True)
    sp.add_argument("--mask", default=None, help="subject mask PNG")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--superpixels", type=int, default=256)
    sp.add_argument("--bins", type=int, default=25)
    sp.add_argument("--rate-lambda", type=float, default=3.0)
    sp.add_argument("--keep-fraction", type=float, default=0.05)
    sp.add_argument("--noise-sigma", type=float, default=10.0)
    sp.add_argument("--rate", type=float, default=None, help="force the sampling rate")
    sp.add_argument("--out", required=True, help="output directory")

    def completion_flags(sp):
        sp.add_argument("--data-weight", type=float, default=None, dest="data_weight")
        sp.add_argument("--kappa", type=float, default=None)
        sp.add_argument("--connectivity", type=int, choices=[4, 8], default=None)
        sp.add_argument("--solve-height", type=int, default=None, dest="solve_height")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--max-iter", type=int, default=None, dest="max_iter")

    sp = add("complete", cmd_complete, "complete shading from scribbles and normals")
    sp.add_argument("--scribble", required=True, help="scribble directory or RLE JSON")
    sp.add_argument("--normal", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--diagnostics", default=None)
    completion_flags(sp)

    def relight_flags(sp):
        sp.add_argument("--image", required=True)
        sp.add_argument("--normal", required=True)
        sp.add_argument("--mask", default=None)
        sp.add_argument("--albedo", default=None)
        sp.add_argument("--skin-mask", default=None, dest="skin_mask")
        sp.add_argument("--skin-tone", default=None, dest="skin_tone",
                        help="sRGB hex, e.g. '#C68E6E'")
        sp.add_argument("--scribble", required=True)
        sp.add_argument("--out", required=True)
        completion_flags(sp)

    sp = add("relight", cmd_relight, "relight a portrait from scribbles")
    relight_flags(sp)

    sp = add("pipeline", cmd_pipeline, "full relight pipeline with optional evaluation")
    relight_flags(sp)
    sp.add_argument("--gt", default=None, help="ground-truth PNG for PSNR/SSIM report")
    sp.add_argument("--shading-out", default=None, dest="shading_out")

    sp = add("tone-shift", cmd_tone_shift, "shift the skin region's mean albedo")
    sp.add_argument("--albedo", required=True)
    sp.add_argument("--skin-mask", required=True, dest="skin_mask")
    sp.add_argument("--skin-tone", required=True, dest="skin_tone")
    sp.add_argument("--out", required=True)

    sp = add("delight", cmd_delight, "baseline albedo estimate image/shading")
    sp.add_argument("--image", required=True)
    sp.add_argument("--shading", required=True)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "PSNR/SSIM between two images under a mask")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--mask", default=None)

    sp = add("serve", cmd_serve, "run the interactive relighting service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8572)
    sp.add_argument("--ui-dir", default=None, help="static UI assets to serve at /")

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (RelightError, FileNotFoundError, json.JSONDecodeError) as e:
        print(json.dumps({"status": "error", "command": args.command,
                          "error": str(e)}))
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
