"""Radiance RGBE (.hdr) codec with adaptive run-length scanlines.

Decode convention is the Radiance one: a component byte m with shared
exponent byte e maps to (m + 0.5) / 256 * 2**(e - 128); a zero exponent
means black. Encoding divides by the mantissa-scaled max channel, which
makes decode -> encode -> decode byte-stable.
"""

import numpy as np

from .errors import DecodeError, ContractError

_MIN_RLE_WIDTH = 8
_MAX_RLE_WIDTH = 32767


def rgbe_to_float(rgbe):
    """(..., 4) uint8 RGBE to (..., 3) float32 linear radiance."""
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    exp = rgbe[..., 3].astype(np.int32)
    scale = np.where(exp == 0, 0.0, np.ldexp(1.0, exp - 136))  # 2^(e-128)/256
    return ((rgbe[..., :3].astype(np.float64) + 0.5) * scale[..., None]).astype(np.float32)


def float_to_rgbe(rgb):
    """(..., 3) float radiance to (..., 4) uint8 RGBE."""
    rgb = np.maximum(np.asarray(rgb, dtype=np.float64), 0.0)
    maxc = rgb.max(axis=-1)
    mant, exp = np.frexp(maxc)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(maxc < 1e-32, 0.0, mant * 256.0 / maxc)
    comps = np.clip(np.floor(rgb * scale[..., None]), 0, 255)
    out = np.concatenate(
        [comps, np.where(maxc < 1e-32, 0, exp + 128)[..., None]], axis=-1)
    return out.astype(np.uint8)


def _parse_header(blob):
    if not (blob.startswith(b"#?RADIANCE") or blob.startswith(b"#?RGBE")):
        raise DecodeError("bad Radiance magic", offset=0)
    pos = 0
    fmt_ok = False
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise DecodeError("unterminated header", offset=pos)
        line = blob[pos:nl]
        pos = nl + 1
        if line.startswith(b"FORMAT="):
            if line.strip() != b"FORMAT=32-bit_rle_rgbe":
                raise DecodeError(f"unsupported format {line!r}", offset=pos - len(line) - 1)
            fmt_ok = True
        if line == b"":
            break
    nl = blob.find(b"\n", pos)
    if nl < 0:
        raise DecodeError("missing resolution line", offset=pos)
    res = blob[pos:nl].split()
    if len(res) != 4 or res[0] != b"-Y" or res[2] != b"+X":
        raise DecodeError(f"unsupported orientation {blob[pos:nl]!r}", offset=pos)
    if not fmt_ok:
        raise DecodeError("missing FORMAT line", offset=pos)
    try:
        h, w = int(res[1]), int(res[3])
    except ValueError:
        raise DecodeError("non-numeric resolution", offset=pos)
    return h, w, nl + 1


def _decode_rle_scanline(blob, pos, width):
    line = np.empty((width, 4), dtype=np.uint8)
    for c in range(4):
        x = 0
        while x < width:
            if pos >= len(blob):
                raise DecodeError("truncated RLE scanline", offset=pos)
            count = blob[pos]
            pos += 1
            if count > 128:  # run
                n = count - 128
                if x + n > width or pos >= len(blob):
                    raise DecodeError("RLE run overflows scanline", offset=pos - 1)
                line[x:x + n, c] = blob[pos]
                pos += 1
            else:  # literals
                n = count
                if n == 0 or x + n > width or pos + n > len(blob):
                    raise DecodeError("RLE literal overflows scanline", offset=pos - 1)
                line[x:x + n, c] = np.frombuffer(blob[pos:pos + n], dtype=np.uint8)
                pos += n
            x += n
    return line, pos


def decode_hdr(blob: bytes):
    """Decode .hdr bytes to an (h, w, 3) float32 radiance array."""
    h, w, pos = _parse_header(blob)
    rgbe = np.empty((h, w, 4), dtype=np.uint8)
    for row in range(h):
        if pos + 4 > len(blob):
            raise DecodeError("truncated scanline", offset=pos)
        head = blob[pos:pos + 4]
        if head[0] == 2 and head[1] == 2 and (head[2] << 8 | head[3]) == w \
                and _MIN_RLE_WIDTH <= w <= _MAX_RLE_WIDTH:
            rgbe[row], pos = _decode_rle_scanline(blob, pos + 4, w)
        else:
            # flat scanline, with the old-style (1,1,1,n) repeat marker
            x = 0
            while x < w:
                if pos + 4 > len(blob):
                    raise DecodeError("truncated flat scanline", offset=pos)
                px = blob[pos:pos + 4]
                if px[0] == 1 and px[1] == 1 and px[2] == 1:
                    if x == 0:
                        raise DecodeError("repeat marker with no previous pixel", offset=pos)
                    n = px[3]
                    if x + n > w:
                        raise DecodeError("repeat overflows scanline", offset=pos)
                    rgbe[row, x:x + n] = rgbe[row, x - 1]
                    x += n
                else:
                    rgbe[row, x] = np.frombuffer(px, dtype=np.uint8)
                    x += 1
                pos += 4
    return rgbe_to_float(rgbe)


def _encode_rle_channel(vals):
    out = bytearray()
    n = len(vals)
    x = 0
    while x < n:
        run = 1
        while x + run < n and run < 127 and vals[x + run] == vals[x]:
            run += 1
        if run >= 4:
            out.append(128 + run)
            out.append(vals[x])
            x += run
        else:
            lit_end = x + run
            while lit_end < n and lit_end - x < 128:
                nxt = 1
                while lit_end + nxt < n and nxt < 4 and vals[lit_end + nxt] == vals[lit_end]:
                    nxt += 1
                if nxt >= 4:
                    break
                lit_end += 1
            out.append(lit_end - x)
            out.extend(vals[x:lit_end])
            x = lit_end
    return bytes(out)


def encode_hdr(radiance) -> bytes:
    """Encode an (h, w, 3) float radiance array as RLE .hdr bytes."""
    radiance = np.asarray(radiance)
    if radiance.ndim != 3 or radiance.shape[2] != 3:
        raise ContractError(f"expected (h, w, 3) radiance, got {radiance.shape}")
    h, w = radiance.shape[:2]
    rgbe = float_to_rgbe(radiance)
    out = bytearray(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n")
    out.extend(b"-Y %d +X %d\n" % (h, w))
    use_rle = _MIN_RLE_WIDTH <= w <= _MAX_RLE_WIDTH
    for row in range(h):
        if use_rle:
            out.extend(bytes([2, 2, w >> 8, w & 0xFF]))
            for c in range(4):
                out.extend(_encode_rle_channel(rgbe[row, :, c].tobytes()))
        else:
            out.extend(rgbe[row].tobytes())
    return bytes(out)
