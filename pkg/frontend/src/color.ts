/**
 * sRGB <-> CIE L*a*b* (D65) for the color picker: light colors are
 * chosen from a swatch grid, then the intensity slider overrides L.
 */

import type { LabColor } from "./raster.js";

const RGB_TO_XYZ = [
  [0.4124564, 0.3575761, 0.1804375],
  [0.2126729, 0.7151522, 0.072175],
  [0.0193339, 0.119192, 0.9503041],
];
const WHITE = RGB_TO_XYZ.map((row) => row[0] + row[1] + row[2]);

export function srgbToLinear(c: number): number {
  return c <= 0.04045 ? c / 12.92 : Math.pow((c + 0.055) / 1.055, 2.4);
}

export function linearToSrgb(c: number): number {
  const v = c <= 0.0031308 ? c * 12.92 : 1.055 * Math.pow(c, 1 / 2.4) - 0.055;
  return Math.min(1, Math.max(0, v));
}

export function parseHex(hex: string): [number, number, number] {
  const m = /^#?([0-9a-fA-F]{6})$/.exec(hex);
  if (!m) throw new Error(`bad hex color ${hex}`);
  const v = parseInt(m[1], 16);
  return [(v >> 16) & 0xff, (v >> 8) & 0xff, v & 0xff].map((x) => x / 255) as [
    number,
    number,
    number,
  ];
}

function labF(t: number): number {
  const d3 = Math.pow(6 / 29, 3);
  return t > d3 ? Math.cbrt(t) : t / (3 * Math.pow(6 / 29, 2)) + 4 / 29;
}

export function hexToLab(hex: string): LabColor {
  const [r, g, b] = parseHex(hex).map(srgbToLinear);
  const xyz = RGB_TO_XYZ.map((row, i) => (row[0] * r + row[1] * g + row[2] * b) / WHITE[i]);
  const [fx, fy, fz] = xyz.map(labF);
  return { l: 116 * fy - 16, a: 500 * (fx - fy), b: 200 * (fy - fz) };
}

/** Swatch color with the slider's L substituted in. */
export function swatchWithIntensity(hex: string, lightness: number): LabColor {
  const lab = hexToLab(hex);
  return { l: Math.min(100, Math.max(0, lightness)), a: lab.a, b: lab.b };
}

/** Approximate sRGB preview of a Lab color, for painting the canvas overlay. */
export function labToCss(lab: LabColor): string {
  const fy = (lab.l + 16) / 116;
  const fx = fy + lab.a / 500;
  const fz = fy - lab.b / 200;
  const finv = (t: number) => {
    const d = 6 / 29;
    return t > d ? t * t * t : 3 * d * d * (t - 4 / 29);
  };
  const xyz = [finv(fx) * WHITE[0], finv(fy) * WHITE[1], finv(fz) * WHITE[2]];
  const inv = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.969266, 1.8760108, 0.041556],
    [0.0556434, -0.2040259, 1.0572252],
  ];
  const rgb = inv.map((row) =>
    Math.round(255 * linearToSrgb(row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2])),
  );
  return `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
}

/** Light-color swatches offered by the picker. */
export const LIGHT_SWATCHES = [
  "#FFFFFF", "#FFE9C4", "#FFD27F", "#FF9E5E", "#FF6B6B",
  "#C4E1FF", "#7FB5FF", "#9E7FFF", "#B8FFC4", "#FFFFAA",
  "#666666", "#222222",
];

/** Skin-tone swatch row (sent to the service as sRGB hex). */
export const SKIN_SWATCHES = [
  "#F1C27D", "#E0AC69", "#C68E6E", "#8D5524", "#5C3A21", "#3B2219",
];
