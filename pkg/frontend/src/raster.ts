/**
 * Stroke rasterization: turns the ordered stroke list into the exact
 * run-length scribble raster the service consumes.
 *
 * Pure and deterministic: disks of the brush radius are stamped along
 * each polyline, later strokes overwrite earlier ones per pixel, and
 * eraser strokes clear coverage. The RLE payload merges horizontal
 * spans that share a stroke (and so a color).
 */

export interface LabColor {
  l: number;
  a: number;
  b: number;
}

export interface Stroke {
  /** polyline in image pixel coordinates */
  points: Array<{ x: number; y: number }>;
  /** brush radius in image pixels */
  radius: number;
  color: LabColor;
  eraser?: boolean;
}

export type StrokeSet = Stroke[];

export interface ScribbleRun {
  y: number;
  x0: number;
  n: number;
  lab: [number, number, number];
}

export interface ScribbleRaster {
  width: number;
  height: number;
  runs: ScribbleRun[];
}

/** Stamp one filled disk into the owner buffer. */
function stampDisk(
  owner: Int32Array,
  width: number,
  height: number,
  cx: number,
  cy: number,
  radius: number,
  value: number,
): void {
  const r = Math.max(0.5, radius);
  const yLo = Math.max(0, Math.ceil(cy - r));
  const yHi = Math.min(height - 1, Math.floor(cy + r));
  for (let y = yLo; y <= yHi; y++) {
    const dy = y - cy;
    const span = Math.sqrt(Math.max(0, r * r - dy * dy));
    const xLo = Math.max(0, Math.ceil(cx - span));
    const xHi = Math.min(width - 1, Math.floor(cx + span));
    const row = y * width;
    for (let x = xLo; x <= xHi; x++) owner[row + x] = value;
  }
}

/** Walk a segment stamping disks densely enough to leave no gaps. */
function stampSegment(
  owner: Int32Array,
  width: number,
  height: number,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  radius: number,
  value: number,
): void {
  const len = Math.hypot(x1 - x0, y1 - y0);
  const step = Math.max(0.5, radius * 0.5);
  const count = Math.max(1, Math.ceil(len / step));
  for (let k = 0; k <= count; k++) {
    const t = k / count;
    stampDisk(owner, width, height, x0 + t * (x1 - x0), y0 + t * (y1 - y0), radius, value);
  }
}

/**
 * Rasterize the stroke set into an owner map (index of the last stroke
 * covering each pixel, -1 for none) and encode it as RLE runs.
 */
export function rasterizeStrokes(strokes: StrokeSet, width: number, height: number): ScribbleRaster {
  if (width < 1 || height < 1) throw new Error(`bad raster size ${width}x${height}`);
  const owner = new Int32Array(width * height).fill(-1);
  strokes.forEach((stroke, index) => {
    const value = stroke.eraser ? -1 : index;
    const pts = stroke.points;
    if (pts.length === 0) return;
    if (pts.length === 1) {
      stampDisk(owner, width, height, pts[0].x, pts[0].y, stroke.radius, value);
      return;
    }
    for (let i = 1; i < pts.length; i++) {
      stampSegment(owner, width, height, pts[i - 1].x, pts[i - 1].y, pts[i].x, pts[i].y, stroke.radius, value);
    }
  });

  const runs: ScribbleRun[] = [];
  for (let y = 0; y < height; y++) {
    let x = 0;
    const row = y * width;
    while (x < width) {
      const id = owner[row + x];
      if (id < 0) {
        x++;
        continue;
      }
      const x0 = x;
      while (x < width && owner[row + x] === id) x++;
      const c = strokes[id].color;
      runs.push({ y, x0, n: x - x0, lab: [c.l, c.a, c.b] });
    }
  }
  return { width, height, runs };
}

/** Count of covered pixels, straight from the runs. */
export function coveredPixels(raster: ScribbleRaster): number {
  return raster.runs.reduce((acc, r) => acc + r.n, 0);
}
