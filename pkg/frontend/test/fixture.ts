import type { StrokeSet } from "../src/raster.js";

/** The fixed stroke fixture shared by the golden and e2e tests. */
export function fixtureStrokes(): StrokeSet {
  return [
    { points: [{ x: 30, y: 40 }, { x: 90, y: 44 }], radius: 7, color: { l: 82, a: 6, b: 24 } },
    { points: [{ x: 20, y: 90 }, { x: 60, y: 100 }, { x: 100, y: 86 }], radius: 9, color: { l: 18, a: -4, b: -18 } },
    { points: [{ x: 64, y: 64 }], radius: 12, color: { l: 65, a: 30, b: -8 } },
    { points: [{ x: 50, y: 60 }, { x: 80, y: 70 }], radius: 4, color: { l: 50, a: 0, b: 0 }, eraser: true },
  ];
}
