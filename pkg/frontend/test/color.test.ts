import { describe, expect, it } from "vitest";
import { hexToLab, labToCss, parseHex, swatchWithIntensity } from "../src/color.js";

describe("color conversion", () => {
  it("white is L=100, a=b=0", () => {
    const lab = hexToLab("#FFFFFF");
    expect(lab.l).toBeCloseTo(100, 4);
    expect(lab.a).toBeCloseTo(0, 4);
    expect(lab.b).toBeCloseTo(0, 4);
  });

  it("black is the origin", () => {
    const lab = hexToLab("#000000");
    expect(lab.l).toBeCloseTo(0, 6);
  });

  it("matches the backend conversion for a known swatch", () => {
    // #C68E6E through the same sRGB -> D65 Lab math on the python side
    const lab = hexToLab("#C68E6E");
    expect(lab.l).toBeCloseTo(63.73762, 4);
    expect(lab.a).toBeCloseTo(17.32078, 4);
    expect(lab.b).toBeCloseTo(25.45507, 4);
  });

  it("intensity slider overrides L and keeps chroma", () => {
    const base = hexToLab("#FF9E5E");
    const dimmed = swatchWithIntensity("#FF9E5E", 20);
    expect(dimmed.l).toBe(20);
    expect(dimmed.a).toBeCloseTo(base.a, 9);
    expect(dimmed.b).toBeCloseTo(base.b, 9);
    expect(swatchWithIntensity("#FF9E5E", 130).l).toBe(100);
  });

  it("css preview round-trips near-neutral colors", () => {
    expect(labToCss({ l: 100, a: 0, b: 0 })).toBe("rgb(255, 255, 255)");
    expect(labToCss({ l: 0, a: 0, b: 0 })).toBe("rgb(0, 0, 0)");
  });

  it("rejects malformed hex", () => {
    expect(() => parseHex("#12")).toThrow();
    expect(() => parseHex("zzzzzz")).toThrow();
  });
});
