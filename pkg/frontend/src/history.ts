/**
 * Undo/redo over the stroke list. The committed stroke history plus the
 * session id is the complete UI state: any displayed result can be
 * reproduced from them.
 */

import type { Stroke, StrokeSet } from "./raster.js";

export class StrokeHistory {
  private strokes: Stroke[] = [];
  private cursor = 0; // strokes[0..cursor) are live

  push(stroke: Stroke): void {
    this.strokes.length = this.cursor; // drop any redo tail
    this.strokes.push(stroke);
    this.cursor++;
  }

  undo(): boolean {
    if (this.cursor === 0) return false;
    this.cursor--;
    return true;
  }

  redo(): boolean {
    if (this.cursor >= this.strokes.length) return false;
    this.cursor++;
    return true;
  }

  get canUndo(): boolean {
    return this.cursor > 0;
  }

  get canRedo(): boolean {
    return this.cursor < this.strokes.length;
  }

  get isEmpty(): boolean {
    return this.cursor === 0;
  }

  current(): StrokeSet {
    return this.strokes.slice(0, this.cursor);
  }

  clear(): void {
    this.strokes = [];
    this.cursor = 0;
  }
}
