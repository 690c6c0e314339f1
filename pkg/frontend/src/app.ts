/**
 * Canvas application: draw colored light/shadow scribbles over the
 * portrait, pick a skin tone, and watch the relit result update.
 *
 * Flow: upload the bundle once to create a session, then every pen-up
 * schedules a trailing 200 ms debounce that rasterizes the committed
 * strokes and posts them; the newest request supersedes a pending one.
 * Undoing back to an empty stroke list restores the original portrait
 * locally, with no server call.
 */

import { ApiError, RelightClient } from "./api.js";
import { LIGHT_SWATCHES, SKIN_SWATCHES, labToCss, swatchWithIntensity } from "./color.js";
import { StrokeHistory } from "./history.js";
import { coveredPixels, rasterizeStrokes, type Stroke } from "./raster.js";

const DEBOUNCE_MS = 200;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class App {
  private client = new RelightClient("");
  private history = new StrokeHistory();
  private sessionId: string | null = null;
  private width = 0;
  private height = 0;
  private originalUrl: string | null = null;
  private resultUrl: string | null = null;

  private brushRadius = 14;
  private intensity = 75;
  private swatch = LIGHT_SWATCHES[1];
  private eraser = false;
  private skinTone: string | null = null;

  private drawing: Stroke | null = null;
  private debounceTimer: number | null = null;

  private view = el<HTMLCanvasElement>("view");
  private overlay = el<HTMLCanvasElement>("overlay");
  private status = el<HTMLSpanElement>("status");

  constructor() {
    this.buildSwatches();
    this.wireUpload();
    this.wireCanvas();
    this.wireControls();
  }

  private buildSwatches(): void {
    const grid = el<HTMLDivElement>("swatches");
    for (const hex of LIGHT_SWATCHES) {
      const b = document.createElement("button");
      b.className = "swatch";
      b.style.background = hex;
      b.title = hex;
      b.onclick = () => {
        this.swatch = hex;
        this.eraser = false;
        el<HTMLButtonElement>("eraser").classList.remove("active");
      };
      grid.appendChild(b);
    }
    const skin = el<HTMLDivElement>("skin-swatches");
    for (const hex of SKIN_SWATCHES) {
      const b = document.createElement("button");
      b.className = "swatch";
      b.style.background = hex;
      b.title = `skin tone ${hex}`;
      b.onclick = () => {
        this.skinTone = this.skinTone === hex ? null : hex;
        for (const other of Array.from(skin.children)) other.classList.remove("active");
        if (this.skinTone) b.classList.add("active");
        this.scheduleRelight(0);
      };
      skin.appendChild(b);
    }
  }

  private wireUpload(): void {
    el<HTMLButtonElement>("create-session").onclick = async () => {
      const image = el<HTMLInputElement>("file-image").files?.[0];
      const normals = el<HTMLInputElement>("file-normals").files?.[0];
      const subject = el<HTMLInputElement>("file-subject").files?.[0];
      const skin = el<HTMLInputElement>("file-skin").files?.[0];
      const albedo = el<HTMLInputElement>("file-albedo").files?.[0];
      if (!image || !normals || !subject) {
        this.toast("image, normals and subject mask are required");
        return;
      }
      try {
        const info = await this.client.createSession({
          image, normals, subject_mask: subject,
          ...(skin ? { skin_mask: skin } : {}),
          ...(albedo ? { albedo } : {}),
        });
        this.sessionId = info.session_id;
        this.width = info.width;
        this.height = info.height;
        this.history.clear();
        this.originalUrl = URL.createObjectURL(image);
        this.showImage(this.originalUrl);
        this.view.width = this.overlay.width = this.width;
        this.view.height = this.overlay.height = this.height;
        this.status.textContent = `session ${info.session_id.slice(0, 8)} (${this.width}x${this.height})`;
      } catch (err) {
        this.toast(err instanceof Error ? err.message : String(err));
      }
    };
  }

  private canvasPoint(ev: PointerEvent): { x: number; y: number } {
    const rect = this.overlay.getBoundingClientRect();
    return {
      x: ((ev.clientX - rect.left) / rect.width) * this.width,
      y: ((ev.clientY - rect.top) / rect.height) * this.height,
    };
  }

  private wireCanvas(): void {
    this.overlay.onpointerdown = (ev) => {
      if (!this.sessionId) return;
      this.overlay.setPointerCapture(ev.pointerId);
      this.drawing = {
        points: [this.canvasPoint(ev)],
        radius: this.brushRadius,
        color: swatchWithIntensity(this.swatch, this.intensity),
        eraser: this.eraser,
      };
    };
    this.overlay.onpointermove = (ev) => {
      if (!this.drawing) return;
      this.drawing.points.push(this.canvasPoint(ev));
      this.paintOverlay();
    };
    this.overlay.onpointerup = () => {
      if (!this.drawing) return;
      this.history.push(this.drawing);
      this.drawing = null;
      this.paintOverlay();
      this.scheduleRelight(DEBOUNCE_MS); // trailing debounce after pen-up
    };
  }

  private wireControls(): void {
    el<HTMLInputElement>("brush").oninput = (ev) => {
      this.brushRadius = Number((ev.target as HTMLInputElement).value);
    };
    el<HTMLInputElement>("intensity").oninput = (ev) => {
      this.intensity = Number((ev.target as HTMLInputElement).value);
    };
    el<HTMLButtonElement>("eraser").onclick = (ev) => {
      this.eraser = !this.eraser;
      (ev.target as HTMLButtonElement).classList.toggle("active", this.eraser);
    };
    el<HTMLButtonElement>("undo").onclick = () => {
      if (this.history.undo()) this.afterHistoryChange();
    };
    el<HTMLButtonElement>("redo").onclick = () => {
      if (this.history.redo()) this.afterHistoryChange();
    };
    el<HTMLButtonElement>("clear").onclick = () => {
      this.history.clear();
      this.afterHistoryChange();
    };
  }

  private afterHistoryChange(): void {
    this.paintOverlay();
    if (this.history.isEmpty) {
      // back to the untouched portrait, locally
      if (this.originalUrl) this.showImage(this.originalUrl);
      this.status.textContent = "original";
      return;
    }
    this.scheduleRelight(DEBOUNCE_MS);
  }

  private paintOverlay(): void {
    const ctx = this.overlay.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.width, this.height);
    const strokes = this.history.current();
    const live = this.drawing ? [...strokes, this.drawing] : strokes;
    for (const s of live) {
      ctx.strokeStyle = s.eraser ? "rgba(255,255,255,0.9)" : labToCss(s.color);
      ctx.lineWidth = s.radius * 2;
      ctx.lineCap = ctx.lineJoin = "round";
      ctx.setLineDash(s.eraser ? [6, 6] : []);
      ctx.beginPath();
      s.points.forEach((p, i) => (i ? ctx.lineTo(p.x, p.y) : ctx.moveTo(p.x, p.y)));
      ctx.stroke();
    }
  }

  private scheduleRelight(delay: number): void {
    if (this.debounceTimer !== null) window.clearTimeout(this.debounceTimer);
    this.debounceTimer = window.setTimeout(() => void this.relight(), delay);
  }

  private async relight(): Promise<void> {
    if (!this.sessionId || this.history.isEmpty) return;
    const raster = rasterizeStrokes(this.history.current(), this.width, this.height);
    if (coveredPixels(raster) === 0) return;
    this.status.textContent = "relighting…";
    try {
      const result = await this.client.relight(this.sessionId, raster, this.skinTone);
      if (!result) return; // superseded by a newer request
      if (this.resultUrl) URL.revokeObjectURL(this.resultUrl);
      this.resultUrl = URL.createObjectURL(result.blob);
      this.showImage(this.resultUrl);
      const d = result.diagnostics;
      this.status.textContent =
        `${d.iterations} iters, residual ${d.residual.toExponential(1)}, ` +
        `${d.elapsedMs.toFixed(0)} ms${result.fromCache ? " (cached)" : ""}`;
    } catch (err) {
      if (err instanceof ApiError) this.toast(`relight failed: ${err.message}`);
      else this.toast(String(err));
      this.status.textContent = "error";
    }
  }

  private showImage(url: string): void {
    const ctx = this.view.getContext("2d");
    if (!ctx) return;
    const img = new Image();
    img.onload = () => {
      ctx.clearRect(0, 0, this.view.width, this.view.height);
      ctx.drawImage(img, 0, 0, this.view.width, this.view.height);
    };
    img.src = url;
  }

  private toast(message: string): void {
    const host = el<HTMLDivElement>("toasts");
    const node = document.createElement("div");
    node.className = "toast";
    node.textContent = message;
    host.appendChild(node);
    window.setTimeout(() => node.remove(), 4000);
  }
}

new App();
