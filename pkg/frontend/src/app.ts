/** DOM wiring: canvas rendering, pointer events, undo button, compare slider.
 *
 * Rendering is a pure redraw from controller state plus two ephemeral
 * inputs (hover id, compare position); nothing here mutates pixels.
 */

import { HttpApiClient } from "./api.js";
import { EraserController } from "./controller.js";
import { compareEnabled } from "./state.js";
import type { UiState } from "./state.js";

const HIGHLIGHT = "rgba(96, 200, 255, 0.95)";
const HIGHLIGHT_FILL = "rgba(96, 200, 255, 0.18)";

function imageFromBytes(bytes: Uint8Array): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const blob = new Blob([bytes.buffer.slice(0) as ArrayBuffer], { type: "image/png" });
    const url = URL.createObjectURL(blob);
    const img = new Image();
    img.onload = () => {
      URL.revokeObjectURL(url);
      resolve(img);
    };
    img.onerror = () => {
      URL.revokeObjectURL(url);
      reject(new Error("image decode failed"));
    };
    img.src = url;
  });
}

class EraserApp {
  private controller = new EraserController(new HttpApiClient());
  private canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private statusEl: HTMLElement;
  private toastEl: HTMLElement;
  private bannerEl: HTMLElement;
  private undoBtn: HTMLButtonElement;
  private compareEl: HTMLInputElement;
  private originalImg: HTMLImageElement | null = null;
  private currentImg: HTMLImageElement | null = null;
  private hoverId: string | null = null;

  constructor() {
    this.canvas = document.getElementById("scene") as HTMLCanvasElement;
    this.ctx = this.canvas.getContext("2d") as CanvasRenderingContext2D;
    this.statusEl = document.getElementById("status") as HTMLElement;
    this.toastEl = document.getElementById("toast") as HTMLElement;
    this.bannerEl = document.getElementById("retry-banner") as HTMLElement;
    this.undoBtn = document.getElementById("undo") as HTMLButtonElement;
    this.compareEl = document.getElementById("compare") as HTMLInputElement;

    this.canvas.addEventListener("mousemove", (e) => this.onMove(e));
    this.canvas.addEventListener("mouseleave", () => this.setHover(null));
    this.canvas.addEventListener("click", (e) => {
      const [x, y] = this.toImageCoords(e);
      void this.controller.clickAt(x, y).then(() => this.refreshImages());
    });
    this.undoBtn.addEventListener("click", () => {
      void this.controller.undo().then(() => this.refreshImages());
    });
    this.compareEl.addEventListener("input", () => this.draw());
    (document.getElementById("retry") as HTMLButtonElement).addEventListener("click", () => {
      void this.start();
    });

    this.controller.subscribe((state) => this.onState(state));
  }

  async start(): Promise<void> {
    this.bannerEl.hidden = true;
    try {
      await this.controller.init();
      await this.refreshImages();
    } catch {
      this.bannerEl.hidden = false;
    }
  }

  private toImageCoords(e: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const x = ((e.clientX - rect.left) / rect.width) * this.canvas.width;
    const y = ((e.clientY - rect.top) / rect.height) * this.canvas.height;
    return [x, y];
  }

  private onMove(e: MouseEvent): void {
    const [x, y] = this.toImageCoords(e);
    this.setHover(this.controller.hover(x, y));
  }

  private setHover(id: string | null): void {
    if (id === this.hoverId) return;
    this.hoverId = id;
    this.canvas.style.cursor = id ? "pointer" : "default";
    this.draw();
  }

  private async refreshImages(): Promise<void> {
    const original = this.controller.getOriginalBytes();
    const current = this.controller.getCurrentBytes();
    if (original) this.originalImg = await imageFromBytes(original);
    this.currentImg = current && current !== original ? await imageFromBytes(current) : this.originalImg;
    this.draw();
  }

  private onState(state: UiState): void {
    if (state.width && this.canvas.width !== state.width) {
      this.canvas.width = state.width;
      this.canvas.height = state.height;
    }
    this.statusEl.textContent = state.busy
      ? "computing…"
      : state.erased.length
        ? `erased: ${state.erased.join(", ")}`
        : "click an object to erase it";
    this.undoBtn.disabled = state.busy || !state.loaded;
    this.compareEl.disabled = !compareEnabled(state);
    if (!compareEnabled(state)) this.compareEl.value = "1";
    this.toastEl.hidden = !state.error;
    if (state.error) this.toastEl.textContent = state.error;
    if (state.busy) this.hoverId = null;
    this.draw();
  }

  /** Compare slider is a left-to-right wipe: 0 = original only, 1 = current only. */
  private draw(): void {
    const { width, height } = this.canvas;
    if (!width || !this.originalImg) return;
    const state = this.controller.getState();
    const current = this.currentImg ?? this.originalImg;
    const split = compareEnabled(state) ? Number(this.compareEl.value) * width : width;

    this.ctx.clearRect(0, 0, width, height);
    this.ctx.drawImage(this.originalImg, 0, 0);
    if (split > 0) {
      this.ctx.save();
      this.ctx.beginPath();
      this.ctx.rect(0, 0, split, height);
      this.ctx.clip();
      this.ctx.drawImage(current, 0, 0);
      this.ctx.restore();
    }
    if (split > 0 && split < width) {
      this.ctx.strokeStyle = "rgba(255,255,255,0.8)";
      this.ctx.beginPath();
      this.ctx.moveTo(split, 0);
      this.ctx.lineTo(split, height);
      this.ctx.stroke();
    }

    if (this.hoverId && !state.busy) {
      const inst = state.instances.find((i) => i.id === this.hoverId);
      if (inst && inst.outline.length >= 3) {
        this.ctx.beginPath();
        this.ctx.moveTo(inst.outline[0][0], inst.outline[0][1]);
        for (const [px, py] of inst.outline.slice(1)) this.ctx.lineTo(px, py);
        this.ctx.closePath();
        this.ctx.fillStyle = HIGHLIGHT_FILL;
        this.ctx.fill();
        this.ctx.strokeStyle = HIGHLIGHT;
        this.ctx.lineWidth = 2;
        this.ctx.stroke();
      }
    }

    if (state.busy) {
      this.ctx.fillStyle = "rgba(20, 20, 28, 0.45)";
      this.ctx.fillRect(0, 0, width, height);
    }
  }
}

window.addEventListener("DOMContentLoaded", () => {
  void new EraserApp().start();
});
