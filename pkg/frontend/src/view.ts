/**
 * The recorder view: live device projection with a layout-box overlay,
 * gesture capture, the confirmed-step list, and the save control.
 *
 * The service is the single source of truth: a step appears in the list only
 * after the service confirmed it, and the overlay is rendered only when its
 * layout data belongs to the currently displayed frame (same token). Events
 * always carry the displayed frame's token; on a stale-token rejection the
 * projection refreshes and the event is dropped, never silently retried.
 */

import {
  Layout,
  RecorderApi,
  RecorderEvent,
  StaleTokenError,
  StepSummary,
} from "./api.js";
import {
  Rect,
  deviceBoxToProjection,
  projectionDistance,
  projectionToRel,
} from "./coords.js";

const TAP_DRAG_THRESHOLD_PX = 6;

export interface ViewElements {
  projection: HTMLImageElement;
  overlay: HTMLElement;
  stepList: HTMLElement;
  saveButton: HTMLButtonElement;
  backButton: HTMLButtonElement;
  textToggle: HTMLInputElement;
  textEntry: HTMLInputElement;
  status: HTMLElement;
}

export class RecorderView {
  readonly steps: StepSummary[] = [];
  token = "";
  savedId: string | null = null;

  private layout: Layout | null = null;
  private layoutToken = "";
  private frameDataUrl = "";
  private pressStart: { x: number; y: number } | null = null;
  private pending: Promise<void> = Promise.resolve();

  constructor(
    private readonly api: RecorderApi,
    private readonly el: ViewElements,
    private readonly rectProvider: () => Rect = () => {
      const r = this.el.projection.getBoundingClientRect();
      return { left: r.left, top: r.top, width: r.width, height: r.height };
    },
  ) {
    el.projection.addEventListener("mousedown", (ev) => this.onDown(ev as MouseEvent));
    el.projection.addEventListener("mouseup", (ev) => this.onUp(ev as MouseEvent));
    el.saveButton.addEventListener("click", () => this.enqueue(() => this.onSave()));
    el.backButton.addEventListener("click", () =>
      this.enqueue(() => this.submitEvent({ kind: "back" })),
    );
    el.textEntry.addEventListener("keydown", (ev) => {
      if ((ev as KeyboardEvent).key === "Enter") {
        this.enqueue(() => this.onTextSubmit());
      }
    });
  }

  /** Initial load: restore server-side session state, then show the frame. */
  async start(): Promise<void> {
    const existing = await this.api.steps();
    this.steps.push(...existing);
    for (const step of existing) {
      this.appendStepRow(step);
    }
    this.renderControls();
    await this.refresh();
  }

  /** All outstanding work; tests await this instead of sleeping. */
  flush(): Promise<void> {
    return this.pending;
  }

  private enqueue(task: () => Promise<void>): Promise<void> {
    this.pending = this.pending.then(task, task);
    return this.pending;
  }

  async refresh(): Promise<void> {
    const frame = await this.api.screen();
    this.token = frame.token;
    this.frameDataUrl = frame.pngDataUrl;
    this.el.projection.src = frame.pngDataUrl;
    const layout = await this.api.layout();
    // The overlay must describe the frame on display; if an event slipped in
    // between the two fetches the next refresh will repaint it.
    this.layout = layout;
    this.layoutToken = frame.token;
    this.renderOverlay();
  }

  get deviceResolution(): { w: number; h: number } {
    if (!this.layout) {
      throw new Error("no layout yet");
    }
    return { w: this.layout.deviceW, h: this.layout.deviceH };
  }

  private onDown(ev: MouseEvent): void {
    this.pressStart = { x: ev.clientX, y: ev.clientY };
  }

  private onUp(ev: MouseEvent): void {
    const start = this.pressStart;
    this.pressStart = null;
    if (!start) {
      return;
    }
    const rect = this.rectProvider();
    const up = { x: ev.clientX, y: ev.clientY };
    const startRel = projectionToRel(start.x, start.y, rect);
    if (this.el.textToggle.checked) {
      // Focus mode: the click chooses the field, typed text follows.
      this.el.textEntry.dataset.x = String(startRel.x);
      this.el.textEntry.dataset.y = String(startRel.y);
      this.el.textEntry.disabled = false;
      this.el.textEntry.focus();
      this.setStatus("type text, press Enter to send");
      return;
    }
    let event: RecorderEvent;
    if (projectionDistance(start, up) < TAP_DRAG_THRESHOLD_PX) {
      event = { kind: "tap", x: startRel.x, y: startRel.y };
    } else {
      const endRel = projectionToRel(up.x, up.y, rect);
      event = { kind: "swipe", x: startRel.x, y: startRel.y, x2: endRel.x, y2: endRel.y };
    }
    this.enqueue(() => this.submitEvent(event));
  }

  private async onTextSubmit(): Promise<void> {
    const x = Number(this.el.textEntry.dataset.x);
    const y = Number(this.el.textEntry.dataset.y);
    if (Number.isNaN(x) || Number.isNaN(y)) {
      this.setStatus("click the field first");
      return;
    }
    const text = this.el.textEntry.value;
    await this.submitEvent({ kind: "text_input", x, y, text });
    this.el.textEntry.value = "";
    this.el.textEntry.disabled = true;
    delete this.el.textEntry.dataset.x;
    delete this.el.textEntry.dataset.y;
  }

  private async submitEvent(event: RecorderEvent): Promise<void> {
    const frameUrl = this.frameDataUrl;
    try {
      const step = await this.api.sendEvent(event, this.token);
      this.steps.push(step);
      this.appendStepRow(step, frameUrl);
      this.savedId = null;
      this.setStatus(`recorded step ${step.index} (${step.op})`);
    } catch (err) {
      if (err instanceof StaleTokenError) {
        // The screen moved on under the user; show it, do not retry.
        this.setStatus("screen changed, event dropped; showing the new frame");
      } else {
        this.setStatus(`event rejected: ${(err as Error).message}`);
        return;
      }
    }
    await this.refresh();
    this.renderControls();
  }

  private async onSave(): Promise<void> {
    if (this.steps.length === 0) {
      return;
    }
    try {
      const result = await this.api.save();
      this.savedId = result.id;
      this.steps.length = 0;
      this.el.stepList.textContent = "";
      this.setStatus(`saved script ${result.id}`);
    } catch (err) {
      this.setStatus(`save failed: ${(err as Error).message}`);
    }
    this.renderControls();
  }

  private renderControls(): void {
    this.el.saveButton.disabled = this.steps.length === 0;
  }

  private renderOverlay(): void {
    this.el.overlay.textContent = "";
    if (!this.layout || this.layoutToken !== this.token) {
      return;
    }
    const rect = this.rectProvider();
    for (const box of this.layout.boxes) {
      const pos = deviceBoxToProjection(box, this.layout.deviceW, this.layout.deviceH, rect);
      const div = this.el.overlay.ownerDocument.createElement("div");
      div.className = "layout-box";
      div.style.left = `${pos.left}px`;
      div.style.top = `${pos.top}px`;
      div.style.width = `${pos.width}px`;
      div.style.height = `${pos.height}px`;
      div.title = `(${box.group},${box.line},${box.column})${box.text ? " " + box.text : ""}`;
      this.el.overlay.appendChild(div);
    }
  }

  private appendStepRow(step: StepSummary, frameUrl?: string): void {
    const doc = this.el.stepList.ownerDocument;
    const row = doc.createElement("li");
    row.className = "step-row";
    const thumb = this.makeThumbnail(step, frameUrl);
    if (thumb) {
      row.appendChild(thumb);
    }
    const label = doc.createElement("span");
    label.textContent =
      `#${step.index} ${step.op}` +
      (step.text ? ` "${step.text}"` : "") +
      (step.review ? " (review)" : "");
    row.appendChild(label);
    this.el.stepList.appendChild(row);
  }

  /** Widget-crop thumbnail from the frame the step was recorded against. */
  private makeThumbnail(step: StepSummary, frameUrl?: string): HTMLElement | null {
    if (!frameUrl || !this.layout) {
      return null;
    }
    const doc = this.el.stepList.ownerDocument;
    try {
      const canvas = doc.createElement("canvas");
      const ctx = canvas.getContext("2d");
      if (!ctx) {
        return null;
      }
      const { deviceW, deviceH } = this.layout;
      const sx = step.box.x0 * deviceW;
      const sy = step.box.y0 * deviceH;
      const sw = Math.max(1, (step.box.x1 - step.box.x0) * deviceW);
      const sh = Math.max(1, (step.box.y1 - step.box.y0) * deviceH);
      canvas.width = 48;
      canvas.height = Math.max(1, Math.round((48 * sh) / sw));
      const img = doc.createElement("img");
      img.onload = () => {
        ctx.drawImage(img, sx, sy, sw, sh, 0, 0, canvas.width, canvas.height);
      };
      img.src = frameUrl;
      canvas.className = "step-thumb";
      return canvas;
    } catch {
      return null; // no canvas backend (tests); the text row still renders
    }
  }

  private setStatus(message: string): void {
    this.el.status.textContent = message;
  }
}
