/**
 * Client for the recorder service HTTP API.
 *
 * Endpoints: GET /screen (PNG + X-Screenshot-Token), GET /layout, GET /steps,
 * POST /event, POST /save. Every event carries the token of the frame the
 * user actually saw; a 409 from the service means that frame is gone and the
 * event must not be silently retried.
 */

export interface ScreenFrame {
  pngDataUrl: string;
  token: string;
}

export interface LayoutBox {
  group: number;
  line: number;
  column: number;
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  text?: string;
}

export interface Layout {
  deviceW: number;
  deviceH: number;
  boxes: LayoutBox[];
}

export interface StepSummary {
  index: number;
  op: string;
  text: string;
  box: { x0: number; y0: number; x1: number; y1: number }; // relative
  review: boolean;
}

export interface RecorderEvent {
  kind: "tap" | "long_press" | "swipe" | "text_input" | "back";
  x?: number;
  y?: number;
  x2?: number;
  y2?: number;
  text?: string;
}

export interface SaveResult {
  id: string;
  path: string;
  expected: string;
}

export class StaleTokenError extends Error {}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

function parseXml(text: string): Document {
  const doc = new DOMParser().parseFromString(text, "application/xml");
  if (doc.querySelector("parsererror")) {
    throw new ApiError(`malformed XML from service: ${text.slice(0, 120)}`, 500);
  }
  return doc;
}

function stepFromElement(el: Element): StepSummary {
  return {
    index: Number(el.getAttribute("index")),
    op: el.getAttribute("op") ?? "",
    text: el.getAttribute("text") ?? "",
    box: {
      x0: Number(el.getAttribute("x0")),
      y0: Number(el.getAttribute("y0")),
      x1: Number(el.getAttribute("x1")),
      y1: Number(el.getAttribute("y1")),
    },
    review: el.getAttribute("review") === "true",
  };
}

function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export class RecorderApi {
  constructor(readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async screen(): Promise<ScreenFrame> {
    const response = await fetch(this.url("/screen"));
    if (!response.ok) {
      throw new ApiError(`GET /screen failed: ${response.status}`, response.status);
    }
    const token = response.headers.get("X-Screenshot-Token");
    if (!token) {
      throw new ApiError("service sent no screenshot token", 500);
    }
    const bytes = new Uint8Array(await response.arrayBuffer());
    return { pngDataUrl: `data:image/png;base64,${bytesToBase64(bytes)}`, token };
  }

  async layout(): Promise<Layout> {
    const response = await fetch(this.url("/layout"));
    if (!response.ok) {
      throw new ApiError(`GET /layout failed: ${response.status}`, response.status);
    }
    const doc = parseXml(await response.text());
    const root = doc.documentElement;
    const boxes: LayoutBox[] = [];
    for (const el of Array.from(root.querySelectorAll("widget"))) {
      boxes.push({
        group: Number(el.getAttribute("g")),
        line: Number(el.getAttribute("l")),
        column: Number(el.getAttribute("c")),
        x0: Number(el.getAttribute("x0")),
        y0: Number(el.getAttribute("y0")),
        x1: Number(el.getAttribute("x1")),
        y1: Number(el.getAttribute("y1")),
        text: el.getAttribute("text") ?? undefined,
      });
    }
    return {
      deviceW: Number(root.getAttribute("w")),
      deviceH: Number(root.getAttribute("h")),
      boxes,
    };
  }

  async steps(): Promise<StepSummary[]> {
    const response = await fetch(this.url("/steps"));
    if (!response.ok) {
      throw new ApiError(`GET /steps failed: ${response.status}`, response.status);
    }
    const doc = parseXml(await response.text());
    return Array.from(doc.documentElement.querySelectorAll("step")).map(stepFromElement);
  }

  /** Post one user event; the token of the displayed frame is mandatory. */
  async sendEvent(event: RecorderEvent, token: string): Promise<StepSummary> {
    if (!token) {
      throw new ApiError("refusing to send an event without a screenshot token", 0);
    }
    const attrs: string[] = [`kind="${event.kind}"`, `token="${token}"`];
    for (const key of ["x", "y", "x2", "y2"] as const) {
      const value = event[key];
      if (value !== undefined) {
        attrs.push(`${key}="${value}"`);
      }
    }
    if (event.text !== undefined) {
      attrs.push(`text="${escapeAttr(event.text)}"`);
    }
    const response = await fetch(this.url("/event"), {
      method: "POST",
      headers: { "Content-Type": "application/xml" },
      body: `<event ${attrs.join(" ")}/>`,
    });
    if (response.status === 409) {
      throw new StaleTokenError(await response.text());
    }
    if (!response.ok) {
      throw new ApiError(await response.text(), response.status);
    }
    const doc = parseXml(await response.text());
    const step = doc.querySelector("step");
    if (!step) {
      throw new ApiError("service response carried no step", 500);
    }
    return stepFromElement(step);
  }

  async save(): Promise<SaveResult> {
    const response = await fetch(this.url("/save"), {
      method: "POST",
      headers: { "Content-Type": "application/xml" },
      body: "<save/>",
    });
    if (!response.ok) {
      throw new ApiError(await response.text(), response.status);
    }
    const doc = parseXml(await response.text());
    const el = doc.documentElement;
    return {
      id: el.getAttribute("id") ?? "",
      path: el.getAttribute("path") ?? "",
      expected: el.getAttribute("expected") ?? "",
    };
  }
}

function escapeAttr(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/"/g, "&quot;");
}
