import { RecorderApi } from "./api.js";
import { RecorderView, ViewElements } from "./view.js";

function grab<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing #${id}`);
  }
  return el as T;
}

window.addEventListener("DOMContentLoaded", () => {
  const elements: ViewElements = {
    projection: grab<HTMLImageElement>("projection"),
    overlay: grab("overlay"),
    stepList: grab("steps"),
    saveButton: grab<HTMLButtonElement>("save"),
    backButton: grab<HTMLButtonElement>("back"),
    textToggle: grab<HTMLInputElement>("text-mode"),
    textEntry: grab<HTMLInputElement>("text-entry"),
    status: grab("status"),
  };
  const view = new RecorderView(new RecorderApi(""), elements);
  view.start().catch((err) => {
    elements.status.textContent = `failed to reach the recorder service: ${err}`;
  });
});
