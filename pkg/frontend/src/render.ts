/** DOM rendering for task views.
 *
 * Missing-sentence tasks show a visible gap marker between the focus slot's
 * neighbors; discordant-sentence tasks highlight the focus sentence with
 * both a color class and a glyph, so the cue survives without color vision.
 * Task payloads never contain the automatic label.
 */

import { Task } from "./api.js";

export const GAP_MARKER = "▢"; // ▢
export const FOCUS_GLYPH = "▶"; // ▶

export function renderTask(container: HTMLElement, task: Task): void {
  container.textContent = "";
  const list = container.ownerDocument.createElement("ol");
  list.className = "context";
  task.sentences.forEach((text, i) => {
    const item = container.ownerDocument.createElement("li");
    item.className = "sentence";
    if (task.mode === "dsd" && i === task.focus) {
      item.classList.add("focus-sentence");
      const glyph = container.ownerDocument.createElement("span");
      glyph.className = "focus-glyph";
      glyph.setAttribute("aria-hidden", "true");
      glyph.textContent = FOCUS_GLYPH + " ";
      item.appendChild(glyph);
      item.setAttribute("aria-label", `sentence under judgment: ${text}`);
    }
    const span = container.ownerDocument.createElement("span");
    span.textContent = text;
    item.appendChild(span);
    list.appendChild(item);
    if (task.mode === "msd" && i === task.focus) {
      const gap = container.ownerDocument.createElement("li");
      gap.className = "gap-marker";
      gap.setAttribute("role", "note");
      gap.setAttribute("aria-label", "slot under judgment");
      gap.textContent = GAP_MARKER;
      list.appendChild(gap);
    }
  });
  container.appendChild(list);
}

export function questionFor(task: Task): string {
  return task.mode === "msd"
    ? `Does the story flow break at the marked slot (${GAP_MARKER})?`
    : "Does the highlighted sentence fit the story?";
}
