/** Attention guard: submission stays disabled until the whole context has
 * been scrolled into view once. Short contexts satisfy it immediately. */

export interface Scrollable {
  scrollTop: number;
  scrollHeight: number;
  clientHeight: number;
}

export function fitsWithoutScrolling(el: Scrollable): boolean {
  return el.scrollHeight <= el.clientHeight + 1;
}

export function atBottom(el: Scrollable): boolean {
  return el.scrollTop + el.clientHeight >= el.scrollHeight - 1;
}

export class AttentionGuard {
  private seenBottom: boolean;

  constructor(private el: Scrollable) {
    this.seenBottom = fitsWithoutScrolling(el) || atBottom(el);
  }

  /** Call from the container's scroll handler. */
  check(): boolean {
    if (!this.seenBottom && atBottom(this.el)) {
      this.seenBottom = true;
    }
    return this.seenBottom;
  }

  get satisfied(): boolean {
    return this.seenBottom;
  }
}
