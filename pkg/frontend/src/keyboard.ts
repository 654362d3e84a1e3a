/** Keyboard shortcuts: 1 = Incoherent, 2 = Coherent, Enter = submit the
 * staged verdict, U or Escape = undo before submitting. */

export type KeyAction = "incoherent" | "coherent" | "submit" | "undo";

export function actionForKey(key: string): KeyAction | null {
  switch (key) {
    case "1":
      return "incoherent";
    case "2":
      return "coherent";
    case "Enter":
      return "submit";
    case "u":
    case "U":
    case "Escape":
      return "undo";
    default:
      return null;
  }
}

/** Install a document-level handler; returns the uninstaller. Keys typed
 * into inputs (the login fields) are left alone. */
export function installKeyboard(
  doc: Document,
  handler: (action: KeyAction) => void,
): () => void {
  const listener = (ev: KeyboardEvent) => {
    const target = ev.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    const action = actionForKey(ev.key);
    if (action) {
      ev.preventDefault();
      handler(action);
    }
  };
  doc.addEventListener("keydown", listener);
  return () => doc.removeEventListener("keydown", listener);
}
