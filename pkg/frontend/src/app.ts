/** Screen flow: login -> screening -> one-candidate-at-a-time judging ->
 * done, plus an admin view (progress, run filter, export download).
 *
 * The staged verdict can be undone until it is submitted; each submission
 * maps to exactly one journal entry server-side (retries reuse the
 * idempotency key). The only state that survives a reload is the worker
 * token; everything else is refetched.
 */

import { ApiClient, ApiError, NextTaskResponse, Task } from "./api.js";
import { AttentionGuard } from "./guard.js";
import { installKeyboard, KeyAction } from "./keyboard.js";
import { newIdempotencyKey, RetryQueue } from "./queue.js";
import { questionFor, renderTask } from "./render.js";

const TOKEN_KEY = "incoforge.token";

export interface TokenStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export interface AppOptions {
  storage?: TokenStore;
  retryDelayMs?: number;
}

export class App {
  readonly queue: RetryQueue;
  private storage: TokenStore;
  private doc: Document;
  private currentTask: Task | null = null;
  private staged: 0 | 1 | null = null;
  private inFlight = false;
  private guard: AttentionGuard | null = null;
  private submittedCount = 0;
  private removeKeyboard: (() => void) | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    opts: AppOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.storage = opts.storage ?? window.localStorage;
    this.queue = new RetryQueue(
      (v) => this.api.submitJudgment(v.candidateId, v.label, v.idempotencyKey),
      opts.retryDelayMs ?? 2000,
    );
    this.queue.onRetry = () => this.setNetworkBanner("Connection lost - retrying...");
  }

  async start(): Promise<void> {
    if (!this.removeKeyboard) {
      this.removeKeyboard = installKeyboard(this.doc, (a) => this.onKey(a));
    }
    const token = this.storage.getItem(TOKEN_KEY);
    if (token) {
      this.api.setToken(token);
      await this.loadNext();
    } else {
      this.showLogin();
    }
  }

  stop(): void {
    this.removeKeyboard?.();
    this.removeKeyboard = null;
  }

  // -- screens ---------------------------------------------------------------

  private el(tag: string, className = "", text = ""): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
  }

  private clear(): HTMLElement {
    this.root.textContent = "";
    const main = this.el("div", "screen");
    this.root.appendChild(main);
    return main;
  }

  private showLogin(message = ""): void {
    const main = this.clear();
    main.appendChild(this.el("h1", "", "Coherence judging"));
    if (message) main.appendChild(this.el("p", "error", message));
    const input = this.doc.createElement("input");
    input.id = "token-input";
    input.type = "password";
    input.placeholder = "worker token";
    input.setAttribute("aria-label", "worker token");
    main.appendChild(input);
    const button = this.el("button", "primary", "Start judging") as HTMLButtonElement;
    button.id = "login-button";
    button.onclick = () => {
      if (input.value.trim()) {
        this.storage.setItem(TOKEN_KEY, input.value.trim());
        void this.start();
      }
    };
    main.appendChild(button);
    const admin = this.el("button", "linkish", "Admin view") as HTMLButtonElement;
    admin.id = "admin-link";
    admin.onclick = () => this.showAdmin();
    main.appendChild(admin);
  }

  private async loadNext(): Promise<void> {
    let resp: NextTaskResponse;
    try {
      resp = await this.api.nextTask();
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.storage.removeItem(TOKEN_KEY); // expired/revoked: back to login
        this.showLogin("That token was not accepted. Enter a valid one.");
        return;
      }
      throw err;
    }
    this.currentTask = resp.task;
    this.staged = null;
    this.inFlight = false;
    if (!resp.task) {
      this.showStatus(resp);
      return;
    }
    this.showTask(resp);
  }

  private statusLine(resp: NextTaskResponse): string {
    const s = resp.screening;
    if (!s || s.total === 0) return "";
    const state =
      s.passed === null ? "in progress" : s.passed ? "passed" : "failed";
    return `Screening ${state}: ${s.correct}/${s.answered} correct of ${s.total} probes.`;
  }

  private showStatus(resp: NextTaskResponse): void {
    const main = this.clear();
    const titles: Record<string, string> = {
      screening_failed: "Screening not passed",
      awaiting_filter: "Waiting for the agreement filter",
      closed: "This queue is closed",
      verification: "All done - thank you!",
      baseline: "All done - thank you!",
    };
    main.appendChild(this.el("h1", "", titles[resp.phase] ?? "Nothing to judge"));
    const line = this.statusLine(resp);
    if (line) main.appendChild(this.el("p", "screening-status", line));
    main.appendChild(
      this.el("p", "session-count", `Verdicts submitted this session: ${this.submittedCount}`),
    );
    const logout = this.el("button", "linkish", "Log out") as HTMLButtonElement;
    logout.id = "logout-button";
    logout.onclick = () => {
      this.storage.removeItem(TOKEN_KEY);
      this.showLogin();
    };
    main.appendChild(logout);
  }

  private showTask(resp: NextTaskResponse): void {
    const task = resp.task as Task;
    const main = this.clear();

    const banner = this.el("div", "banner");
    banner.id = "mode-banner";
    const modeName = task.mode === "msd" ? "Missing sentence" : "Discordant sentence";
    banner.textContent = `${modeName} - ${resp.phase}`;
    main.appendChild(banner);
    const line = this.statusLine(resp);
    if (line) main.appendChild(this.el("p", "screening-status", line));

    const context = this.el("div", "context-box");
    context.id = "context";
    renderTask(context, task);
    main.appendChild(context);
    this.guard = new AttentionGuard(context);
    context.addEventListener("scroll", () => {
      this.guard?.check();
      this.refreshControls();
    });

    main.appendChild(this.el("p", "question", questionFor(task)));

    const verdicts = this.el("div", "verdict-row");
    const incoherent = this.el("button", "verdict", "Incoherent (1)") as HTMLButtonElement;
    incoherent.id = "btn-incoherent";
    incoherent.onclick = () => this.stage(1);
    const coherent = this.el("button", "verdict", "Coherent (2)") as HTMLButtonElement;
    coherent.id = "btn-coherent";
    coherent.onclick = () => this.stage(0);
    verdicts.appendChild(incoherent);
    verdicts.appendChild(coherent);
    main.appendChild(verdicts);

    const staged = this.el("p", "staged");
    staged.id = "staged-verdict";
    staged.textContent = "Pick a verdict (1 or 2).";
    main.appendChild(staged);

    const actions = this.el("div", "action-row");
    const submit = this.el("button", "primary", "Submit (Enter)") as HTMLButtonElement;
    submit.id = "btn-submit";
    submit.onclick = () => void this.submitStaged();
    const undo = this.el("button", "", "Undo (U)") as HTMLButtonElement;
    undo.id = "btn-undo";
    undo.onclick = () => this.undo();
    actions.appendChild(submit);
    actions.appendChild(undo);
    main.appendChild(actions);

    const network = this.el("p", "network-banner");
    network.id = "network-banner";
    main.appendChild(network);

    main.appendChild(
      this.el("p", "session-count", `Submitted this session: ${this.submittedCount}`),
    );
    this.refreshControls();
  }

  private setNetworkBanner(text: string): void {
    const banner = this.doc.getElementById("network-banner");
    if (banner) banner.textContent = text;
  }

  private refreshControls(): void {
    const submit = this.doc.getElementById("btn-submit") as HTMLButtonElement | null;
    const undo = this.doc.getElementById("btn-undo") as HTMLButtonElement | null;
    const staged = this.doc.getElementById("staged-verdict");
    const incoherent = this.doc.getElementById("btn-incoherent");
    const coherent = this.doc.getElementById("btn-coherent");
    if (!submit || !undo || !staged) return;
    const guardOk = this.guard?.satisfied ?? true;
    submit.disabled = this.staged === null || !guardOk || this.inFlight;
    undo.disabled = this.staged === null || this.inFlight;
    incoherent?.setAttribute("aria-pressed", String(this.staged === 1));
    coherent?.setAttribute("aria-pressed", String(this.staged === 0));
    if (this.staged === null) {
      staged.textContent = guardOk
        ? "Pick a verdict (1 or 2)."
        : "Read the whole context (scroll to the end), then pick a verdict.";
    } else {
      const name = this.staged === 1 ? "Incoherent" : "Coherent";
      staged.textContent = `Staged: ${name}. Submit (Enter) or undo (U).`;
    }
  }

  // -- actions ---------------------------------------------------------------

  private onKey(action: KeyAction): void {
    if (!this.currentTask) return;
    if (action === "incoherent") this.stage(1);
    else if (action === "coherent") this.stage(0);
    else if (action === "undo") this.undo();
    else if (action === "submit") void this.submitStaged();
  }

  stage(label: 0 | 1): void {
    if (!this.currentTask || this.inFlight) return;
    this.staged = label;
    this.refreshControls();
  }

  undo(): void {
    if (this.inFlight) return;
    this.staged = null;
    this.refreshControls();
  }

  async submitStaged(): Promise<void> {
    if (
      this.currentTask === null ||
      this.staged === null ||
      this.inFlight ||
      !(this.guard?.satisfied ?? true)
    ) {
      return;
    }
    this.inFlight = true;
    this.refreshControls();
    const verdict = {
      candidateId: this.currentTask.candidate_id,
      label: this.staged,
      idempotencyKey: newIdempotencyKey(),
    };
    try {
      await this.queue.push(verdict); // "duplicate" also advances silently
      this.submittedCount += 1;
      this.setNetworkBanner("");
      await this.loadNext();
    } catch (err) {
      this.inFlight = false;
      this.setNetworkBanner(`Submission failed: ${(err as Error).message}`);
      this.refreshControls();
    }
  }

  // -- admin -----------------------------------------------------------------

  private showAdmin(): void {
    const main = this.clear();
    main.appendChild(this.el("h1", "", "Admin"));
    const input = this.doc.createElement("input");
    input.id = "admin-token-input";
    input.type = "password";
    input.placeholder = "admin token";
    input.setAttribute("aria-label", "admin token");
    main.appendChild(input);

    const table = this.el("div", "progress-table");
    table.id = "progress-table";
    const result = this.el("p", "admin-result");
    result.id = "admin-result";

    const load = this.el("button", "primary", "Load progress") as HTMLButtonElement;
    load.id = "btn-progress";
    load.onclick = async () => {
      try {
        const p = await this.api.progress(input.value.trim());
        table.textContent = "";
        for (const [key, value] of Object.entries(p)) {
          const row = this.el("div", "progress-row");
          row.appendChild(this.el("span", "k", key));
          row.appendChild(this.el("span", "v", String(value)));
          table.appendChild(row);
        }
      } catch (err) {
        result.textContent = `Progress failed: ${(err as Error).message}`;
      }
    };
    main.appendChild(load);

    const filter = this.el("button", "", "Run agreement filter") as HTMLButtonElement;
    filter.id = "btn-filter";
    filter.onclick = async () => {
      try {
        const r = await this.api.runFilter(input.value.trim());
        result.textContent = `Filter kept ${r.kept_count} candidates.`;
      } catch (err) {
        result.textContent = `Filter failed: ${(err as Error).message}`;
      }
    };
    main.appendChild(filter);

    const exportBtn = this.el("button", "", "Download kept set") as HTMLButtonElement;
    exportBtn.id = "btn-export";
    exportBtn.onclick = async () => {
      try {
        const text = await this.api.exportKept(input.value.trim());
        const blob = new Blob([text], { type: "application/x-ndjson" });
        const a = this.doc.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = "kept.jsonl";
        a.click();
        result.textContent = `Export ready (${text.split("\n").filter(Boolean).length} rows).`;
      } catch (err) {
        result.textContent = `Export failed: ${(err as Error).message}`;
      }
    };
    main.appendChild(exportBtn);

    main.appendChild(table);
    main.appendChild(result);

    const back = this.el("button", "linkish", "Back") as HTMLButtonElement;
    back.id = "btn-back";
    back.onclick = () => void this.start();
    main.appendChild(back);
  }
}
