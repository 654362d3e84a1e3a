/** Verdict submission with offline retry.
 *
 * Every verdict gets one idempotency key for its whole lifetime, so a retry
 * after a dropped response can never create a second journal entry. Network
 * failures requeue the verdict; HTTP 409 (already judged) counts as success
 * so duplicate tabs advance silently. One in-flight submission at a time.
 */

import { ApiError, SubmitAck } from "./api.js";

export interface Verdict {
  candidateId: string;
  label: 0 | 1;
  idempotencyKey: string;
}

export type SubmitOutcome = "accepted" | "duplicate";

type SubmitFn = (v: Verdict) => Promise<SubmitAck>;

export function newIdempotencyKey(): string {
  const rnd =
    globalThis.crypto && "randomUUID" in globalThis.crypto
      ? globalThis.crypto.randomUUID()
      : Math.random().toString(36).slice(2);
  return `v-${Date.now()}-${rnd}`;
}

export class RetryQueue {
  private chain: Promise<unknown> = Promise.resolve();
  private pendingCount = 0;
  onRetry: ((attempt: number) => void) | null = null;

  constructor(
    private submitFn: SubmitFn,
    private retryDelayMs = 2000,
    private maxAttempts = 50,
  ) {}

  pending(): number {
    return this.pendingCount;
  }

  /** Resolves when the verdict is durably acknowledged (or known-duplicate). */
  push(verdict: Verdict): Promise<SubmitOutcome> {
    this.pendingCount += 1;
    const run = this.chain.then(() => this.deliver(verdict));
    this.chain = run.catch(() => undefined);
    return run.finally(() => {
      this.pendingCount -= 1;
    }) as Promise<SubmitOutcome>;
  }

  private async deliver(verdict: Verdict): Promise<SubmitOutcome> {
    for (let attempt = 1; ; attempt++) {
      try {
        await this.submitFn(verdict);
        return "accepted";
      } catch (err) {
        if (err instanceof ApiError) {
          if (err.status === 409) {
            return "duplicate"; // someone (or a lost ack) already recorded it
          }
          throw err; // real protocol error: surface it
        }
        if (attempt >= this.maxAttempts) {
          throw err;
        }
        this.onRetry?.(attempt);
        await new Promise((r) => setTimeout(r, this.retryDelayMs));
      }
    }
  }
}
