/** Live feed client. One stream, one ordered queue, one stale timer: the
 * feed is the only asynchronous input into the UI, and every event passes
 * through the queue in arrival order. */

import type { LiveFeedEvent } from "./types.js";

/** The slice of EventSource the feed relies on, injectable for tests. */
export interface EventStream {
  onmessage: ((event: { data: string }) => void) | null;
  onerror: ((event: unknown) => void) | null;
  close(): void;
}

export type StreamFactory = (url: string) => EventStream;

export interface LiveFeedOptions {
  /** Silence longer than this marks the feed stale. */
  staleAfterMs?: number;
  now?: () => number;
}

export class LiveFeed {
  onEvent: ((event: LiveFeedEvent) => void) | null = null;
  onStale: ((stale: boolean) => void) | null = null;

  parseFailures = 0;

  private stream: EventStream | null = null;
  private queue: LiveFeedEvent[] = [];
  private lastEventAt: number | null = null;
  private stale = false;
  private readonly staleAfterMs: number;
  private readonly now: () => number;

  constructor(
    private readonly factory: StreamFactory,
    options: LiveFeedOptions = {},
  ) {
    this.staleAfterMs = options.staleAfterMs ?? 1000;
    this.now = options.now ?? (() => Date.now());
  }

  connect(url: string): void {
    this.close();
    const stream = this.factory(url);
    stream.onmessage = (event) => this.enqueue(event.data);
    stream.onerror = () => this.markStale(true);
    this.stream = stream;
    this.lastEventAt = this.now();
  }

  close(): void {
    if (this.stream) {
      this.stream.close();
      this.stream = null;
    }
  }

  /** Queue depth between drains. */
  get pending(): number {
    return this.queue.length;
  }

  get isStale(): boolean {
    return this.stale;
  }

  /** Deliver every queued event, oldest first. */
  drain(): LiveFeedEvent[] {
    if (this.queue.length === 0) {
      return [];
    }
    const batch = this.queue;
    this.queue = [];
    if (this.onEvent) {
      for (const event of batch) {
        this.onEvent(event);
      }
    }
    return batch;
  }

  /** Re-evaluate staleness; call on a timer faster than staleAfterMs. */
  tick(): void {
    if (this.lastEventAt === null) {
      return;
    }
    this.markStale(this.now() - this.lastEventAt > this.staleAfterMs);
  }

  private enqueue(data: string): void {
    let event: LiveFeedEvent;
    try {
      event = JSON.parse(data) as LiveFeedEvent;
    } catch {
      this.parseFailures += 1;
      return;
    }
    this.queue.push(event);
    this.lastEventAt = this.now();
    this.markStale(false);
  }

  private markStale(stale: boolean): void {
    if (stale === this.stale) {
      return;
    }
    this.stale = stale;
    if (this.onStale) {
      this.onStale(stale);
    }
  }
}
