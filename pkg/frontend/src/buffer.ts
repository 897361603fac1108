/** Time-windowed sample buffer backing one strip chart. */

export class RollingBuffer {
  readonly times: number[] = [];
  readonly values: number[] = [];

  constructor(readonly windowS = 10) {
    if (!(windowS > 0)) {
      throw new Error(`window must be positive, got ${windowS}`);
    }
  }

  push(t: number, value: number): void {
    this.times.push(t);
    this.values.push(value);
    // Evict from the head on every push, so the buffer can never span
    // more than [t - windowS, t] no matter how long the feed runs.
    const cutoff = t - this.windowS;
    while (this.times.length > 0 && this.times[0] < cutoff) {
      this.times.shift();
      this.values.shift();
    }
  }

  get length(): number {
    return this.times.length;
  }

  get spanS(): number {
    if (this.times.length < 2) {
      return 0;
    }
    return this.times[this.times.length - 1] - this.times[0];
  }

  latest(): { t: number; value: number } | null {
    const n = this.times.length;
    if (n === 0) {
      return null;
    }
    return { t: this.times[n - 1], value: this.values[n - 1] };
  }

  clear(): void {
    this.times.length = 0;
    this.values.length = 0;
  }
}
