// Debounced threshold tuning. Contract: rapid slider movement produces at
// most one in-flight request; the newest value always wins; the resolved
// count/preview comes back through the store's delta path.

import { SessionStore } from "./state.js";

export class ThresholdTuner {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private latest: number | null = null;
  private sending = false;

  constructor(
    readonly store: SessionStore,
    readonly debounceMs = 150,
  ) {}

  slide(value: number): void {
    this.latest = value;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.debounceMs);
  }

  async flush(): Promise<void> {
    if (this.sending || this.latest === null) return;
    const value = this.latest;
    this.latest = null;
    this.sending = true;
    try {
      await this.store.send("set-threshold", { value });
    } finally {
      this.sending = false;
      if (this.latest !== null) await this.flush(); // the slider moved meanwhile
    }
  }
}
