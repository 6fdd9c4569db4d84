// Coalesced polling: at most one refresh in flight, timer-driven with a
// manual tick for tests and for refresh-after-verdict.

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(
    private refresh: () => Promise<void>,
    public intervalMs = 2000,
  ) {}

  start(): void {
    this.stop();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
    void this.tick();
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async tick(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      await this.refresh();
    } finally {
      this.inFlight = false;
    }
  }
}
