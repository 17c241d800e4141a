// Polling loop shared by the live views: fixed cadence (<= 5 s), one
// in-flight request per poller, and a stale flag that trips when the last
// attempt failed so views can show an indicator instead of silently
// freezing.

export interface PollState {
  stale: boolean;
  lastSuccess: number | null;
}

export class Poller<T> {
  readonly state: PollState = { stale: false, lastSuccess: null };
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  skippedWhileBusy = 0;

  constructor(
    private load: () => Promise<T>,
    private onData: (data: T, state: PollState) => void,
    private intervalMs = 5000,
    private now: () => number = () => Date.now(),
  ) {
    if (intervalMs > 5000) throw new Error("poll cadence must be <= 5s");
  }

  start(): void {
    if (this.timer !== null) return;
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async tick(): Promise<void> {
    if (this.inFlight) {
      this.skippedWhileBusy += 1;
      return; // dedup: never two concurrent requests per view
    }
    this.inFlight = true;
    try {
      const data = await this.load();
      this.state.stale = false;
      this.state.lastSuccess = this.now();
      this.onData(data, this.state);
    } catch {
      this.state.stale = true;
    } finally {
      this.inFlight = false;
    }
  }
}
