// Inspectable trace of every request the explorer makes. The UI computes
// nothing itself, so this log accounts for every number on screen.

export interface RequestEntry {
  method: string;
  path: string;
  status: number;
  ok: boolean;
  durationMs: number;
  at: string;
}

export class RequestLog {
  private entries: RequestEntry[] = [];
  private listeners: Array<(entries: RequestEntry[]) => void> = [];

  record(entry: RequestEntry): void {
    this.entries.push(entry);
    for (const listener of this.listeners) listener(this.all());
  }

  all(): RequestEntry[] {
    return [...this.entries];
  }

  subscribe(listener: (entries: RequestEntry[]) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}
