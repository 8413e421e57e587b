// Result polling: fixed 2 s interval, 60 s cap. Concurrent polls for the
// same submission id share one in-flight loop.

import type { ApiClient } from './api.js';
import type { ScanResponse } from './types.js';

export const POLL_INTERVAL_MS = 2000;
export const POLL_CAP_MS = 60_000;

export class PollTimeoutError extends Error {
  constructor(readonly id: string, capMs: number) {
    super(`scan ${id} still pending after ${Math.round(capMs / 1000)} s`);
    this.name = 'PollTimeoutError';
  }
}

export interface PollOptions {
  intervalMs?: number;
  capMs?: number;
  sleep?: (ms: number) => Promise<void>;
  now?: () => number;
  onTick?: (r: ScanResponse) => void;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

const inFlight = new Map<string, Promise<ScanResponse>>();

export function pollScan(
  client: ApiClient,
  id: string,
  options: PollOptions = {},
): Promise<ScanResponse> {
  const existing = inFlight.get(id);
  if (existing) return existing;

  const run = (async () => {
    const interval = options.intervalMs ?? POLL_INTERVAL_MS;
    const cap = options.capMs ?? POLL_CAP_MS;
    const sleep = options.sleep ?? defaultSleep;
    const now = options.now ?? Date.now;
    const start = now();
    for (;;) {
      const response = await client.getScan(id);
      options.onTick?.(response);
      if (response.status !== 'pending') {
        return response;
      }
      if (now() - start >= cap) {
        throw new PollTimeoutError(id, cap);
      }
      await sleep(interval);
    }
  })();

  inFlight.set(
    id,
    run.finally(() => inFlight.delete(id)),
  );
  return inFlight.get(id)!;
}

export function inFlightCount(): number {
  return inFlight.size;
}
