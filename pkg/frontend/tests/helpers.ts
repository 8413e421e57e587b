// Fetch stubs for unit tests.

import type { FetchLike } from '../src/api.js';

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

export function stubFetch(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>,
): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const impl: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { fetch: impl, calls };
}

export function sequenceFetch(
  responses: (Response | (() => Response) | Error)[],
): { fetch: FetchLike; calls: RecordedCall[] } {
  let i = 0;
  return stubFetch(() => {
    const next = responses[Math.min(i, responses.length - 1)];
    i += 1;
    if (next instanceof Error) throw next;
    return typeof next === 'function' ? next() : next;
  });
}

export const instantSleep = async (_ms: number): Promise<void> => {};
