// Typed client for the triage service. Network failures (fetch rejections)
// are retried with exponential backoff; HTTP error responses are never
// retried -- a 413 or 400 will not change on resend.

import type {
  Questionnaire,
  ReviewQueueResponse,
  ScanResponse,
  SubmitResponse,
  VerdictResponse,
  EducationEntry,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'NetworkError';
  }
}

export interface RetryOptions {
  attempts?: number;
  baseDelayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

async function parseError(response: Response): Promise<ApiError> {
  let code = `HTTP${response.status}`;
  let message = response.statusText;
  let field: string | undefined;
  try {
    const body = (await response.json()) as {
      error?: string;
      message?: string;
      field?: string;
    };
    if (body.error) code = body.error;
    if (body.message) message = body.message;
    field = body.field;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, code, message, field);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private readonly retry: RetryOptions = {},
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const attempts = this.retry.attempts ?? 3;
    const baseDelay = this.retry.baseDelayMs ?? 500;
    const sleep = this.retry.sleep ?? defaultSleep;
    let lastError: unknown;
    for (let attempt = 0; attempt < attempts; attempt++) {
      try {
        return await this.fetchImpl(this.baseUrl + path, init);
      } catch (err) {
        lastError = err;
        if (attempt < attempts - 1) {
          await sleep(baseDelay * 2 ** attempt);
        }
      }
    }
    throw new NetworkError(String(lastError));
  }

  private async json<T>(response: Response): Promise<T> {
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  async submitScan(image: Blob, filename: string, q: Questionnaire): Promise<SubmitResponse> {
    const form = new FormData();
    form.append('image', image, filename);
    form.append('questionnaire', JSON.stringify(q));
    const response = await this.request('/v1/scans', { method: 'POST', body: form });
    return this.json<SubmitResponse>(response);
  }

  async getScan(id: string): Promise<ScanResponse> {
    const response = await this.request(`/v1/scans/${encodeURIComponent(id)}`);
    return this.json<ScanResponse>(response);
  }

  async education(classToken: string): Promise<EducationEntry> {
    const response = await this.request(`/v1/education/${encodeURIComponent(classToken)}`);
    return this.json<EducationEntry>(response);
  }

  private auth(token: string): Record<string, string> {
    return { Authorization: `Bearer ${token}` };
  }

  async reviewQueue(token: string, page = 1, perPage = 20): Promise<ReviewQueueResponse> {
    const response = await this.request(
      `/v1/review/queue?page=${page}&per_page=${perPage}`,
      { headers: this.auth(token) },
    );
    return this.json<ReviewQueueResponse>(response);
  }

  async postVerdict(
    token: string,
    recordId: string,
    verdict: 'verified' | 'rejected',
    reviewer: string,
    note = '',
  ): Promise<VerdictResponse> {
    const response = await this.request(`/v1/review/${encodeURIComponent(recordId)}`, {
      method: 'POST',
      headers: { ...this.auth(token), 'Content-Type': 'application/json' },
      body: JSON.stringify({ verdict, reviewer, note }),
    });
    return this.json<VerdictResponse>(response);
  }
}
