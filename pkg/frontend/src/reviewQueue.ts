// Review queue controller: paginated listing of unverified augmented
// records, verdict posting with optimistic removal, rollback on failure,
// and conflict handling. No API call is ever fired without a token.

import { ApiClient, ApiError, NetworkError } from './api.js';
import type { ReviewItem } from './types.js';

export interface QueueNotice {
  level: 'info' | 'error';
  message: string;
}

export interface QueueState {
  needsToken: boolean;
  loading: boolean;
  items: ReviewItem[];
  total: number;
  page: number;
  perPage: number;
  notice: QueueNotice | null;
}

export class ReviewQueueController {
  private state: QueueState = {
    needsToken: true,
    loading: false,
    items: [],
    total: 0,
    page: 1,
    perPage: 20,
    notice: null,
  };

  constructor(
    private readonly client: ApiClient,
    private token: string | null,
    private readonly reviewer: string,
    private readonly onChange: (state: QueueState) => void = () => {},
  ) {
    this.state.needsToken = !token;
  }

  snapshot(): QueueState {
    return { ...this.state, items: [...this.state.items] };
  }

  private emit(patch: Partial<QueueState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.snapshot());
  }

  setToken(token: string): void {
    this.token = token || null;
    this.emit({ needsToken: !this.token, notice: null });
  }

  async load(page = this.state.page): Promise<void> {
    if (!this.token) {
      this.emit({ needsToken: true });
      return;
    }
    this.emit({ loading: true, notice: null });
    try {
      const response = await this.client.reviewQueue(this.token, page, this.state.perPage);
      this.emit({
        loading: false,
        needsToken: false,
        items: response.items,
        total: response.total,
        page: response.page,
        perPage: response.per_page,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.emit({ loading: false, needsToken: true, items: [], total: 0 });
        return;
      }
      const message = err instanceof NetworkError
        ? 'Network problem loading the queue.'
        : String((err as Error).message ?? err);
      this.emit({ loading: false, notice: { level: 'error', message } });
    }
  }

  async verdict(recordId: string, verdict: 'verified' | 'rejected'): Promise<void> {
    if (!this.token) {
      this.emit({ needsToken: true });
      return;
    }
    const index = this.state.items.findIndex((i) => i.record_id === recordId);
    if (index < 0) return;
    const removed = this.state.items[index];
    // optimistic removal
    const optimistic = this.state.items.filter((i) => i.record_id !== recordId);
    this.emit({ items: optimistic, total: Math.max(0, this.state.total - 1) });
    try {
      await this.client.postVerdict(this.token, recordId, verdict, this.reviewer);
      this.emit({
        notice: { level: 'info', message: `${recordId} ${verdict}.` },
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // already reviewed elsewhere: keep it removed, tell the reviewer
        this.emit({
          notice: {
            level: 'info',
            message: `${recordId} was already reviewed elsewhere; removed from the queue.`,
          },
        });
        return;
      }
      if (err instanceof ApiError && err.status === 401) {
        const items = [...this.state.items];
        items.splice(index, 0, removed);
        this.emit({ items, total: this.state.total + 1, needsToken: true });
        return;
      }
      // rollback on any other failure
      const items = [...this.state.items];
      items.splice(index, 0, removed);
      const message = err instanceof NetworkError
        ? 'Network problem posting the verdict; item restored.'
        : `Verdict failed: ${(err as Error).message}; item restored.`;
      this.emit({ items, total: this.state.total + 1, notice: { level: 'error', message } });
    }
  }
}
