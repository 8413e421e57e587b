import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { ReviewQueueController, QueueState } from '../src/reviewQueue.js';
import { jsonResponse, sequenceFetch, stubFetch } from './helpers.js';
import type { ReviewItem } from '../src/types.js';

function item(id: string): ReviewItem {
  return {
    record_id: id,
    label: 'warts',
    display_name: 'Genital Warts',
    base_id: 'base-0',
    recipe_id: `r-${id}`,
    image_url: `/v1/review/${id}/image.png`,
    base_image_url: `/v1/review/${id}/base.png`,
  };
}

const queueBody = (ids: string[]) => ({
  items: ids.map(item),
  total: ids.length,
  page: 1,
  per_page: 20,
});

function controllerWith(fetch: any, token: string | null = 'tok') {
  const states: QueueState[] = [];
  const controller = new ReviewQueueController(
    new ApiClient('', fetch), token, 'tester', (s) => states.push(s),
  );
  return { controller, states };
}

describe('ReviewQueueController', () => {
  it('fires no API calls without a token and prompts instead', async () => {
    const { fetch, calls } = stubFetch(() => jsonResponse(200, queueBody([])));
    const { controller } = controllerWith(fetch, null);
    await controller.load();
    await controller.verdict('aug-1', 'verified');
    expect(calls.length).toBe(0);
    expect(controller.snapshot().needsToken).toBe(true);
  });

  it('loads the queue and exposes items', async () => {
    const { fetch } = sequenceFetch([jsonResponse(200, queueBody(['a', 'b', 'c']))]);
    const { controller } = controllerWith(fetch);
    await controller.load();
    const state = controller.snapshot();
    expect(state.items.map((i) => i.record_id)).toEqual(['a', 'b', 'c']);
    expect(state.total).toBe(3);
  });

  it('renders the token prompt on a 401', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(401, { error: 'Unauthorized', message: 'bad token' }),
    ]);
    const { controller } = controllerWith(fetch, 'wrong');
    await controller.load();
    expect(controller.snapshot().needsToken).toBe(true);
  });

  it('optimistically removes an item and keeps it removed on success', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(200, queueBody(['a', 'b'])),
      jsonResponse(200, { record: {}, training_eligible: true }),
    ]);
    const { controller, states } = controllerWith(fetch);
    await controller.load();
    const verdictDone = controller.verdict('a', 'verified');
    // optimistic removal is visible before the POST resolves
    const optimistic = states[states.length - 1];
    expect(optimistic.items.map((i) => i.record_id)).toEqual(['b']);
    await verdictDone;
    expect(controller.snapshot().items.map((i) => i.record_id)).toEqual(['b']);
    expect(controller.snapshot().total).toBe(1);
  });

  it('rolls back the removal when the verdict fails', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(200, queueBody(['a', 'b'])),
      jsonResponse(500, { error: 'Internal', message: 'store unavailable' }),
    ]);
    const { controller } = controllerWith(fetch);
    await controller.load();
    await controller.verdict('a', 'verified');
    const state = controller.snapshot();
    expect(state.items.map((i) => i.record_id)).toEqual(['a', 'b']);
    expect(state.notice?.level).toBe('error');
    expect(state.notice?.message).toContain('restored');
  });

  it('keeps a conflicted item removed with a notice', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(200, queueBody(['a', 'b'])),
      jsonResponse(409, { error: 'AlreadyReviewed', message: 'already reviewed' }),
    ]);
    const { controller } = controllerWith(fetch);
    await controller.load();
    await controller.verdict('a', 'verified');
    const state = controller.snapshot();
    expect(state.items.map((i) => i.record_id)).toEqual(['b']);
    expect(state.notice?.message).toContain('already reviewed elsewhere');
  });

  it('restores the item and prompts for a token on a 401 verdict', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(200, queueBody(['a'])),
      jsonResponse(401, { error: 'Unauthorized', message: 'expired' }),
    ]);
    const { controller } = controllerWith(fetch);
    await controller.load();
    await controller.verdict('a', 'rejected');
    const state = controller.snapshot();
    expect(state.items.map((i) => i.record_id)).toEqual(['a']);
    expect(state.needsToken).toBe(true);
  });

  it('empties a three-item queue through three verdicts', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(200, queueBody(['a', 'b', 'c'])),
      jsonResponse(200, { record: {}, training_eligible: true }),
      jsonResponse(200, { record: {}, training_eligible: true }),
      jsonResponse(200, { record: {}, training_eligible: true }),
    ]);
    const { controller } = controllerWith(fetch);
    await controller.load();
    for (const id of ['a', 'b', 'c']) {
      await controller.verdict(id, 'verified');
    }
    expect(controller.snapshot().items).toEqual([]);
    expect(controller.snapshot().total).toBe(0);
  });
});
