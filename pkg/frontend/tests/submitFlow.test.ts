import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { runSubmitFlow, SubmitState } from '../src/submitFlow.js';
import { instantSleep, jsonResponse, sequenceFetch, stubFetch } from './helpers.js';

const form = {
  age_band: '18-30',
  country: 'US',
  symptoms: ['none_other'],
  last_contact: 'under1mo',
};

const file = { blob: new Blob([new Uint8Array(16)]), name: 'scan.png', size: 16, type: 'image/png' };

const classifiedBody = {
  id: 'scan-1',
  status: 'classified',
  created_at: 't',
  result: {
    final_class: 'hsv',
    display_name: 'Herpes Eruption',
    confidence: 0.93,
    initial_class: 'hsv',
    initial_confidence: 0.7,
    probs: {},
    bbox: [0, 0, 4, 4],
    saliency_url: '/v1/scans/scan-1/saliency.png',
  },
  education: {
    class: 'hsv',
    display_name: 'Herpes Eruption',
    symptoms: 'clusters of small painful vesicles',
    confirmatory_testing: 'HSV PCR of an active lesion',
    treatment: 'oral antivirals',
    links: [],
  },
};

describe('runSubmitFlow', () => {
  it('blocks submit on validation errors without any API call', async () => {
    const { fetch, calls } = stubFetch(() => jsonResponse(500, {}));
    const client = new ApiClient('', fetch);
    const state = await runSubmitFlow(client, null, {}, {});
    expect(state.kind).toBe('invalid');
    if (state.kind === 'invalid') {
      expect(state.errors.image).toBeTruthy();
      expect(state.errors.age_band).toBeTruthy();
    }
    expect(calls.length).toBe(0);
  });

  it('renders education content from a classified result', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(202, { id: 'scan-1', status: 'pending', created_at: 't' }),
      jsonResponse(200, { id: 'scan-1', status: 'pending', created_at: 't' }),
      jsonResponse(200, classifiedBody),
    ]);
    const client = new ApiClient('', fetch);
    const states: SubmitState[] = [];
    const state = await runSubmitFlow(client, file, form, {
      poll: { sleep: instantSleep },
      onState: (s) => states.push(s),
    });
    expect(state.kind).toBe('classified');
    if (state.kind === 'classified') {
      expect(state.scan.education?.class).toBe('hsv');
      expect(state.scan.result?.display_name).toBe('Herpes Eruption');
    }
    expect(states.map((s) => s.kind)).toContain('polling');
  });

  it('surfaces oversize uploads inline and never retries the request', async () => {
    const { fetch, calls } = sequenceFetch([
      jsonResponse(413, { error: 'PayloadTooLarge', message: 'upload exceeds 1 bytes' }),
    ]);
    const client = new ApiClient('', fetch, { sleep: instantSleep });
    const state = await runSubmitFlow(client, file, form, {});
    expect(state.kind).toBe('failed');
    if (state.kind === 'failed') {
      expect(state.retryable).toBe(false);
      expect(state.message).toContain('exceeds');
    }
    expect(calls.length).toBe(1); // exactly one POST, no retry
  });

  it('retries network failures with backoff before giving up', async () => {
    const { fetch, calls } = sequenceFetch([
      new TypeError('connection refused'),
      new TypeError('connection refused'),
      jsonResponse(202, { id: 'scan-2', status: 'pending', created_at: 't' }),
      jsonResponse(200, { ...classifiedBody, id: 'scan-2' }),
    ]);
    const client = new ApiClient('', fetch, { sleep: instantSleep });
    const state = await runSubmitFlow(client, file, form, { poll: { sleep: instantSleep } });
    expect(state.kind).toBe('classified');
    expect(calls.length).toBe(4); // two failed attempts + success + one poll
  });

  it('reports a retryable failure when the service keeps erroring', async () => {
    const { fetch } = sequenceFetch([
      new TypeError('down'),
      new TypeError('down'),
      new TypeError('down'),
    ]);
    const client = new ApiClient('', fetch, { sleep: instantSleep });
    const state = await runSubmitFlow(client, file, form, {});
    expect(state.kind).toBe('failed');
    if (state.kind === 'failed') expect(state.retryable).toBe(true);
  });

  it('propagates a failed classification with its error message', async () => {
    const { fetch } = sequenceFetch([
      jsonResponse(202, { id: 'scan-3', status: 'pending', created_at: 't' }),
      jsonResponse(200, { id: 'scan-3', status: 'failed', created_at: 't', error: 'bad image' }),
    ]);
    const client = new ApiClient('', fetch);
    const state = await runSubmitFlow(client, file, form, { poll: { sleep: instantSleep } });
    expect(state.kind).toBe('failed');
    if (state.kind === 'failed') expect(state.message).toBe('bad image');
  });
});
