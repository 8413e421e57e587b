// @vitest-environment jsdom
import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { mountSubmitPage, mountReviewPage } from '../src/app.js';
import { jsonResponse, stubFetch } from './helpers.js';

describe('submit page', () => {
  it('renders keyboard-operable controls with pinned countries', () => {
    document.body.innerHTML = '<div id="root"></div>';
    const { fetch } = stubFetch(() => jsonResponse(200, {}));
    mountSubmitPage(new ApiClient('', fetch), document.getElementById('root')!);

    const submit = document.querySelector('button[type="submit"]');
    expect(submit).toBeTruthy();
    expect(submit!.textContent).toBe('Scan');

    const country = document.querySelector<HTMLSelectElement>('#country')!;
    const options = Array.from(country.options).map((o) => o.value);
    expect(options.slice(1, 6)).toEqual(['US', 'SG', 'CA', 'GB', 'VN']);

    const checkboxes = document.querySelectorAll('input[name="symptoms"]');
    expect(checkboxes.length).toBe(4);

    // every control is a native focusable element (keyboard operable)
    for (const el of [submit, country, ...Array.from(checkboxes)]) {
      expect(['BUTTON', 'SELECT', 'INPUT']).toContain((el as HTMLElement).tagName);
    }
  });

  it('shows inline validation errors and sends nothing', async () => {
    document.body.innerHTML = '<div id="root"></div>';
    const { fetch, calls } = stubFetch(() => jsonResponse(200, {}));
    mountSubmitPage(new ApiClient('', fetch), document.getElementById('root')!);
    const form = document.getElementById('scan-form') as HTMLFormElement;
    form.dispatchEvent(new window.Event('submit', { cancelable: true }));
    await new Promise((r) => setTimeout(r, 0));
    expect(calls.length).toBe(0);
    const error = document.getElementById('age_band-error')!;
    expect(error.classList.contains('visible')).toBe(true);
    expect(error.textContent).toContain('age band');
  });
});

describe('review page', () => {
  it('prompts for a token and fires no calls without one', () => {
    document.body.innerHTML = '<div id="root"></div>';
    window.localStorage.clear();
    const { fetch, calls } = stubFetch(() => jsonResponse(200, {}));
    mountReviewPage(new ApiClient('', fetch), document.getElementById('root')!);
    expect(calls.length).toBe(0);
    const tokenForm = document.getElementById('token-form')!;
    expect(tokenForm.style.display).not.toBe('none');
    expect(document.getElementById('review-notice')!.textContent).toContain('token');
  });

  it('renders queue items with verdict buttons once unlocked', async () => {
    document.body.innerHTML = '<div id="root"></div>';
    window.localStorage.clear();
    const { fetch } = stubFetch((url) => {
      if (url.includes('/v1/review/queue')) {
        return jsonResponse(200, {
          items: [{
            record_id: 'aug-1', label: 'warts', display_name: 'Genital Warts',
            base_id: 'b', recipe_id: 'r', image_url: '/i.png', base_image_url: '/b.png',
          }],
          total: 1, page: 1, per_page: 20,
        });
      }
      return jsonResponse(200, {});
    });
    mountReviewPage(new ApiClient('', fetch), document.getElementById('root')!);
    const input = document.getElementById('review-token') as HTMLInputElement;
    input.value = 'tok';
    document.getElementById('token-form')!.dispatchEvent(
      new window.Event('submit', { cancelable: true }),
    );
    await new Promise((r) => setTimeout(r, 0));
    const buttons = Array.from(document.querySelectorAll('.review-item button'));
    expect(buttons.map((b) => b.textContent)).toEqual(['Verify', 'Reject']);
  });
});
