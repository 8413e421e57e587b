// Page wiring for the submit and review views. All state shown in the UI
// derives from API responses; refreshing the page and re-fetching yields the
// same view.

import { ApiClient } from './api.js';
import { countryOptions } from './countries.js';
import { clear, el, fieldError } from './dom.js';
import { ReviewQueueController } from './reviewQueue.js';
import { runSubmitFlow, SubmitState } from './submitFlow.js';
import { AGE_BANDS, LAST_CONTACT, SYMPTOMS } from './validation.js';
import type { ScanResponse } from './types.js';

const SYMPTOM_LABELS: Record<string, string> = {
  penile_pain: 'Penile pain',
  penile_discharge: 'Penile discharge',
  pain_burning_urination: 'Pain/burning when urinating',
  none_other: 'None of the above / other',
};

const AGE_LABELS: Record<string, string> = {
  '18-30': '18-30',
  '31-50': '31-50',
  over50: 'Over 50',
};

const CONTACT_LABELS: Record<string, string> = {
  under1mo: 'Less than 1 month ago',
  '1to3mo': '1-3 months ago',
  over3mo: 'More than 3 months ago',
  never: 'Never had sex',
};

function renderResult(container: HTMLElement, scan: ScanResponse): void {
  clear(container);
  const result = scan.result!;
  const education = scan.education!;
  container.append(
    el('h2', {}, [`Result: ${result.display_name}`]),
    el('p', {}, [`Confidence: ${(result.confidence * 100).toFixed(1)}%`]),
    el('img', {
      src: result.saliency_url,
      alt: `Saliency overlay highlighting the region driving the ${result.display_name} call`,
      class: 'saliency',
    }),
    el('section', { class: 'education' }, [
      el('h3', {}, ['What this can mean']),
      el('p', {}, [education.symptoms]),
      el('h3', {}, ['Confirmatory testing']),
      el('p', {}, [education.confirmatory_testing]),
      el('h3', {}, ['Treatment']),
      el('p', {}, [education.treatment]),
      el('ul', {}, education.links.map((href) =>
        el('li', {}, [el('a', { href, target: '_blank', rel: 'noopener' }, [href])]),
      )),
    ]),
  );
}

function renderSubmitState(container: HTMLElement, state: SubmitState): void {
  const status = document.getElementById('submit-status')!;
  if (state.kind === 'invalid') {
    status.textContent = 'Please fix the highlighted fields.';
    for (const field of ['image', 'age_band', 'country', 'symptoms', 'last_contact']) {
      fieldError(field, state.errors[field] ?? null);
    }
    return;
  }
  for (const field of ['image', 'age_band', 'country', 'symptoms', 'last_contact']) {
    fieldError(field, null);
  }
  if (state.kind === 'submitting') {
    status.textContent = 'Uploading…';
  } else if (state.kind === 'polling') {
    status.textContent = `Analyzing (${state.lastStatus})…`;
  } else if (state.kind === 'classified') {
    status.textContent = '';
    renderResult(container, state.scan);
  } else {
    status.textContent = state.message;
  }
}

export function mountSubmitPage(client: ApiClient, root: HTMLElement): void {
  const form = el('form', { id: 'scan-form', novalidate: 'novalidate' });
  const resultPane = el('div', { id: 'result-pane', 'aria-live': 'polite' });

  const fileInput = el('input', {
    type: 'file', id: 'image', name: 'image', accept: 'image/*',
  });
  const ageSelect = el('select', { id: 'age_band', name: 'age_band' },
    [el('option', { value: '' }, ['Select…']),
     ...AGE_BANDS.map((b) => el('option', { value: b }, [AGE_LABELS[b]]))]);
  const countrySelect = el('select', { id: 'country', name: 'country' },
    [el('option', { value: '' }, ['Select…']),
     ...countryOptions().map((c) => el('option', { value: c.code }, [c.name]))]);
  const contactSelect = el('select', { id: 'last_contact', name: 'last_contact' },
    [el('option', { value: '' }, ['Select…']),
     ...LAST_CONTACT.map((c) => el('option', { value: c }, [CONTACT_LABELS[c]]))]);

  const symptomBoxes = SYMPTOMS.map((s) =>
    el('label', { class: 'checkbox' }, [
      el('input', { type: 'checkbox', name: 'symptoms', value: s }),
      ` ${SYMPTOM_LABELS[s]}`,
    ]));

  const labeled = (id: string, text: string, control: HTMLElement) =>
    el('div', { class: 'field' }, [
      el('label', { for: id }, [text]),
      control,
      el('span', { id: `${id}-error`, class: 'error', role: 'alert' }),
    ]);

  form.append(
    labeled('image', 'Image to scan', fileInput),
    labeled('age_band', 'Age', ageSelect),
    labeled('country', 'Country', countrySelect),
    el('fieldset', { class: 'field' }, [
      el('legend', {}, ['Symptoms (select all that apply)']),
      ...symptomBoxes,
      el('span', { id: 'symptoms-error', class: 'error', role: 'alert' }),
    ]),
    labeled('last_contact', 'Last sexual contact', contactSelect),
    el('button', { type: 'submit' }, ['Scan']),
    el('p', { id: 'submit-status', role: 'status' }),
  );

  form.addEventListener('submit', async (event) => {
    event.preventDefault();
    const file = fileInput.files?.[0] ?? null;
    const symptoms = Array.from(
      form.querySelectorAll<HTMLInputElement>('input[name="symptoms"]:checked'),
    ).map((i) => i.value);
    await runSubmitFlow(
      client,
      file ? { blob: file, name: file.name, size: file.size, type: file.type } : null,
      {
        age_band: ageSelect.value || undefined,
        country: countrySelect.value || undefined,
        symptoms,
        last_contact: contactSelect.value || undefined,
      },
      { onState: (state) => renderSubmitState(resultPane, state) },
    );
  });

  root.append(el('h1', {}, ['Scan a photo']), form, resultPane);
}

export function mountReviewPage(client: ApiClient, root: HTMLElement): void {
  const list = el('ul', { id: 'review-list', class: 'review-list' });
  const notice = el('p', { id: 'review-notice', role: 'status' });
  const tokenInput = el('input', { type: 'password', id: 'review-token' });
  const tokenForm = el('form', { id: 'token-form' }, [
    el('label', { for: 'review-token' }, ['Reviewer token']),
    tokenInput,
    el('button', { type: 'submit' }, ['Unlock queue']),
  ]);

  const controller = new ReviewQueueController(
    client,
    window.localStorage.getItem('lt-review-token'),
    'webui-reviewer',
    (state) => {
      tokenForm.style.display = state.needsToken ? '' : 'none';
      notice.textContent = state.notice?.message
        ?? (state.loading ? 'Loading…'
          : state.needsToken ? 'Enter the reviewer token to load the queue.'
          : `${state.total} item(s) awaiting review.`);
      clear(list);
      for (const item of state.items) {
        const li = el('li', { class: 'review-item' }, [
          el('h3', {}, [`${item.record_id} — ${item.display_name}`]),
          el('img', { src: item.image_url, alt: `Composited image ${item.record_id}` }),
          el('img', { src: item.base_image_url, alt: `Base image for ${item.record_id}` }),
          el('p', { class: 'recipe' }, [
            `base ${item.base_id ?? '?'} · recipe ${item.recipe_id ?? '?'}`,
          ]),
        ]);
        const verify = el('button', { type: 'button' }, ['Verify']);
        verify.addEventListener('click', () => controller.verdict(item.record_id, 'verified'));
        const reject = el('button', { type: 'button' }, ['Reject']);
        reject.addEventListener('click', () => controller.verdict(item.record_id, 'rejected'));
        li.append(verify, reject);
        list.append(li);
      }
    },
  );

  tokenForm.addEventListener('submit', (event) => {
    event.preventDefault();
    window.localStorage.setItem('lt-review-token', tokenInput.value);
    controller.setToken(tokenInput.value);
    void controller.load(1);
  });

  root.append(el('h1', {}, ['Augmented-image review queue']), tokenForm, notice, list);
  const stored = window.localStorage.getItem('lt-review-token');
  if (stored) {
    void controller.load(1);
  } else {
    controller.setToken(''); // render the token prompt
  }
}

export function mount(root: HTMLElement): void {
  const client = new ApiClient('');
  const hash = window.location.hash;
  clear(root);
  const nav = el('nav', {}, [
    el('a', { href: '#submit' }, ['Submit a scan']),
    ' · ',
    el('a', { href: '#review' }, ['Review queue']),
  ]);
  root.append(nav);
  const page = el('main', {});
  root.append(page);
  if (hash === '#review') {
    mountReviewPage(client, page);
  } else {
    mountSubmitPage(client, page);
  }
}

if (typeof window !== 'undefined' && typeof document !== 'undefined') {
  const root = document.getElementById('app');
  if (root) {
    mount(root);
    window.addEventListener('hashchange', () => mount(root));
  }
}
