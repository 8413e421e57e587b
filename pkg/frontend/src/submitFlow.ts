// Submit flow state machine: validate -> upload -> poll -> final view.
// Pure logic; the DOM layer subscribes to state transitions.

import { ApiClient, ApiError, NetworkError } from './api.js';
import { pollScan, PollOptions, PollTimeoutError } from './polling.js';
import {
  QuestionnaireForm,
  validateImageFile,
  validateQuestionnaire,
} from './validation.js';
import type { ScanResponse } from './types.js';

export type SubmitState =
  | { kind: 'invalid'; errors: Record<string, string> }
  | { kind: 'submitting' }
  | { kind: 'polling'; id: string; lastStatus: string }
  | { kind: 'classified'; scan: ScanResponse }
  | { kind: 'failed'; message: string; retryable: boolean };

export interface SubmitFlowOptions {
  poll?: PollOptions;
  onState?: (state: SubmitState) => void;
}

export async function runSubmitFlow(
  client: ApiClient,
  file: { blob: Blob; name: string; size: number; type: string } | null,
  form: QuestionnaireForm,
  options: SubmitFlowOptions = {},
): Promise<SubmitState> {
  const emit = (state: SubmitState): SubmitState => {
    options.onState?.(state);
    return state;
  };

  const errors: Record<string, string> = {};
  const fileError = validateImageFile(file);
  if (fileError) errors.image = fileError;
  const validated = validateQuestionnaire(form);
  if (!validated.ok) Object.assign(errors, validated.errors);
  if (Object.keys(errors).length > 0 || !validated.ok || !file) {
    return emit({ kind: 'invalid', errors });
  }

  emit({ kind: 'submitting' });
  let id: string;
  try {
    const accepted = await client.submitScan(file.blob, file.name, validated.value);
    id = accepted.id;
  } catch (err) {
    if (err instanceof ApiError) {
      // An HTTP rejection (oversize, undecodable, bad questionnaire) is
      // final: surface it inline and do not retry.
      return emit({ kind: 'failed', message: err.message, retryable: false });
    }
    if (err instanceof NetworkError) {
      return emit({ kind: 'failed', message: 'Network problem; please try again.', retryable: true });
    }
    throw err;
  }

  emit({ kind: 'polling', id, lastStatus: 'pending' });
  try {
    const scan = await pollScan(client, id, {
      ...options.poll,
      onTick: (r) => {
        options.poll?.onTick?.(r);
        options.onState?.({ kind: 'polling', id, lastStatus: r.status });
      },
    });
    if (scan.status === 'classified') {
      return emit({ kind: 'classified', scan });
    }
    return emit({
      kind: 'failed',
      message: scan.error ?? 'Classification failed.',
      retryable: true,
    });
  } catch (err) {
    if (err instanceof PollTimeoutError) {
      return emit({
        kind: 'failed',
        message: 'Still processing; check back shortly.',
        retryable: true,
      });
    }
    if (err instanceof NetworkError) {
      return emit({ kind: 'failed', message: 'Network problem while polling.', retryable: true });
    }
    throw err;
  }
}
