// Client-side questionnaire validation; submit is blocked until this passes.

import type { AgeBand, LastContact, Questionnaire, Symptom } from './types.js';

export const AGE_BANDS: AgeBand[] = ['18-30', '31-50', 'over50'];
export const SYMPTOMS: Symptom[] = [
  'penile_pain',
  'penile_discharge',
  'pain_burning_urination',
  'none_other',
];
export const LAST_CONTACT: LastContact[] = ['under1mo', '1to3mo', 'over3mo', 'never'];

export interface QuestionnaireForm {
  age_band?: string;
  country?: string;
  symptoms?: string[];
  last_contact?: string;
}

export type ValidationResult =
  | { ok: true; value: Questionnaire }
  | { ok: false; errors: Record<string, string> };

export function validateQuestionnaire(form: QuestionnaireForm): ValidationResult {
  const errors: Record<string, string> = {};
  if (!form.age_band || !(AGE_BANDS as string[]).includes(form.age_band)) {
    errors.age_band = 'Select an age band.';
  }
  if (!form.country || !/^[A-Z]{2}$/.test(form.country)) {
    errors.country = 'Select a country.';
  }
  const symptoms = form.symptoms ?? [];
  if (symptoms.length === 0) {
    errors.symptoms = 'Select at least one option ("none of the above / other" counts).';
  } else if (symptoms.some((s) => !(SYMPTOMS as string[]).includes(s))) {
    errors.symptoms = 'Unknown symptom choice.';
  } else if (new Set(symptoms).size !== symptoms.length) {
    errors.symptoms = 'Duplicate symptom choice.';
  }
  if (!form.last_contact || !(LAST_CONTACT as string[]).includes(form.last_contact)) {
    errors.last_contact = 'Select when your last sexual contact was.';
  }
  if (Object.keys(errors).length > 0) {
    return { ok: false, errors };
  }
  return {
    ok: true,
    value: {
      age_band: form.age_band as AgeBand,
      country: form.country as string,
      symptoms: symptoms as Symptom[],
      last_contact: form.last_contact as LastContact,
    },
  };
}

export interface FileCheckOptions {
  maxBytes?: number;
}

export const DEFAULT_MAX_UPLOAD_BYTES = 5 * 1024 * 1024;

export function validateImageFile(
  file: { size: number; type: string } | null | undefined,
  options: FileCheckOptions = {},
): string | null {
  if (!file) return 'Choose an image to scan.';
  const maxBytes = options.maxBytes ?? DEFAULT_MAX_UPLOAD_BYTES;
  if (file.size === 0) return 'The selected file is empty.';
  if (file.size > maxBytes) {
    const mb = (maxBytes / (1024 * 1024)).toFixed(0);
    return `Image is too large (limit ${mb} MB).`;
  }
  if (file.type && !file.type.startsWith('image/')) {
    return 'The selected file is not an image.';
  }
  return null;
}
