// Payload shapes for the triage service's JSON API.

export type AgeBand = '18-30' | '31-50' | 'over50';
export type Symptom =
  | 'penile_pain'
  | 'penile_discharge'
  | 'pain_burning_urination'
  | 'none_other';
export type LastContact = 'under1mo' | '1to3mo' | 'over3mo' | 'never';

export interface Questionnaire {
  age_band: AgeBand;
  country: string; // ISO 3166-1 alpha-2
  symptoms: Symptom[];
  last_contact: LastContact;
}

export type ScanStatus = 'pending' | 'classified' | 'failed';

export interface EducationEntry {
  class: string;
  display_name: string;
  symptoms: string;
  confirmatory_testing: string;
  treatment: string;
  links: string[];
}

export interface ScanResult {
  final_class: string;
  display_name: string;
  confidence: number;
  initial_class: string;
  initial_confidence: number;
  probs: Record<string, number>;
  bbox: [number, number, number, number];
  saliency_url: string;
}

export interface ScanResponse {
  id: string;
  status: ScanStatus;
  created_at: string;
  updated_at?: string;
  questionnaire?: Questionnaire;
  result?: ScanResult;
  education?: EducationEntry;
  error?: string;
}

export interface SubmitResponse {
  id: string;
  status: ScanStatus;
  created_at: string;
}

export interface ReviewItem {
  record_id: string;
  label: string;
  display_name: string;
  base_id: string | null;
  recipe_id: string | null;
  image_url: string;
  base_image_url: string;
  recipe?: Record<string, unknown>;
}

export interface ReviewQueueResponse {
  items: ReviewItem[];
  total: number;
  page: number;
  per_page: number;
}

export interface VerdictResponse {
  record: Record<string, unknown>;
  training_eligible: boolean;
}
