/** Types mirroring the hypothesis-session JSON API (snake_case fields). */

export interface ClassInfo {
  index: number;
  name: string;
  default_counterexamples: number;
  default_similar_cases: number;
}

export interface ClassesResponse {
  classes: ClassInfo[];
  display_order: string[];
}

export interface NamedValue {
  name: string;
  value: number;
}

export interface FeatureChange {
  name: string;
  old: number;
  new: number;
}

export interface ExampleRecord {
  id: string;
  values: NamedValue[];            // already in display order
  predicted_class: number;
  changed_features: FeatureChange[];
  proximity: number;
  sparsity: number;
}

export interface ImportanceWeight {
  name: string;
  weight: number;
}

export interface Importance {
  record_id: string;
  hypothesis: number;
  weights: ImportanceWeight[];
  surrogate_r2: number;
  degenerate: boolean;
}

export interface ExplanationBundle {
  record_id: string;
  hypothesis: number;
  hypothesis_name: string;
  display_order: string[];
  record_values: NamedValue[];
  n_similar_cases: number;
  n_counterexamples_per_class: number;
  similar_cases: ExampleRecord[];
  similar_cases_exhausted: boolean;
  counterexamples: Record<string, ExampleRecord[]>;
  counterexamples_exhausted: Record<string, boolean>;
  importance: Importance | null;
  provenance: { model_fingerprint: string; seed: number; timing_ms?: number };
}

export interface ExplainRequest {
  record_id?: string;
  record?: Record<string, number>;
  hypothesis: number;
  n_counterexamples_per_class: number;
  n_similar_cases: number;
  include_importance: boolean;
  seed?: number;
}

export interface ApiErrorBody {
  error_code: string;
  detail: string;
}
