import type {
  ClassInfo, ExplainRequest, ExplanationBundle,
} from "./types.js";

export const MAX_COUNT = 10;

export interface HistoryEntry {
  request: ExplainRequest;
  bundle: ExplanationBundle;
  repeat: boolean;                 // same hypothesis re-investigated
}

export interface UiState {
  classes: ClassInfo[];
  recordId: string;
  hypothesis: number;
  similarCount: number;
  cfCount: number;
  countsEdited: boolean;           // once true, defaults stop overwriting
  includeImportance: boolean;
  clampNotice: string | null;
  validationError: string | null;
  apiError: string | null;
  inFlight: number | null;         // token of the pending request
  nextToken: number;
  history: HistoryEntry[];         // every submitted request, oldest first
  cursor: number;                  // index into history, -1 = nothing shown
  showAllImportance: boolean;
}

export function defaultsFor(classes: ClassInfo[], hypothesis: number): {
  similar: number; counterexamples: number;
} {
  const info = classes.find((c) => c.index === hypothesis);
  return {
    similar: info?.default_similar_cases ?? 3,
    counterexamples: info?.default_counterexamples ?? 3,
  };
}

export function initialState(classes: ClassInfo[]): UiState {
  const hypothesis = classes[0]?.index ?? 0;
  const defaults = defaultsFor(classes, hypothesis);
  return {
    classes,
    recordId: "",
    hypothesis,
    similarCount: defaults.similar,
    cfCount: defaults.counterexamples,
    countsEdited: false,
    includeImportance: true,
    clampNotice: null,
    validationError: null,
    apiError: null,
    inFlight: null,
    nextToken: 1,
    history: [],
    cursor: -1,
    showAllImportance: false,
  };
}

/** Clamp a raw count into [0, MAX_COUNT]; reports whether clamping happened. */
export function clampCount(raw: number): { value: number; clamped: boolean } {
  if (Number.isNaN(raw)) return { value: 0, clamped: true };
  const value = Math.min(MAX_COUNT, Math.max(0, Math.round(raw)));
  return { value, clamped: value !== raw };
}

export function setHypothesis(state: UiState, hypothesis: number): UiState {
  const next = { ...state, hypothesis };
  if (!state.countsEdited) {
    const defaults = defaultsFor(state.classes, hypothesis);
    next.similarCount = defaults.similar;
    next.cfCount = defaults.counterexamples;
  }
  return next;
}

export function setCount(
  state: UiState, field: "similar" | "counterexamples", raw: number,
): UiState {
  const { value, clamped } = clampCount(raw);
  return {
    ...state,
    similarCount: field === "similar" ? value : state.similarCount,
    cfCount: field === "counterexamples" ? value : state.cfCount,
    countsEdited: true,
    clampNotice: clamped ? `count clamped to ${value} (allowed range 0-${MAX_COUNT})` : null,
  };
}

/** Build the request for the current form, or report a validation problem. */
export function buildRequest(state: UiState): ExplainRequest | { error: string } {
  if (!state.recordId.trim()) {
    return { error: "record id is required" };
  }
  return {
    record_id: state.recordId.trim(),
    hypothesis: state.hypothesis,
    n_similar_cases: clampCount(state.similarCount).value,
    n_counterexamples_per_class: clampCount(state.cfCount).value,
    include_importance: state.includeImportance,
  };
}

/** Claim the in-flight slot; null while another request is pending. */
export function beginRequest(state: UiState): { state: UiState; token: number } | null {
  if (state.inFlight !== null) return null;
  const token = state.nextToken;
  return {
    state: {
      ...state, inFlight: token, nextToken: token + 1,
      validationError: null, apiError: null,
    },
    token,
  };
}

/** Append the response; responses whose token was superseded are discarded. */
export function applyResponse(
  state: UiState, token: number, request: ExplainRequest, bundle: ExplanationBundle,
): UiState {
  if (state.inFlight !== token) return state;
  const previous = state.cursor >= 0 ? state.history[state.cursor] : undefined;
  const repeat = previous !== undefined
    && previous.bundle.record_id === bundle.record_id
    && previous.bundle.hypothesis === bundle.hypothesis;
  const history = [...state.history, { request, bundle, repeat }];
  return {
    ...state, inFlight: null, history, cursor: history.length - 1,
    apiError: null, showAllImportance: false,
  };
}

export function applyError(state: UiState, token: number, message: string): UiState {
  if (state.inFlight !== token) return state;
  return { ...state, inFlight: null, apiError: message };
}

export function currentBundle(state: UiState): ExplanationBundle | null {
  return state.cursor >= 0 ? state.history[state.cursor].bundle : null;
}

/** History navigation re-renders retained bundles without re-querying. */
export function goBack(state: UiState): UiState {
  return state.cursor > 0 ? { ...state, cursor: state.cursor - 1 } : state;
}

export function goForward(state: UiState): UiState {
  return state.cursor < state.history.length - 1
    ? { ...state, cursor: state.cursor + 1 }
    : state;
}

/**
 * One-click follow-up: same record, new hypothesis, fresh per-class default
 * counts. Returns null while a request is in flight (pivot disabled).
 */
export function pivotRequest(state: UiState, newClass: number): ExplainRequest | null {
  if (state.inFlight !== null) return null;
  const bundle = currentBundle(state);
  if (!bundle) return null;
  const defaults = defaultsFor(state.classes, newClass);
  const req: ExplainRequest = {
    hypothesis: newClass,
    n_similar_cases: defaults.similar,
    n_counterexamples_per_class: defaults.counterexamples,
    include_importance: bundle.importance !== null,
  };
  const previous = state.history[state.cursor].request;
  if (previous.record !== undefined) {
    req.record = previous.record;
    if (previous.record_id !== undefined) req.record_id = previous.record_id;
  } else {
    req.record_id = bundle.record_id;
  }
  return req;
}
