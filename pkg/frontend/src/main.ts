import { ApiClient, ApiError } from "./api.js";
import {
  UiState, applyError, applyResponse, beginRequest, buildRequest, goBack,
  goForward, initialState, pivotRequest, setCount, setHypothesis,
} from "./state.js";
import { renderApp } from "./render.js";
import type { ExplainRequest } from "./types.js";

const api = new ApiClient("");
let state: UiState;

function mount(): HTMLElement {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  return root;
}

function update(next: UiState): void {
  state = next;
  const root = mount();
  root.innerHTML = renderApp(state);
  wire(root);
}

async function submit(request: ExplainRequest): Promise<void> {
  const begun = beginRequest(state);
  if (!begun) return;             // one in-flight request at a time
  update(begun.state);
  try {
    const bundle = await api.explain(request);
    update(applyResponse(state, begun.token, request, bundle));
  } catch (err) {
    const message = err instanceof ApiError ? err.message : String(err);
    update(applyError(state, begun.token, message));
  }
}

function wire(root: HTMLElement): void {
  const form = root.querySelector<HTMLFormElement>("#request-form");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const built = buildRequest(state);
    if ("error" in built) {
      update({ ...state, validationError: built.error });
      return;
    }
    void submit(built);
  });
  root.querySelector<HTMLInputElement>("#record-id")?.addEventListener(
    "input", (e) => {
      state = { ...state, recordId: (e.target as HTMLInputElement).value };
    });
  root.querySelector<HTMLSelectElement>("#hypothesis")?.addEventListener(
    "change", (e) => {
      update(setHypothesis(state, Number((e.target as HTMLSelectElement).value)));
    });
  root.querySelector<HTMLInputElement>("#cf-count")?.addEventListener(
    "change", (e) => {
      update(setCount(state, "counterexamples",
                      Number((e.target as HTMLInputElement).value)));
    });
  root.querySelector<HTMLInputElement>("#sc-count")?.addEventListener(
    "change", (e) => {
      update(setCount(state, "similar", Number((e.target as HTMLInputElement).value)));
    });
  root.querySelector<HTMLInputElement>("#importance")?.addEventListener(
    "change", (e) => {
      state = { ...state, includeImportance: (e.target as HTMLInputElement).checked };
    });
  root.querySelectorAll<HTMLButtonElement>(".pivot").forEach((button) => {
    button.addEventListener("click", () => {
      const request = pivotRequest(state, Number(button.dataset.class));
      if (request) void submit(request);
    });
  });
  root.querySelector("#history-back")?.addEventListener("click", () => {
    update(goBack(state));
  });
  root.querySelector("#history-forward")?.addEventListener("click", () => {
    update(goForward(state));
  });
  root.querySelector("#importance-toggle")?.addEventListener("click", () => {
    update({ ...state, showAllImportance: !state.showAllImportance });
  });
}

async function boot(): Promise<void> {
  try {
    const classes = await api.classes();
    update(initialState(classes.classes));
  } catch (err) {
    // banner + disabled form: the page stays legible when the API is down
    const message = err instanceof Error ? err.message : String(err);
    update({ ...initialState([]), apiError: message });
  }
}

void boot();
