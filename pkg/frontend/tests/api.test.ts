import { describe, expect, it } from "vitest";

import classesFixture from "../fixtures/classes.json";
import bundleFixture from "../fixtures/bundle_negative.json";
import { ApiClient, ApiError } from "../src/api.js";
import { applyResponse, beginRequest, initialState, pivotRequest } from "../src/state.js";
import type { ExplainRequest, ExplanationBundle } from "../src/types.js";

const bundle = bundleFixture as unknown as ExplanationBundle;

function fakeFetch(status: number, body: unknown) {
  const calls: { url: string; init?: RequestInit }[] = [];
  const impl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    } as Response;
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("fetches classes", async () => {
    const { impl, calls } = fakeFetch(200, classesFixture);
    const client = new ApiClient("", impl);
    const res = await client.classes();
    expect(calls[0].url).toBe("/classes");
    expect(res.classes).toHaveLength(3);
  });

  it("posts explain requests as JSON", async () => {
    const { impl, calls } = fakeFetch(200, bundleFixture);
    const client = new ApiClient("", impl);
    const req: ExplainRequest = {
      record_id: "demo-77", hypothesis: 0, n_similar_cases: 3,
      n_counterexamples_per_class: 3, include_importance: true,
    };
    const res = await client.explain(req);
    expect(calls[0].url).toBe("/explain");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual(req);
    expect(res.record_id).toBe("demo-77");
  });

  it("surfaces stable error codes", async () => {
    const { impl } = fakeFetch(400, { error_code: "invalid_class",
                                      detail: "invalid hypothesis class: 7" });
    const client = new ApiClient("", impl);
    await expect(client.explain({ hypothesis: 7 } as ExplainRequest))
      .rejects.toMatchObject({ code: "invalid_class", status: 400 });
  });

  it("maps network failures to an unreachable error", async () => {
    const client = new ApiClient("", async () => {
      throw new TypeError("Failed to fetch");
    });
    await expect(client.classes()).rejects.toBeInstanceOf(ApiError);
    await expect(client.classes()).rejects.toMatchObject({ code: "unreachable" });
  });
});

describe("pivot fires a request with per-class defaults", () => {
  it("sends 5/5 when pivoting from Negative to Hyperthyroid", async () => {
    let s = initialState(classesFixture.classes);
    const original: ExplainRequest = {
      record_id: "demo-77", hypothesis: 0, n_similar_cases: 3,
      n_counterexamples_per_class: 3, include_importance: true,
    };
    const begun = beginRequest({ ...s, recordId: "demo-77" })!;
    s = applyResponse(begun.state, begun.token, original, bundle);

    const req = pivotRequest(s, 1)!;
    const { impl, calls } = fakeFetch(200, bundleFixture);
    await new ApiClient("", impl).explain(req);

    const sent = JSON.parse(String(calls[0].init?.body));
    expect(sent.record_id).toBe("demo-77");
    expect(sent.hypothesis).toBe(1);
    expect(sent.n_similar_cases).toBe(5);
    expect(sent.n_counterexamples_per_class).toBe(5);
  });
});
