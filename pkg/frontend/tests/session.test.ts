import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, StaleClaimError, newIdempotencyToken } from "../src/api.js";
import { AnnotationSession, renderDashboard } from "../src/app.js";
import { MockService } from "./helpers.js";

describe("AnnotationSession", () => {
  let service: MockService;
  let session: AnnotationSession;
  let mount: HTMLElement;

  beforeEach(async () => {
    service = new MockService();
    mount = document.createElement("div");
    document.body.replaceChildren(mount);
    session = new AnnotationSession(new ApiClient(service.fetch), "a1", mount, document);
    await session.start();
  });

  it("loads and renders a task on start", () => {
    expect(session.currentTask).not.toBeNull();
    expect(mount.querySelector(".question")).not.toBeNull();
  });

  it("submitting advances to the next task", async () => {
    const before = session.currentTask!.pair_key;
    await session.submit("yes");
    expect(service.stateChanges).toBe(1);
    expect(session.currentTask!.pair_key).not.toEqual(before);
  });

  it("a retry after network failure reuses one token: exactly one state change", async () => {
    service.failNextSubmits = 1;
    await session.submit("yes");
    expect(service.submissions.length).toBe(1); // failed attempt never arrived
    expect(service.stateChanges).toBe(1);
  });

  it("duplicate submission with one idempotency token changes state once", async () => {
    const api = new ApiClient(service.fetch);
    const token = newIdempotencyToken();
    const body = {
      annotator: "a1",
      pair_key: session.currentTask!.pair_key,
      verdict: "yes" as const,
      difficult: false,
      idempotency_token: token,
    };
    const first = await api.submitAnnotation(body);
    const second = await api.submitAnnotation(body);
    expect(service.stateChanges).toBe(1);
    expect(second.seq).toBe(first.seq);
    expect(second.replayed_token).toBe(true);
  });

  it("difficult flag travels with the verdict", async () => {
    const view = mount.querySelector<HTMLInputElement>(".difficult input")!;
    view.checked = true;
    await session.submit("no");
    const submitted = service.submissions.at(-1) as { difficult: boolean };
    expect(submitted.difficult).toBe(true);
  });

  it("a stale claim (409) refetches with a notice", async () => {
    const stale = new MockService();
    let calls = 0;
    const failingFetch: typeof stale.fetch = async (input, init) => {
      const url = new URL(input, "http://test");
      if (url.pathname === "/api/annotation" && calls++ === 0) {
        return new Response("stale claim", { status: 409 });
      }
      return stale.fetch(input, init);
    };
    const m = document.createElement("div");
    const s = new AnnotationSession(new ApiClient(failingFetch), "a1", m, document);
    await s.start();
    await s.submit("yes");
    expect(m.querySelector(".notice")!.textContent).toContain("claim expired");
    expect(s.currentTask).not.toBeNull();
  });

  it("verdict buttons are wired to the service", async () => {
    const yes = mount.querySelector<HTMLButtonElement>(".verdict-yes")!;
    yes.click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(service.stateChanges).toBe(1);
    const submitted = service.submissions.at(-1) as { verdict: string };
    expect(submitted.verdict).toBe("yes");
  });
});

describe("ApiClient errors", () => {
  it("maps 409 to StaleClaimError", async () => {
    const api = new ApiClient(async () => new Response("stale", { status: 409 }));
    await expect(
      api.submitAnnotation({
        annotator: "a",
        pair_key: ["x", "y"],
        verdict: "yes",
        difficult: false,
        idempotency_token: "t",
      }),
    ).rejects.toBeInstanceOf(StaleClaimError);
  });
});

describe("renderDashboard", () => {
  it("renders counts and the pairwise agreement table", async () => {
    const service = new MockService();
    const mount = document.createElement("div");
    await renderDashboard(new ApiClient(service.fetch), mount, document);
    expect(mount.querySelector(".corpus-counts")!.textContent).toContain("documents: 4");
    const rows = mount.querySelectorAll(".kappa-table tr");
    expect(rows.length).toBe(2);
    expect(rows[1]!.textContent).toContain("a1 vs a2");
    expect(mount.querySelector(".fleiss")!.textContent).toContain("0.420");
  });
});
