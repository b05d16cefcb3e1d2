// A14: the decision loop against the recorded service fixtures.  Committing
// the dominant facility removes it from the ranking and updates the residual
// map within a single request round-trip; undo restores the prior ranking.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ScenarioApp, type AppView } from "../src/app";
import { rankedIds } from "../src/state";
import type { ForecastRequest } from "../src/types";
import { loadFixture } from "./fixtures";

const facilities = loadFixture("facilities");
const model = loadFixture("model");
const fieldMean = loadFixture("field_mean");
const preview = loadFixture<{ body: ForecastRequest }>("forecast_preview");
const committed = loadFixture<{ body: ForecastRequest }>("forecast_committed");

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

interface FakeServer {
  fetch(input: string, init?: RequestInit): Promise<Response>;
  postCount: number;
  failNextPost: boolean;
}

function fakeServer(): FakeServer {
  const server: FakeServer = {
    postCount: 0,
    failNextPost: false,
    async fetch(input: string, init?: RequestInit): Promise<Response> {
      if (!init || init.method === undefined || init.method === "GET") {
        if (input.endsWith("/api/facilities")) return jsonResponse(facilities.response);
        if (input.endsWith("/api/model")) return jsonResponse(model.response);
        if (input.endsWith("/api/field/mean")) return jsonResponse(fieldMean.response);
        return jsonResponse({ error: { code: "not_found", message: input } }, 404);
      }
      server.postCount += 1;
      if (server.failNextPost) {
        server.failNextPost = false;
        return jsonResponse(
          { error: { code: "bad_request", message: "injected failure" } },
          400,
        );
      }
      const body = JSON.parse(String(init.body)) as ForecastRequest;
      const isCommitted = Object.keys(body.reductions).length > 0;
      return jsonResponse(isCommitted ? committed.response : preview.response);
    },
  };
  return server;
}

interface RecordedView extends AppView {
  maps: number[][];
  toasts: string[];
  rankingRenders: number;
}

function recordedView(): RecordedView {
  const view: RecordedView = {
    maps: [],
    toasts: [],
    rankingRenders: 0,
    renderMap(field) {
      view.maps.push([...field]);
    },
    renderRanking() {
      view.rankingRenders += 1;
    },
    renderExposure() {},
    toast(message) {
      view.toasts.push(message);
    },
  };
  return view;
}

describe("sequential decision loop", () => {
  let server: FakeServer;
  let view: RecordedView;
  let app: ScenarioApp;

  beforeEach(async () => {
    server = fakeServer();
    view = recordedView();
    app = new ScenarioApp(new ApiClient("http://test", server.fetch), view, {
      seed: 42,
      nDraws: 50,
    });
    await app.start();
  });

  it("startup ranks all facilities with the dominant one first", () => {
    expect(rankedIds(app.state)[0]).toBe("big_west");
    expect(rankedIds(app.state)).toHaveLength(5);
    expect(server.postCount).toBe(1);
  });

  it("committing the dominant facility re-ranks without it in one round-trip", async () => {
    const mapsBefore = view.maps.length;
    const postsBefore = server.postCount;

    await app.commitAndRerank("big_west", 0.8);

    expect(server.postCount).toBe(postsBefore + 1); // one round-trip
    expect(app.state.committed).toEqual({ big_west: 0.8 });
    expect(rankedIds(app.state)).not.toContain("big_west");
    expect(rankedIds(app.state)).toHaveLength(4);

    // residual map updated: reduction surface subtracted from the baseline
    expect(view.maps.length).toBeGreaterThan(mapsBefore);
    const residual = view.maps[view.maps.length - 1];
    const baselineSum = app.baselineField.reduce((a, b) => a + b, 0);
    const residualSum = residual.reduce((a, b) => a + b, 0);
    expect(residualSum).toBeLessThan(baselineSum);
  });

  it("undo restores the prior ranking", async () => {
    const before = rankedIds(app.state);
    await app.commitAndRerank("big_west", 0.8);
    expect(rankedIds(app.state)).not.toContain("big_west");

    await app.undo();
    expect(app.state.committed).toEqual({});
    expect(rankedIds(app.state)).toEqual(before);
    expect(rankedIds(app.state)).toContain("big_west");
  });

  it("API failure leaves the committed map unchanged and toasts", async () => {
    server.failNextPost = true;
    await app.commitAndRerank("big_west", 0.8);
    expect(app.state.committed).toEqual({});
    expect(view.toasts.length).toBeGreaterThan(0);
    expect(view.toasts[0]).toContain("injected failure");
  });

  it("unknown facility is rejected client-side", async () => {
    const posts = server.postCount;
    await app.commitAndRerank("ghost", 0.8);
    expect(server.postCount).toBe(posts);
    expect(view.toasts[0]).toContain("unknown facility");
  });

  it("quantities rendered come only from API payloads", () => {
    // the exposure shown is exactly the fixture's value, never recomputed
    expect(app.state.exposure).toEqual(preview.response.exposure);
  });
});
