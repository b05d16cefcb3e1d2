// A13 DOM assertion: the ranking panel must display exactly the mean and
// interval values returned by the API, straight from the recorded fixture.

import { describe, expect, it } from "vitest";

import { createRankingPanel } from "../src/rankingPanel";
import type { ForecastResponse } from "../src/types";
import { loadFixture } from "./fixtures";

describe("ranking panel renders fixture values verbatim", () => {
  it("mean and interval cells equal the API numbers", () => {
    const fx = loadFixture<unknown, ForecastResponse>("forecast_preview");
    const ranking = fx.response.ranking!;
    const host = document.createElement("div");
    const panel = createRankingPanel(host, () => {});
    panel.render(ranking, {});

    const rows = host.querySelectorAll<HTMLElement>(".ranking-row");
    expect(rows).toHaveLength(ranking.length);
    rows.forEach((row, k) => {
      const api = ranking[k];
      expect(row.dataset.facilityId).toBe(api.id);
      expect(row.querySelector(".ranking-mean")!.textContent).toBe(
        String(api.mean),
      );
      expect(row.querySelector(".ranking-interval")!.textContent).toBe(
        `(${String(api.lo)}, ${String(api.hi)})`,
      );
      // exact values also exposed as data attributes for tooling
      expect(Number(row.dataset.mean)).toBe(api.mean);
      expect(Number(row.dataset.lo)).toBe(api.lo);
      expect(Number(row.dataset.hi)).toBe(api.hi);
    });
  });

  it("committed facilities get a disabled commit button", () => {
    const fx = loadFixture<unknown, ForecastResponse>("forecast_preview");
    const host = document.createElement("div");
    const panel = createRankingPanel(host, () => {});
    panel.render(fx.response.ranking!, { big_west: 0.8 });
    const row = host.querySelector<HTMLElement>(
      '.ranking-row[data-facility-id="big_west"]',
    )!;
    const button = row.querySelector<HTMLButtonElement>(".ranking-commit")!;
    expect(button.disabled).toBe(true);
    expect(button.textContent).toBe("committed");
  });

  it("commit button fires the callback with the facility id", () => {
    const fx = loadFixture<unknown, ForecastResponse>("forecast_preview");
    const clicked: string[] = [];
    const host = document.createElement("div");
    const panel = createRankingPanel(host, (id) => clicked.push(id));
    panel.render(fx.response.ranking!, {});
    host
      .querySelector<HTMLButtonElement>(
        '.ranking-row[data-facility-id="big_west"] .ranking-commit',
      )!
      .click();
    expect(clicked).toEqual(["big_west"]);
  });
});
