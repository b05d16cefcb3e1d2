/**
 * Ranking panel: one row per candidate facility with the forecasted mean
 * exposure reduction and a 95% interval whisker.
 *
 * The numbers shown are exactly the values returned by the API (String of
 * the JSON number, no client-side rounding or recomputation); the whisker
 * geometry is presentation only.
 */

import type { RankingRow } from "./types";

export interface RankingPanelController {
  render(rows: RankingRow[], committed: Record<string, number>): void;
  readonly element: HTMLElement;
}

export function createRankingPanel(
  container: HTMLElement,
  onCommit: (facilityId: string) => void,
): RankingPanelController {
  const element = document.createElement("div");
  element.className = "ranking-panel";
  container.appendChild(element);

  function render(rows: RankingRow[], committed: Record<string, number>): void {
    element.textContent = "";
    const header = document.createElement("div");
    header.className = "ranking-header";
    header.textContent = "Forecasted exposure reduction (mean, 95% interval)";
    element.appendChild(header);

    const scaleHi = Math.max(...rows.map((r) => r.hi), 1e-300);
    for (const row of rows) {
      const div = document.createElement("div");
      div.className = "ranking-row";
      div.dataset.facilityId = row.id;
      div.dataset.mean = String(row.mean);
      div.dataset.lo = String(row.lo);
      div.dataset.hi = String(row.hi);

      const label = document.createElement("span");
      label.className = "ranking-id";
      label.textContent = row.id;
      div.appendChild(label);

      const mean = document.createElement("span");
      mean.className = "ranking-mean";
      mean.textContent = String(row.mean);
      div.appendChild(mean);

      const interval = document.createElement("span");
      interval.className = "ranking-interval";
      interval.textContent = `(${String(row.lo)}, ${String(row.hi)})`;
      div.appendChild(interval);

      const whisker = document.createElement("span");
      whisker.className = "ranking-whisker";
      whisker.style.marginLeft = `${(100 * row.lo) / scaleHi}px`;
      whisker.style.width = `${Math.max(1, (100 * (row.hi - row.lo)) / scaleHi)}px`;
      whisker.title = `95% interval (${row.lo}, ${row.hi})`;
      div.appendChild(whisker);

      const button = document.createElement("button");
      button.className = "ranking-commit";
      button.textContent = committed[row.id] ? "committed" : "commit scrubber";
      button.disabled = Boolean(committed[row.id]);
      button.addEventListener("click", () => onCommit(row.id));
      div.appendChild(button);

      element.appendChild(div);
    }
  }

  return { render, element };
}
