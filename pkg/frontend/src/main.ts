/** Browser bootstrap: mount the explorer against a service base URL. */

import { ApiClient } from "./api";
import { ScenarioApp, type AppView } from "./app";
import { createHeatmap, type HeatmapController } from "./heatmap";
import { createRankingPanel, type RankingPanelController } from "./rankingPanel";
import type { SessionState } from "./state";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node;
}

export async function mount(baseUrl: string): Promise<ScenarioApp> {
  const api = new ApiClient(baseUrl);
  let heatmap: HeatmapController | null = null;
  let panel: RankingPanelController | null = null;
  let app: ScenarioApp;

  const view: AppView = {
    renderMap(field, committed) {
      if (!heatmap && app.model) {
        heatmap = createHeatmap(el("map"), app.model.grid);
      }
      heatmap?.render(field, app.facilities, committed);
    },
    renderRanking(state: SessionState) {
      if (!panel) {
        panel = createRankingPanel(el("ranking"), (facilityId) => {
          void app.commitAndRerank(facilityId);
        });
      }
      panel.render(state.ranking ?? [], state.committed);
    },
    renderExposure(state: SessionState) {
      const box = el("exposure");
      if (state.exposure) {
        box.textContent =
          `committed scenario reduction: ${state.exposure.mean} ` +
          `(95%: ${state.exposure.lo} .. ${state.exposure.hi})`;
      } else {
        box.textContent = "no scenario committed yet";
      }
    },
    toast(message: string) {
      const node = el("toast");
      node.textContent = message;
      node.classList.add("visible");
      setTimeout(() => node.classList.remove("visible"), 4000);
    },
  };

  app = new ScenarioApp(api, view);
  el("undo").addEventListener("click", () => void app.undo());
  el("full-sampling").addEventListener("click", () => void app.runFullSampling());
  await app.start();
  return app;
}

declare global {
  interface Window {
    scenarioApp?: ScenarioApp;
  }
}

if (typeof document !== "undefined" && document.getElementById("map")) {
  const base =
    new URLSearchParams(window.location.search).get("api") ??
    "http://127.0.0.1:8000";
  mount(base)
    .then((app) => {
      window.scenarioApp = app;
    })
    .catch((err) => {
      const node = document.getElementById("toast");
      if (node) node.textContent = `failed to start: ${err}`;
    });
}
