/**
 * Application controller: wires the API client, session state, heatmap and
 * ranking panel into the sequential decision loop.
 *
 * Flow per commitment: merge the facility into the committed map, POST the
 * cumulative map with a rank request over the remaining candidates, and on
 * a non-stale response update the ranking panel and the residual map.  API
 * failures roll the commitment back and surface a toast; the model data is
 * never mutated client-side.
 */

import { ApiClient } from "./api";
import {
  applyForecastResponse,
  commitReduction,
  initialState,
  nextRequest,
  remainingCandidates,
  undoCommit,
  type SessionState,
  type DisplaySettings,
} from "./state";
import type { FacilityInfo, ForecastRequest, ModelInfo } from "./types";

export interface AppView {
  renderMap(field: number[], committed: Record<string, number>): void;
  renderRanking(state: SessionState): void;
  renderExposure(state: SessionState): void;
  toast(message: string): void;
}

export class ScenarioApp {
  state: SessionState;
  facilities: FacilityInfo[] = [];
  model: ModelInfo | null = null;
  baselineField: number[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly view: AppView,
    settings?: Partial<DisplaySettings>,
  ) {
    this.state = initialState(settings);
  }

  async start(): Promise<void> {
    this.model = await this.api.model();
    this.facilities = await this.api.facilities();
    this.baselineField = (await this.api.meanField()).mean_field;
    await this.refresh();
  }

  facilityIds(): string[] {
    return this.facilities.map((f) => f.id).sort();
  }

  /** Residual pollution: baseline minus the forecasted reduction (display
   * composition of two API fields; all statistics stay server-computed). */
  residualField(): number[] {
    const reduction = this.state.reductionField;
    if (!reduction || reduction.length !== this.baselineField.length) {
      return this.baselineField;
    }
    return this.baselineField.map((v, k) => v - reduction[k]);
  }

  private buildRequest(): ForecastRequest {
    const { nDraws, seed, mode, fraction } = this.state.settings;
    return {
      reductions: { ...this.state.committed },
      n_draws: nDraws,
      seed,
      mode,
      fraction_default: fraction,
      rank: remainingCandidates(this.state, this.facilityIds()),
    };
  }

  /** POST the current committed map and apply the response unless stale. */
  async refresh(): Promise<void> {
    const stamped = nextRequest(this.state);
    this.state = stamped.state;
    const request = this.buildRequest();
    try {
      const response = await this.api.forecast(request);
      this.state = applyForecastResponse(this.state, stamped.requestId, response);
      if (this.state.answeredRequestId === stamped.requestId) {
        this.render();
      }
    } catch (err) {
      this.view.toast(err instanceof Error ? err.message : String(err));
      throw err;
    }
  }

  /** The decision-loop step: commit a facility, then re-rank the rest. */
  async commitAndRerank(facilityId: string, fraction?: number): Promise<void> {
    if (!this.facilityIds().includes(facilityId)) {
      this.view.toast(`unknown facility: ${facilityId}`);
      return;
    }
    const before = this.state;
    this.state = commitReduction(
      this.state,
      facilityId,
      fraction ?? this.state.settings.fraction,
    );
    try {
      await this.refresh();
    } catch {
      this.state = before; // non-blocking failure: state unchanged
      this.render();
    }
  }

  /** Undo the last commitment and re-request the ranking. */
  async undo(): Promise<void> {
    const popped = undoCommit(this.state);
    if (popped === this.state) return;
    this.state = popped;
    await this.refresh();
  }

  /** Re-run the current scenario with full posterior-predictive sampling. */
  async runFullSampling(): Promise<void> {
    this.state = {
      ...this.state,
      settings: { ...this.state.settings, mode: "full" },
    };
    try {
      await this.refresh();
    } finally {
      this.state = {
        ...this.state,
        settings: { ...this.state.settings, mode: "preview" },
      };
    }
  }

  private render(): void {
    this.view.renderMap(this.residualField(), this.state.committed);
    this.view.renderRanking(this.state);
    this.view.renderExposure(this.state);
  }
}
