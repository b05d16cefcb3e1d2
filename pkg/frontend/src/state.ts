/**
 * Session state for the sequential decision loop, as pure functions.
 *
 * The server is stateless: every forecast request carries the full
 * cumulative reductions map.  The client keeps that map, its history (for
 * undo), and the id of the most recent request so that late responses to
 * superseded requests are discarded.
 */

import type { ForecastResponse, RankingRow } from "./types";

export interface DisplaySettings {
  nDraws: number;
  seed: number;
  mode: "preview" | "full";
  fraction: number;
}

export interface SessionState {
  committed: Record<string, number>;
  history: Record<string, number>[];
  lastRequestId: number;
  /** id of the request the current ranking/map answer (matched responses only) */
  answeredRequestId: number;
  ranking: RankingRow[] | null;
  reductionField: number[] | null;
  exposure: { mean: number; lo: number; hi: number } | null;
  settings: DisplaySettings;
}

export function initialState(settings?: Partial<DisplaySettings>): SessionState {
  return {
    committed: {},
    history: [],
    lastRequestId: 0,
    answeredRequestId: 0,
    ranking: null,
    reductionField: null,
    exposure: null,
    settings: {
      nDraws: 200,
      seed: 0,
      mode: "preview",
      fraction: 0.8,
      ...settings,
    },
  };
}

function validFraction(fraction: number): void {
  if (!(fraction >= 0 && fraction <= 1)) {
    throw new Error(`fraction must lie in [0, 1], got ${fraction}`);
  }
}

/** Merge one commitment into the map, pushing the old map onto history. */
export function commitReduction(
  state: SessionState,
  facilityId: string,
  fraction: number,
): SessionState {
  validFraction(fraction);
  return {
    ...state,
    history: [...state.history, { ...state.committed }],
    committed: { ...state.committed, [facilityId]: fraction },
  };
}

/** Restore the committed map from before the last commit (no-op if empty). */
export function undoCommit(state: SessionState): SessionState {
  if (state.history.length === 0) return state;
  const history = state.history.slice(0, -1);
  const committed = state.history[state.history.length - 1];
  return { ...state, history, committed: { ...committed } };
}

/** Candidates still worth ranking: not fully scrubbed yet. */
export function remainingCandidates(
  state: SessionState,
  allIds: string[],
): string[] {
  return allIds.filter((id) => (state.committed[id] ?? 0) < 1.0).sort();
}

/** Stamp a new outgoing request; responses must echo this id to apply. */
export function nextRequest(state: SessionState): {
  state: SessionState;
  requestId: number;
} {
  const requestId = state.lastRequestId + 1;
  return { state: { ...state, lastRequestId: requestId }, requestId };
}

/**
 * Apply a forecast response if it answers the most recent request;
 * stale responses leave the state untouched.
 */
export function applyForecastResponse(
  state: SessionState,
  requestId: number,
  response: ForecastResponse,
): SessionState {
  if (requestId !== state.lastRequestId) return state;
  return {
    ...state,
    answeredRequestId: requestId,
    ranking: response.ranking ?? state.ranking,
    reductionField: response.mean_field,
    exposure: response.exposure,
  };
}

/** The ranking ids currently shown (empty until the first response). */
export function rankedIds(state: SessionState): string[] {
  return (state.ranking ?? []).map((row) => row.id);
}
