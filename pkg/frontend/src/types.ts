/** Payload shapes of the four service endpoints. */

export interface FacilityInfo {
  id: string;
  name: string;
  lon: number;
  lat: number;
  so2_tons: number;
}

export interface GridInfo {
  nx: number;
  ny: number;
  origin: [number, number];
  dx: number;
  dy: number;
}

export interface ModelInfo {
  theta_posterior_mean: Record<string, number>;
  ci95: Record<string, [number, number]>;
  grid: GridInfo;
  delta: number;
  T: number;
  n_trace: number;
}

export interface ExposureInterval {
  mean: number;
  lo: number;
  hi: number;
}

export interface RankingRow extends ExposureInterval {
  id: string;
}

export interface ForecastRequest {
  reductions: Record<string, number>;
  n_draws: number;
  seed: number;
  mode: "preview" | "full";
  fraction_default?: number;
  rank?: string[];
}

export interface ForecastResponse {
  mean_field: number[];
  exposure: ExposureInterval;
  ranking?: RankingRow[];
}

export interface MeanFieldResponse {
  mean_field: number[];
}

export interface ApiError {
  error: { code: string; message: string };
}
