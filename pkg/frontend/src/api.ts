/**
 * Typed client for the scenario service.
 *
 * GET  /api/facilities
 * GET  /api/model
 * GET  /api/field/mean
 * POST /api/forecast
 */

import {
  apiErrorSchema,
  facilitiesSchema,
  forecastResponseSchema,
  meanFieldSchema,
  modelSchema,
} from "./schemas";
import type {
  FacilityInfo,
  ForecastRequest,
  ForecastResponse,
  MeanFieldResponse,
  ModelInfo,
} from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function fail(response: Response): Promise<never> {
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  try {
    const parsed = apiErrorSchema.safeParse(await response.json());
    if (parsed.success) {
      code = parsed.data.error.code;
      message = parsed.data.error.message;
    }
  } catch {
    // non-JSON error body: keep the generic message
  }
  throw new ApiRequestError(response.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson(path: string): Promise<unknown> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) await fail(response);
    return response.json();
  }

  async facilities(): Promise<FacilityInfo[]> {
    return facilitiesSchema.parse(await this.getJson("/api/facilities"));
  }

  async model(): Promise<ModelInfo> {
    return modelSchema.parse(await this.getJson("/api/model"));
  }

  async meanField(): Promise<MeanFieldResponse> {
    return meanFieldSchema.parse(await this.getJson("/api/field/mean"));
  }

  async forecast(request: ForecastRequest): Promise<ForecastResponse> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/forecast`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) await fail(response);
    return forecastResponseSchema.parse(await response.json());
  }
}
