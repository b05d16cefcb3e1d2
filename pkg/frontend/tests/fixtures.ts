/** Load recorded request/response fixtures (see ../record_fixtures.py). */

import { readFileSync } from "node:fs";
import { resolve } from "node:path";

export interface Fixture<Req = unknown, Res = unknown> {
  request: Req;
  status: number;
  response: Res;
}

export function loadFixture<Req = unknown, Res = unknown>(
  name: string,
): Fixture<Req, Res> {
  // vitest runs with cwd = frontend/; import.meta.url is unreliable in jsdom
  const file = resolve(process.cwd(), "tests", "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(file, "utf-8"));
}

export const FIXTURE_NAMES = [
  "facilities",
  "model",
  "field_mean",
  "forecast_preview",
  "forecast_committed",
] as const;
