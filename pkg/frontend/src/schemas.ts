/**
 * Runtime validation of service payloads (the wire contract).
 *
 * Every response passes through one of these schemas before the app touches
 * it, so a contract drift fails loudly instead of rendering garbage.
 */

import { z } from "zod";

export const facilitySchema = z.object({
  id: z.string(),
  name: z.string(),
  lon: z.number().finite(),
  lat: z.number().finite(),
  so2_tons: z.number().finite().nonnegative(),
});

export const facilitiesSchema = z.array(facilitySchema);

export const gridSchema = z.object({
  nx: z.number().int().min(2),
  ny: z.number().int().min(2),
  origin: z.tuple([z.number(), z.number()]),
  dx: z.number().positive(),
  dy: z.number().positive(),
});

const ci = z.tuple([z.number(), z.number()]);

export const modelSchema = z.object({
  theta_posterior_mean: z.record(z.string(), z.number()),
  ci95: z.record(z.string(), ci),
  grid: gridSchema,
  delta: z.number().positive(),
  T: z.number().positive(),
  n_trace: z.number().int().positive(),
});

export const exposureSchema = z
  .object({
    mean: z.number().finite(),
    lo: z.number().finite(),
    hi: z.number().finite(),
  })
  .refine((e) => e.lo <= e.hi, { message: "interval bounds out of order" });

export const rankingRowSchema = z.object({
  id: z.string(),
  mean: z.number().finite(),
  lo: z.number().finite(),
  hi: z.number().finite(),
});

export const forecastResponseSchema = z.object({
  mean_field: z.array(z.number().finite()),
  exposure: exposureSchema,
  ranking: z.array(rankingRowSchema).optional(),
});

export const meanFieldSchema = z.object({
  mean_field: z.array(z.number().finite()),
});

export const forecastRequestSchema = z.object({
  reductions: z.record(z.string(), z.number().min(0).max(1)),
  n_draws: z.number().int().positive(),
  seed: z.number().int(),
  mode: z.enum(["preview", "full"]),
  fraction_default: z.number().min(0).max(1).optional(),
  rank: z.array(z.string()).optional(),
});

export const apiErrorSchema = z.object({
  error: z.object({ code: z.string(), message: z.string() }),
});
