// Input loading and validation for the selfwalk JSON products.

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { z } from "zod";

const schemaTag = z.object({ type: z.string(), version: z.literal(1) });

export const normTableSchema = z
  .object({
    schema: schemaTag,
    lambda: z.number(),
    directions: z.array(z.array(z.number())),
    xi: z.array(z.number()),
    vertices: z.array(z.array(z.number())),
  })
  .passthrough();

export const wulffSchema = z
  .object({ schema: schemaTag, lambda: z.number(), table: normTableSchema })
  .passthrough();

export const skeletonSchema = z
  .object({
    schema: schemaTag,
    K: z.number(),
    trunk_sites: z.array(z.array(z.number())),
    trunk_indices: z.array(z.number()),
    hairs: z.record(
      z.array(z.object({ sites: z.array(z.array(z.number())), indices: z.array(z.number()) })),
    ),
    path: z.array(z.array(z.number())),
    norm_vertices: z.array(z.array(z.number())),
    cone_points: z.array(z.number()),
  })
  .passthrough();

export const enumerationSchema = z
  .object({
    schema: schemaTag,
    logZ: z.number(),
    n: z.number(),
    h: z.array(z.number()),
    endpoint_law: z.record(z.number()),
  })
  .passthrough();

export const phaseSchema = z
  .object({
    schema: schemaTag,
    scan: z.array(
      z.object({ amp: z.number(), v: z.array(z.number()), stderr: z.array(z.number()) }),
    ),
    rate_function: z
      .object({
        u_grid: z.array(z.array(z.number())),
        J: z.array(z.number()),
        edge_flags: z.array(z.boolean()),
      })
      .passthrough(),
  })
  .passthrough();

export interface LoadedInput<T> {
  data: T;
  manifestHash: string;
  path: string;
}

export class InputError extends Error {}

export function loadInput<T>(path: string, schema: z.ZodType<T>): LoadedInput<T> {
  let raw: string;
  try {
    raw = readFileSync(path, "utf8");
  } catch (err) {
    throw new InputError(`cannot read ${path}: ${(err as Error).message}`);
  }
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch (err) {
    throw new InputError(`${path} is not valid JSON: ${(err as Error).message}`);
  }
  const result = schema.safeParse(parsed);
  if (!result.success) {
    const issue = result.error.issues[0];
    throw new InputError(
      `${path} failed schema validation at ${issue.path.join(".")}: ${issue.message}`,
    );
  }
  const hash =
    typeof (parsed as Record<string, unknown>).manifest_hash === "string"
      ? ((parsed as Record<string, unknown>).manifest_hash as string)
      : createHash("sha256").update(raw).digest("hex");
  return { data: result.data, manifestHash: hash, path };
}

export function parseEndpointLaw(law: Record<string, number>): Array<{
  site: number[];
  p: number;
}> {
  return Object.entries(law)
    .map(([key, p]) => ({ site: key.split(",").map(Number), p }))
    .sort((a, b) => {
      for (let i = 0; i < a.site.length; i += 1) {
        if (a.site[i] !== b.site[i]) return a.site[i] - b.site[i];
      }
      return 0;
    });
}
