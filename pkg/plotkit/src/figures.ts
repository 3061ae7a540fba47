// The five figure kinds: pure functions from loaded inputs to SVG text.

import {
  enumerationSchema,
  InputError,
  LoadedInput,
  loadInput,
  normTableSchema,
  parseEndpointLaw,
  phaseSchema,
  skeletonSchema,
  wulffSchema,
} from "./io";
import { normBall, Pt, sortByAngle, translate } from "./geometry";
import { extent, HEIGHT, linearScale, MARGIN, Svg, WIDTH } from "./svg";
import { z } from "zod";

const SHAPE_COLORS = ["#1f6fb2", "#c23b22", "#2e8540", "#8650a6", "#b58900"];

type NormTable = z.infer<typeof normTableSchema>;

function asTable(input: LoadedInput<unknown>): { table: NormTable; lambda: number } {
  const wulff = wulffSchema.safeParse(input.data);
  if (wulff.success) return { table: wulff.data.table, lambda: wulff.data.lambda };
  const table = normTableSchema.safeParse(input.data);
  if (table.success) return { table: table.data, lambda: table.data.lambda };
  throw new InputError(`${input.path} is neither a WulffShape nor a NormTable`);
}

// -- wulff: the shape polygon (polar unit ball), one per input lambda --

export function renderWulff(paths: string[]): string {
  if (paths.length === 0) throw new InputError("wulff needs at least one input");
  const inputs = paths.map((p) => loadInput(p, z.object({}).passthrough()));
  const shapes = inputs.map(asTable);
  const allPts = shapes.flatMap(({ table }) => table.vertices as Pt[]);
  if (allPts.length === 0) throw new InputError("empty shape data");
  const dom = extent(allPts.flatMap((p) => [Math.abs(p[0]), Math.abs(p[1])]), 0.15);
  const r = dom[1];
  const size = Math.min(WIDTH, HEIGHT) - 2 * MARGIN;
  const xs = linearScale([-r, r], [WIDTH / 2 - size / 2, WIDTH / 2 + size / 2]);
  const ys = linearScale([-r, r], [HEIGHT / 2 + size / 2, HEIGHT / 2 - size / 2]);
  const svg = new Svg(inputs[0].manifestHash, "Wulff shapes K_lambda");
  svg.line(xs(-r), ys(0), xs(r), ys(0), "#bbb");
  svg.line(xs(0), ys(-r), xs(0), ys(r), "#bbb");
  shapes.forEach(({ table, lambda }, i) => {
    const color = SHAPE_COLORS[i % SHAPE_COLORS.length];
    const poly = sortByAngle(table.vertices as Pt[]).map(
      ([x, y]) => [xs(x), ys(y)] as Pt,
    );
    svg.polygon(poly, color, "none");
    svg.text(WIDTH - MARGIN - 104, MARGIN + 16 * i + 1, `lambda = ${lambda}`, 11, "start");
    svg.rect(WIDTH - MARGIN - 120, MARGIN + 16 * i - 8, 10, 10, color);
  });
  return svg.render();
}

// -- skeleton-overlay: path, trunk, xi-balls, hairs and cone points --

export function renderSkeletonOverlay(paths: string[]): string {
  const input = loadInput(paths[0], skeletonSchema);
  const sk = input.data;
  const sites = sk.path as Pt[];
  const ball = normBall(sk.norm_vertices as Pt[], sk.K);
  const ballSpan = Math.max(...ball.map(([x, y]) => Math.max(Math.abs(x), Math.abs(y))));
  const xsDom = extent(sites.map((s) => s[0]), 0.05);
  const ysDom = extent(sites.map((s) => s[1]), 0.05);
  const pad = ballSpan + 1;
  const dom: [number, number] = [
    Math.min(xsDom[0], ysDom[0]) - pad,
    Math.max(xsDom[1], ysDom[1]) + pad,
  ];
  const size = Math.min(WIDTH, HEIGHT) - 2 * MARGIN;
  const scale = size / (dom[1] - dom[0]);
  const xs = (x: number) => WIDTH / 2 + (x - (dom[0] + dom[1]) / 2) * scale;
  const ys = (y: number) => HEIGHT / 2 - (y - (dom[0] + dom[1]) / 2) * scale;
  const svg = new Svg(input.manifestHash, `K-skeleton overlay (K = ${sk.K})`);
  for (const u of sk.trunk_sites as Pt[]) {
    const poly = translate(ball, u[0], u[1]).map(([x, y]) => [xs(x), ys(y)] as Pt);
    svg.polygon(poly, "#9ecae1", "none");
  }
  svg.polyline(sites.map(([x, y]) => [xs(x), ys(y)] as Pt), "#555", 1.2);
  for (const hairList of Object.values(sk.hairs)) {
    for (const hair of hairList) {
      for (const [hx, hy] of hair.sites as Pt[]) {
        svg.circle(xs(hx), ys(hy), 3.5, "#2e8540");
      }
    }
  }
  (sk.trunk_sites as Pt[]).forEach(([ux, uy]) => {
    svg.circle(xs(ux), ys(uy), 4.5, "#c23b22");
  });
  for (const k of sk.cone_points) {
    const [cx, cy] = sites[k];
    svg.circle(xs(cx), ys(cy), 2.5, "#8650a6");
  }
  svg.legend([
    ["trunk vertex", "#c23b22"],
    ["hair vertex", "#2e8540"],
    ["cone point", "#8650a6"],
    ["xi-ball", "#9ecae1"],
  ]);
  return svg.render();
}

// -- endpoint-hist: first-coordinate marginal with Gaussian envelope --

export function renderEndpointHist(paths: string[]): string {
  const input = loadInput(paths[0], enumerationSchema);
  const law = parseEndpointLaw(input.data.endpoint_law);
  if (law.length === 0) throw new InputError("empty endpoint law");
  const marginal = new Map<number, number>();
  for (const { site, p } of law) {
    marginal.set(site[0], (marginal.get(site[0]) ?? 0) + p);
  }
  const xsVals = [...marginal.keys()].sort((a, b) => a - b);
  const probs = xsVals.map((x) => marginal.get(x) as number);
  const mean = xsVals.reduce((acc, x, i) => acc + x * probs[i], 0);
  const variance = xsVals.reduce(
    (acc, x, i) => acc + (x - mean) ** 2 * probs[i],
    0,
  );
  const dom: [number, number] = [xsVals[0] - 1, xsVals[xsVals.length - 1] + 1];
  const xs = linearScale(dom, [MARGIN, WIDTH - MARGIN]);
  const ys = linearScale([0, Math.max(...probs) * 1.15], [HEIGHT - MARGIN, MARGIN]);
  const svg = new Svg(
    input.manifestHash,
    `Endpoint marginal, n = ${input.data.n} (bars) with Gaussian envelope`,
  );
  svg.axes(xs, ys, "displacement along e1", "probability");
  const bw = Math.max(2, (xs(1) - xs(0)) * 0.8);
  xsVals.forEach((x, i) => {
    const top = ys(probs[i]);
    svg.rect(xs(x) - bw / 2, top, bw, ys(0) - top, "#9ecae1");
  });
  if (variance > 0) {
    const curve: Pt[] = [];
    const steps = 120;
    for (let i = 0; i <= steps; i += 1) {
      const x = dom[0] + ((dom[1] - dom[0]) * i) / steps;
      // lattice parity: mass sits on every other integer, so the
      // envelope carries a factor 2 relative to the plain density
      const dens =
        (2 / Math.sqrt(2 * Math.PI * variance)) *
        Math.exp(-((x - mean) ** 2) / (2 * variance));
      curve.push([xs(x), ys(dens)]);
    }
    svg.polyline(curve, "#c23b22", 1.6);
  }
  return svg.render();
}

// -- phase-scan: speed projection against drift amplitude --

export function renderPhaseScan(paths: string[]): string {
  const input = loadInput(paths[0], phaseSchema);
  const scan = input.data.scan;
  if (scan.length === 0) throw new InputError("empty phase scan");
  const amps = scan.map((s) => s.amp);
  const vs = scan.map((s) => s.v[0]);
  const errs = scan.map((s) => s.stderr[0]);
  const xs = linearScale(extent(amps), [MARGIN, WIDTH - MARGIN]);
  const ys = linearScale(
    extent([...vs.map((v, i) => v - errs[i]), ...vs.map((v, i) => v + errs[i]), 0]),
    [HEIGHT - MARGIN, MARGIN],
  );
  const svg = new Svg(input.manifestHash, "Speed projection along the drift ray");
  svg.axes(xs, ys, "drift amplitude |h|", "speed projection");
  svg.line(MARGIN, ys(0), WIDTH - MARGIN, ys(0), "#bbb");
  svg.polyline(scan.map((s) => [xs(s.amp), ys(s.v[0])] as Pt), "#1f6fb2", 1.8);
  scan.forEach((s) => {
    const px = xs(s.amp);
    svg.line(px, ys(s.v[0] - s.stderr[0]), px, ys(s.v[0] + s.stderr[0]), "#1f6fb2");
    svg.circle(px, ys(s.v[0]), 3, "#1f6fb2");
  });
  return svg.render();
}

// -- rate-function: J_h(u) with its minimum marked --

export function renderRateFunction(paths: string[]): string {
  const input = loadInput(paths[0], phaseSchema);
  const rt = input.data.rate_function;
  const us = rt.u_grid.map((u) => u[0]);
  const J = rt.J;
  if (us.length === 0) throw new InputError("empty rate function table");
  const xs = linearScale(extent(us), [MARGIN, WIDTH - MARGIN]);
  const ys = linearScale(extent([...J, 0]), [HEIGHT - MARGIN, MARGIN]);
  const svg = new Svg(input.manifestHash, "Large-deviation rate of the speed");
  svg.axes(xs, ys, "velocity u", "J_h(u)");
  const interior: Pt[] = [];
  us.forEach((u, i) => {
    if (!rt.edge_flags[i]) interior.push([xs(u), ys(J[i])]);
  });
  svg.polyline(interior, "#1f6fb2", 1.8);
  us.forEach((u, i) => {
    if (rt.edge_flags[i]) svg.circle(xs(u), ys(J[i]), 2, "#c23b22");
  });
  let iMin = 0;
  J.forEach((v, i) => {
    if (v < J[iMin]) iMin = i;
  });
  svg.circle(xs(us[iMin]), ys(J[iMin]), 4, "#2e8540");
  svg.legend([
    ["J_h(u)", "#1f6fb2"],
    ["grid-edge flagged", "#c23b22"],
    ["minimum", "#2e8540"],
  ]);
  return svg.render();
}

export const FIGURES: Record<string, (paths: string[]) => string> = {
  wulff: renderWulff,
  "skeleton-overlay": renderSkeletonOverlay,
  "endpoint-hist": renderEndpointHist,
  "phase-scan": renderPhaseScan,
  "rate-function": renderRateFunction,
};
