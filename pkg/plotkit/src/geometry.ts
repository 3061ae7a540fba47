// Plane geometry helpers for rendering norm balls and shapes.

export type Pt = [number, number];

// Vertices of the bounded region {y : (n_i, y) <= c_i}, sorted by angle.
export function halfplanePolygon(normals: Pt[], offsets: number[]): Pt[] {
  const pts: Pt[] = [];
  const m = normals.length;
  for (let i = 0; i < m; i += 1) {
    for (let j = i + 1; j < m; j += 1) {
      const [a1, b1] = normals[i];
      const [a2, b2] = normals[j];
      const det = a1 * b2 - a2 * b1;
      if (Math.abs(det) < 1e-12) continue;
      const x = (offsets[i] * b2 - offsets[j] * b1) / det;
      const y = (a1 * offsets[j] - a2 * offsets[i]) / det;
      let feasible = true;
      for (let k = 0; k < m; k += 1) {
        if (normals[k][0] * x + normals[k][1] * y > offsets[k] * (1 + 1e-9) + 1e-12) {
          feasible = false;
          break;
        }
      }
      if (feasible) pts.push([x, y]);
    }
  }
  return sortByAngle(dedupe(pts));
}

// The ball {y : max_j (v_j, y) <= K} of the support-function norm whose
// polar polytope has vertices v_j.
export function normBall(vertices: Pt[], K: number): Pt[] {
  return halfplanePolygon(vertices, vertices.map(() => K));
}

export function sortByAngle(pts: Pt[]): Pt[] {
  return [...pts].sort(
    (p, q) => Math.atan2(p[1], p[0]) - Math.atan2(q[1], q[0]),
  );
}

function dedupe(pts: Pt[]): Pt[] {
  const seen = new Set<string>();
  const out: Pt[] = [];
  for (const p of pts) {
    const key = `${Math.round(p[0] * 1e9)}:${Math.round(p[1] * 1e9)}`;
    if (!seen.has(key)) {
      seen.add(key);
      out.push(p);
    }
  }
  return out;
}

export function translate(pts: Pt[], dx: number, dy: number): Pt[] {
  return pts.map(([x, y]) => [x + dx, y + dy] as Pt);
}
