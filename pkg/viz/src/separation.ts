/**
 * Mean intra-class over mean inter-class pairwise Euclidean distance.
 * Lower means tighter same-label clusters relative to between-label gaps.
 * Matches the training side's metric on shared exports to high precision.
 */

export class MetricError extends Error {}

export function separationMetric(matrix: number[][], labels: string[]): number {
  if (matrix.length !== labels.length) {
    throw new MetricError(`${matrix.length} rows vs ${labels.length} labels`);
  }
  const counts = new Map<string, number>();
  for (const label of labels) counts.set(label, (counts.get(label) ?? 0) + 1);
  if (counts.size < 2) {
    throw new MetricError("separation metric needs at least two classes");
  }
  for (const [label, count] of [...counts.entries()].sort()) {
    if (count < 2) throw new MetricError(`class ${JSON.stringify(label)} has a single point`);
  }
  let intraSum = 0;
  let intraCount = 0;
  let interSum = 0;
  let interCount = 0;
  const n = matrix.length;
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      let sq = 0;
      const a = matrix[i];
      const b = matrix[j];
      for (let k = 0; k < a.length; k++) {
        const d = a[k] - b[k];
        sq += d * d;
      }
      const dist = Math.sqrt(sq);
      if (labels[i] === labels[j]) {
        intraSum += dist;
        intraCount += 1;
      } else {
        interSum += dist;
        interCount += 1;
      }
    }
  }
  const inter = interSum / interCount;
  if (inter === 0) throw new MetricError("all points coincide; separation is 0/0");
  return intraSum / intraCount / inter;
}
