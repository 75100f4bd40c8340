/**
 * Two-component PCA via a cyclic Jacobi eigensolver on the covariance
 * matrix.  Deterministic given input ordering; each output axis is flipped
 * so its largest-magnitude coordinate is positive.
 */

export class ProjectionError extends Error {}

export function columnMeans(matrix: number[][]): number[] {
  const n = matrix.length;
  const d = matrix[0].length;
  const means = new Array(d).fill(0);
  for (const row of matrix) {
    for (let j = 0; j < d; j++) means[j] += row[j];
  }
  for (let j = 0; j < d; j++) means[j] /= n;
  return means;
}

export function covariance(matrix: number[][]): number[][] {
  const n = matrix.length;
  const d = matrix[0].length;
  const means = columnMeans(matrix);
  const cov: number[][] = Array.from({ length: d }, () => new Array(d).fill(0));
  for (const row of matrix) {
    for (let i = 0; i < d; i++) {
      const ci = row[i] - means[i];
      for (let j = i; j < d; j++) {
        cov[i][j] += ci * (row[j] - means[j]);
      }
    }
  }
  const denom = n - 1;
  for (let i = 0; i < d; i++) {
    for (let j = i; j < d; j++) {
      cov[i][j] /= denom;
      cov[j][i] = cov[i][j];
    }
  }
  return cov;
}

/** Eigen-decomposition of a symmetric matrix; returns values descending. */
export function jacobiEigen(
  symmetric: number[][],
  maxSweeps = 100,
  tolerance = 1e-14,
): { values: number[]; vectors: number[][] } {
  const d = symmetric.length;
  const a = symmetric.map((row) => row.slice());
  let scale = 0;
  for (const row of a) for (const x of row) scale += x * x;
  scale = Math.sqrt(scale) + Number.MIN_VALUE;
  // eigenvector columns accumulate into v
  const v: number[][] = Array.from({ length: d }, (_, i) =>
    Array.from({ length: d }, (_, j) => (i === j ? 1 : 0)),
  );
  for (let sweep = 0; sweep < maxSweeps; sweep++) {
    let off = 0;
    for (let i = 0; i < d; i++) {
      for (let j = i + 1; j < d; j++) off += a[i][j] * a[i][j];
    }
    if (Math.sqrt(off) < tolerance * scale) break;
    for (let p = 0; p < d; p++) {
      for (let q = p + 1; q < d; q++) {
        if (Math.abs(a[p][q]) < Number.MIN_VALUE) continue;
        const theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const t = Math.sign(theta || 1) / (Math.abs(theta) + Math.sqrt(theta * theta + 1));
        const c = 1 / Math.sqrt(t * t + 1);
        const s = t * c;
        for (let k = 0; k < d; k++) {
          const akp = a[k][p];
          const akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (let k = 0; k < d; k++) {
          const apk = a[p][k];
          const aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (let k = 0; k < d; k++) {
          const vkp = v[k][p];
          const vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  const order = Array.from({ length: d }, (_, i) => i).sort((x, y) => a[y][y] - a[x][x]);
  return {
    values: order.map((i) => a[i][i]),
    vectors: order.map((i) => v.map((row) => row[i])), // vectors[r] = r-th eigenvector
  };
}

export function projectPca(matrix: number[][]): number[][] {
  if (matrix.length < 3) {
    throw new ProjectionError(`need at least 3 points, got ${matrix.length}`);
  }
  const means = columnMeans(matrix);
  const { vectors } = jacobiEigen(covariance(matrix));
  const axes = [vectors[0], vectors[1] ?? vectors[0].map(() => 0)];
  const coords = matrix.map((row) => {
    const centered = row.map((x, j) => x - means[j]);
    return axes.map((axis) => centered.reduce((acc, x, j) => acc + x * axis[j], 0));
  });
  // sign convention: the largest-magnitude coordinate of each axis is positive
  for (let axis = 0; axis < 2; axis++) {
    let best = 0;
    for (const point of coords) {
      if (Math.abs(point[axis]) > Math.abs(best)) best = point[axis];
    }
    if (best < 0) {
      for (const point of coords) point[axis] = -point[axis];
    }
  }
  return coords;
}
