/**
 * A small stochastic neighbor embedding with a fixed seed: Gaussian input
 * affinities (bandwidth = median pairwise distance), Student-t output
 * affinities, plain gradient descent.  Offered as the `sne` projection
 * method; PCA remains the default and the only oracle-checked path.
 */

import { ProjectionError } from "./pca.js";

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function projectSne(matrix: number[][], seed: number, iterations = 250): number[][] {
  const n = matrix.length;
  if (n < 3) throw new ProjectionError(`need at least 3 points, got ${n}`);
  const sq = (a: number[], b: number[]) => {
    let acc = 0;
    for (let k = 0; k < a.length; k++) {
      const d = a[k] - b[k];
      acc += d * d;
    }
    return acc;
  };
  const d2: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
  const all: number[] = [];
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      const v = sq(matrix[i], matrix[j]);
      d2[i][j] = v;
      d2[j][i] = v;
      all.push(v);
    }
  }
  all.sort((a, b) => a - b);
  const sigma2 = Math.max(all[Math.floor(all.length / 2)], 1e-12);

  // symmetric normalized input affinities
  const p: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
  let pSum = 0;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      if (i !== j) {
        p[i][j] = Math.exp(-d2[i][j] / (2 * sigma2));
        pSum += p[i][j];
      }
    }
  }
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) p[i][j] = Math.max(p[i][j] / pSum, 1e-12);
  }

  const rand = mulberry32(seed);
  const y: number[][] = Array.from({ length: n }, () => [
    (rand() - 0.5) * 1e-2,
    (rand() - 0.5) * 1e-2,
  ]);
  const rate = 50;
  for (let iter = 0; iter < iterations; iter++) {
    const q: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
    let qSum = 0;
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        if (i !== j) {
          q[i][j] = 1 / (1 + sq(y[i], y[j]));
          qSum += q[i][j];
        }
      }
    }
    for (let i = 0; i < n; i++) {
      const grad = [0, 0];
      for (let j = 0; j < n; j++) {
        if (i === j) continue;
        const coeff = 4 * (p[i][j] - q[i][j] / qSum) * q[i][j];
        grad[0] += coeff * (y[i][0] - y[j][0]);
        grad[1] += coeff * (y[i][1] - y[j][1]);
      }
      y[i][0] -= rate * grad[0];
      y[i][1] -= rate * grad[1];
    }
  }
  return y;
}
