/**
 * Rasterize 2-D coordinates into a color-by-label scatter PNG with a legend
 * and a title carrying the source filename and separation metric.
 */

import { drawText, GLYPH_HEIGHT, textWidth } from "./font.js";
import { encodePng } from "./png.js";

export class RenderError extends Error {}

const PALETTE: [number, number, number][] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
  [227, 119, 194],
  [127, 127, 127],
  [188, 189, 34],
  [23, 190, 207],
];

export interface RenderOptions {
  width?: number;
  height?: number;
  title?: string;
  pointRadius?: number;
}

export interface RenderResult {
  png: Buffer;
  width: number;
  height: number;
  legend: string[];
  title: string;
}

export function renderScatter(
  coords: number[][],
  labels: string[],
  options: RenderOptions = {},
): RenderResult {
  if (coords.length === 0) {
    throw new RenderError("nothing to render: empty coordinate table");
  }
  if (coords.length !== labels.length) {
    throw new RenderError(`${coords.length} points vs ${labels.length} labels`);
  }
  const width = options.width ?? 800;
  const height = options.height ?? 600;
  const radius = options.pointRadius ?? 3;
  const title = options.title ?? "";
  const pixels = new Uint8Array(width * height * 3).fill(255);

  const put = (x: number, y: number, rgb: [number, number, number]) => {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const at = (y * width + x) * 3;
    pixels[at] = rgb[0];
    pixels[at + 1] = rgb[1];
    pixels[at + 2] = rgb[2];
  };

  const legend = [...new Set(labels)].sort();
  const colorOf = new Map(legend.map((label, i) => [label, PALETTE[i % PALETTE.length]]));

  const margin = 40;
  const xs = coords.map((c) => c[0]);
  const ys = coords.map((c) => c[1]);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;
  const plotW = width - 2 * margin;
  const plotH = height - 2 * margin;

  // frame
  const grey: [number, number, number] = [200, 200, 200];
  for (let x = margin; x <= width - margin; x++) {
    put(x, margin, grey);
    put(x, height - margin, grey);
  }
  for (let y = margin; y <= height - margin; y++) {
    put(margin, y, grey);
    put(width - margin, y, grey);
  }

  coords.forEach((point, i) => {
    const px = margin + Math.round(((point[0] - xMin) / xSpan) * plotW);
    const py = height - margin - Math.round(((point[1] - yMin) / ySpan) * plotH);
    const color = colorOf.get(labels[i])!;
    for (let dx = -radius; dx <= radius; dx++) {
      for (let dy = -radius; dy <= radius; dy++) {
        if (dx * dx + dy * dy <= radius * radius) {
          put(px + dx, py + dy, color);
        }
      }
    }
  });

  const black: [number, number, number] = [0, 0, 0];
  drawText(title, 8, 8, (x, y) => put(x, y, black));

  // legend block, top-right, one swatch + label per entry
  const legendWidth = Math.max(...legend.map(textWidth)) + 24;
  const lx = width - margin - legendWidth;
  legend.forEach((label, i) => {
    const ly = margin + 8 + i * (GLYPH_HEIGHT + 6);
    const color = colorOf.get(label)!;
    for (let dx = 0; dx < 10; dx++) {
      for (let dy = 0; dy < GLYPH_HEIGHT; dy++) {
        put(lx + dx, ly + dy, color);
      }
    }
    drawText(label, lx + 14, ly, (x, y) => put(x, y, black));
  });

  return {
    png: encodePng(width, height, pixels),
    width,
    height,
    legend,
    title,
  };
}
