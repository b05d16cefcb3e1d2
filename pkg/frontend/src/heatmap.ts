/**
 * Canvas heatmap of a grid field with facility markers.
 *
 * The grid is drawn on an equirectangular canvas straight from the grid
 * spec (origin + spacing); no map tiles.  Cell k = j*nx + i renders at
 * column i, row (ny-1-j) so north is up.  Committed facilities get a
 * distinct marker state and their remaining-tonnage label.
 */

import { colorFor, cssColor } from "./colorScale";
import type { FacilityInfo, GridInfo } from "./types";

export interface HeatmapOptions {
  cellPx?: number;
  markerScale?: number;
}

export interface HeatmapController {
  render(
    field: number[],
    facilities: FacilityInfo[],
    committed: Record<string, number>,
  ): void;
  renderError(message: string): void;
  readonly canvas: HTMLCanvasElement;
}

export function createHeatmap(
  container: HTMLElement,
  grid: GridInfo,
  options: HeatmapOptions = {},
): HeatmapController {
  const cellPx = options.cellPx ?? 14;
  const markerScale = options.markerScale ?? 10;
  const canvas = document.createElement("canvas");
  canvas.width = grid.nx * cellPx;
  canvas.height = grid.ny * cellPx;
  canvas.className = "heatmap";
  container.appendChild(canvas);

  // degrees spanned by the grid, for facility placement
  const kmPerDegLat = 111.2;
  const midLat = grid.origin[1] + (grid.ny * grid.dy) / kmPerDegLat / 2;
  const kmPerDegLon = kmPerDegLat * Math.cos((midLat * Math.PI) / 180);
  const widthDeg = (grid.nx * grid.dx) / kmPerDegLon;
  const heightDeg = (grid.ny * grid.dy) / kmPerDegLat;

  function toCanvas(lon: number, lat: number): [number, number] {
    const fx = (lon - grid.origin[0]) / widthDeg;
    const fy = (lat - grid.origin[1]) / heightDeg;
    return [fx * canvas.width, (1 - fy) * canvas.height];
  }

  function render(
    field: number[],
    facilities: FacilityInfo[],
    committed: Record<string, number>,
  ): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    if (field.length !== grid.nx * grid.ny) {
      renderError(
        `field has ${field.length} cells, grid needs ${grid.nx * grid.ny}`,
      );
      return;
    }
    const lo = Math.min(...field);
    const hi = Math.max(...field);
    for (let j = 0; j < grid.ny; j++) {
      for (let i = 0; i < grid.nx; i++) {
        const v = field[j * grid.nx + i];
        ctx.fillStyle = cssColor(colorFor(v, lo, hi));
        ctx.fillRect(i * cellPx, (grid.ny - 1 - j) * cellPx, cellPx, cellPx);
      }
    }
    const maxTons = Math.max(...facilities.map((f) => f.so2_tons), 1);
    for (const f of facilities) {
      const fraction = committed[f.id] ?? 0;
      const remaining = f.so2_tons * (1 - fraction);
      const [x, y] = toCanvas(f.lon, f.lat);
      const r = Math.max(3, markerScale * Math.sqrt(remaining / maxTons));
      ctx.beginPath();
      ctx.arc(x, y, r, 0, 2 * Math.PI);
      ctx.fillStyle = fraction > 0 ? "rgba(40, 120, 220, 0.85)" : "rgba(30, 30, 30, 0.8)";
      ctx.fill();
      ctx.lineWidth = fraction > 0 ? 2 : 1;
      ctx.strokeStyle = fraction > 0 ? "#0b3d91" : "#000";
      ctx.stroke();
      ctx.fillStyle = "#111";
      ctx.font = "10px sans-serif";
      ctx.fillText(`${f.id} (${Math.round(remaining).toLocaleString()} t)`, x + r + 2, y);
    }
  }

  function renderError(message: string): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#fee";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#900";
    ctx.font = "12px sans-serif";
    ctx.fillText(message, 8, 20);
  }

  return { render, renderError, canvas };
}
