/** Pixel-space hit-testing for container polygons (screen coords, y down). */

export interface Point {
  x: number;
  y: number;
}

export type PolygonPoints = Array<[number, number]>;

export interface ContainerShape {
  local_id: number;
  polygon: PolygonPoints;
}

/** Even-odd ray-cast point-in-polygon test. */
export function pointInPolygon(p: Point, polygon: PolygonPoints): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const [xi, yi] = polygon[i];
    const [xj, yj] = polygon[j];
    const crosses = yi > p.y !== yj > p.y;
    if (crosses && p.x < ((xj - xi) * (p.y - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

export function polygonArea(polygon: PolygonPoints): number {
  let acc = 0;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    acc += polygon[j][0] * polygon[i][1] - polygon[i][0] * polygon[j][1];
  }
  return Math.abs(acc) / 2;
}

/**
 * The container under the point, or null when the click misses every
 * polygon. Nested polygons resolve to the smallest-area one (drawers sit
 * visually inside cabinet fronts).
 */
export function hitTest(p: Point, containers: ContainerShape[]): ContainerShape | null {
  let best: ContainerShape | null = null;
  let bestArea = Infinity;
  for (const container of containers) {
    if (!pointInPolygon(p, container.polygon)) continue;
    const area = polygonArea(container.polygon);
    if (area < bestArea) {
      best = container;
      bestArea = area;
    }
  }
  return best;
}
