/** Thin client for the annotation service HTTP API. */

import type { ContainerShape } from "./geometry";

export interface TaskPayload {
  done: boolean;
  pair_id?: string;
  item?: string;
  image_id?: string;
  image_url?: string;
  image_width?: number;
  image_height?: number;
  containers?: ContainerShape[];
}

export interface Progress {
  answered: number;
  remaining: number;
  total: number;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function orThrow(response: Response): Promise<any> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body.detail) detail = String(body.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(detail, response.status);
  }
  return response.json();
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  nextTask(annotator: string): Promise<TaskPayload> {
    return this.fetchFn(
      `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    ).then(orThrow);
  }

  submit(annotator: string, pairId: string, containerLocalId: number | null): Promise<void> {
    return this.fetchFn(`${this.baseUrl}/api/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        annotator_id: annotator,
        pair_id: pairId,
        container_local_id: containerLocalId,
      }),
    }).then(orThrow);
  }

  progress(annotator: string): Promise<Progress> {
    return this.fetchFn(
      `${this.baseUrl}/api/progress?annotator=${encodeURIComponent(annotator)}`,
    ).then(orThrow);
  }
}
