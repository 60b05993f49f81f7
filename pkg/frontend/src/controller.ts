/** Task-flow state machine. The server is the source of truth: reloading
 * mid-batch resumes at whatever /api/tasks/next returns. */

import { ApiClient, ApiError, Progress, TaskPayload } from "./api";
import { hitTest, Point } from "./geometry";

export type Selection = { kind: "container"; localId: number } | { kind: "none" } | null;

export interface ControllerState {
  phase: "loading" | "task" | "done";
  task: TaskPayload | null;
  selection: Selection;
  progress: Progress | null;
  error: string | null;
}

export class TaskController {
  state: ControllerState = {
    phase: "loading",
    task: null,
    selection: null,
    progress: null,
    error: null,
  };

  private listeners: Array<(state: ControllerState) => void> = [];

  constructor(
    private readonly api: ApiClient,
    private readonly annotator: string,
  ) {}

  onChange(listener: (state: ControllerState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(update: Partial<ControllerState>): void {
    this.state = { ...this.state, ...update };
    this.emit();
  }

  async start(): Promise<void> {
    this.patch({ phase: "loading", error: null });
    const [task, progress] = await Promise.all([
      this.api.nextTask(this.annotator),
      this.api.progress(this.annotator),
    ]);
    if (task.done) {
      this.patch({ phase: "done", task: null, selection: null, progress });
    } else {
      this.patch({ phase: "task", task, selection: null, progress });
    }
  }

  /** Select a container by id; ids not present in the task payload are
   * rejected, so an invalid id can never reach the server. */
  selectContainer(localId: number): void {
    const containers = this.state.task?.containers ?? [];
    if (!containers.some((c) => c.local_id === localId)) {
      this.patch({ error: `container ${localId} is not part of this task` });
      return;
    }
    this.patch({ selection: { kind: "container", localId }, error: null });
  }

  selectNone(): void {
    this.patch({ selection: { kind: "none" }, error: null });
  }

  /** A click selects the smallest polygon containing the point; clicks
   * outside every polygon change nothing. */
  clickAt(point: Point): void {
    if (this.state.phase !== "task" || !this.state.task) return;
    const hit = hitTest(point, this.state.task.containers ?? []);
    if (hit !== null) {
      this.selectContainer(hit.local_id);
    }
  }

  async submitSelection(): Promise<void> {
    const { task, selection } = this.state;
    if (this.state.phase !== "task" || !task || !task.pair_id) return;
    if (selection === null) {
      this.patch({ error: "select a container or None first" });
      return;
    }
    const choice = selection.kind === "container" ? selection.localId : null;
    try {
      await this.api.submit(this.annotator, task.pair_id, choice);
    } catch (error) {
      if (error instanceof ApiError) {
        this.patch({ error: error.message });
        return; // validation failure: stay on the task
      }
      throw error;
    }
    await this.start(); // advance only after the server acknowledged
  }
}
