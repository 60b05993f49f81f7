// @vitest-environment jsdom
/** DOM-level checks: rendering, click dispatch through the canvas handler,
 * the always-present None button, and the done screen. */

import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, TaskPayload } from "../src/api";
import { TaskController } from "../src/controller";
import { AnnotationView } from "../src/view";

const square = (x0: number, y0: number, side: number): Array<[number, number]> => [
  [x0, y0],
  [x0 + side, y0],
  [x0 + side, y0 + side],
  [x0, y0 + side],
];

function makeTask(): TaskPayload {
  return {
    done: false,
    pair_id: "pair-1",
    item: "mug",
    image_id: "kitchen-a",
    image_url: "/images/kitchen-a",
    image_width: 800,
    image_height: 600,
    containers: [
      { local_id: 1, polygon: square(10, 10, 100) },
      { local_id: 2, polygon: square(200, 10, 100) },
    ],
  };
}

class FakeApi extends ApiClient {
  submissions: Array<{ pairId: string; choice: number | null }> = [];
  tasks: TaskPayload[];

  constructor(tasks: TaskPayload[]) {
    super("");
    this.tasks = tasks;
  }

  override async nextTask(): Promise<TaskPayload> {
    return this.tasks[0] ?? { done: true };
  }

  override async submit(_a: string, pairId: string, choice: number | null): Promise<void> {
    this.submissions.push({ pairId, choice });
    this.tasks.shift();
  }

  override async progress() {
    return { answered: this.submissions.length, remaining: this.tasks.length, total: 3 };
  }
}

function click(canvas: HTMLCanvasElement, x: number, y: number): void {
  canvas.dispatchEvent(new MouseEvent("click", { clientX: x, clientY: y, bubbles: true }));
}

describe("AnnotationView", () => {
  let api: FakeApi;
  let controller: TaskController;
  let view: AnnotationView;

  beforeEach(async () => {
    document.body.innerHTML = "";
    api = new FakeApi([makeTask()]);
    controller = new TaskController(api, "tester");
    view = new AnnotationView(document.body, controller);
    await controller.start();
  });

  it("shows the item name prominently", () => {
    expect(view.itemLabel.textContent).toContain("mug");
  });

  it("always offers a None button", () => {
    expect(view.noneButton.isConnected).toBe(true);
    expect(view.noneButton.hidden).toBe(false);
    expect(view.noneButton.textContent).toMatch(/not stored/i);
  });

  it("canvas click selects the hit container", () => {
    click(view.canvas, 50, 50);
    expect(controller.state.selection).toEqual({ kind: "container", localId: 1 });
    click(view.canvas, 250, 50);
    expect(controller.state.selection).toEqual({ kind: "container", localId: 2 });
  });

  it("out-of-polygon click leaves the selection unchanged", () => {
    click(view.canvas, 500, 500);
    expect(controller.state.selection).toBeNull();
  });

  it("submit advances only after acknowledgment and updates progress", async () => {
    click(view.canvas, 50, 50);
    view.submitButton.click();
    await vi.waitFor(() => expect(api.submissions).toHaveLength(1));
    await vi.waitFor(() => expect(controller.state.phase).toBe("done"));
    expect(api.submissions[0]).toEqual({ pairId: "pair-1", choice: 1 });
    expect(view.progressBar.textContent).toContain("1");
  });

  it("None flows through as a null choice", async () => {
    view.noneButton.click();
    expect(controller.state.selection).toEqual({ kind: "none" });
    view.submitButton.click();
    await vi.waitFor(() => expect(api.submissions).toHaveLength(1));
    expect(api.submissions[0].choice).toBeNull();
  });

  it("renders the completion screen when the batch is done", async () => {
    click(view.canvas, 50, 50);
    await controller.submitSelection();
    expect(controller.state.phase).toBe("done");
    expect(view.itemLabel.textContent).toMatch(/completed/i);
    expect(view.canvas.hidden).toBe(true);
  });

  it("cannot submit a container id that is not in the task payload", () => {
    controller.selectContainer(99);
    expect(controller.state.selection).toBeNull();
    expect(controller.state.error).toContain("99");
  });
});
