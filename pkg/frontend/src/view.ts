/** Canvas-and-buttons view bound to a TaskController. */

import { ControllerState, TaskController } from "./controller";
import { ContainerShape, hitTest, Point } from "./geometry";

const FILL = "rgba(80, 140, 255, 0.25)";
const FILL_HOVER = "rgba(80, 140, 255, 0.45)";
const FILL_SELECTED = "rgba(40, 200, 120, 0.55)";
const STROKE = "#2a6df4";

export class AnnotationView {
  readonly root: HTMLElement;
  readonly canvas: HTMLCanvasElement;
  readonly itemLabel: HTMLElement;
  readonly noneButton: HTMLButtonElement;
  readonly submitButton: HTMLButtonElement;
  readonly progressBar: HTMLElement;
  readonly message: HTMLElement;

  private image: HTMLImageElement | null = null;
  private hovered: number | null = null;
  private ctx: CanvasRenderingContext2D | null | undefined; // undefined = not probed yet

  constructor(
    parent: HTMLElement,
    private readonly controller: TaskController,
  ) {
    this.root = document.createElement("div");
    this.root.className = "annotation-tool";

    this.itemLabel = document.createElement("h2");
    this.itemLabel.className = "item-label";

    this.canvas = document.createElement("canvas");
    this.canvas.className = "scene";

    this.noneButton = document.createElement("button");
    this.noneButton.textContent = "Not stored in any container";
    this.noneButton.className = "none-button";

    this.submitButton = document.createElement("button");
    this.submitButton.textContent = "Submit";
    this.submitButton.className = "submit-button";

    this.progressBar = document.createElement("div");
    this.progressBar.className = "progress";

    this.message = document.createElement("div");
    this.message.className = "message";

    this.root.append(
      this.itemLabel,
      this.canvas,
      this.noneButton,
      this.submitButton,
      this.progressBar,
      this.message,
    );
    parent.appendChild(this.root);

    this.canvas.addEventListener("click", (event) => {
      this.controller.clickAt(this.eventPoint(event));
    });
    this.canvas.addEventListener("mousemove", (event) => {
      const containers = this.controller.state.task?.containers ?? [];
      const hit = hitTest(this.eventPoint(event), containers);
      const hovered = hit ? hit.local_id : null;
      if (hovered !== this.hovered) {
        this.hovered = hovered;
        this.paint();
      }
    });
    this.noneButton.addEventListener("click", () => this.controller.selectNone());
    this.submitButton.addEventListener("click", () => {
      void this.controller.submitSelection();
    });

    controller.onChange((state) => this.render(state));
  }

  /** Canvas-relative pixel coordinates of a mouse event. */
  eventPoint(event: MouseEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return { x: event.clientX - rect.left, y: event.clientY - rect.top };
  }

  private render(state: ControllerState): void {
    if (state.phase === "done") {
      this.itemLabel.textContent = "All tasks completed - thank you!";
      this.canvas.hidden = true;
      this.noneButton.hidden = true;
      this.submitButton.hidden = true;
    } else if (state.phase === "task" && state.task) {
      this.canvas.hidden = false;
      this.noneButton.hidden = false;
      this.submitButton.hidden = false;
      this.itemLabel.textContent = `Where is the ${state.task.item} stored?`;
      this.canvas.width = state.task.image_width ?? 800;
      this.canvas.height = state.task.image_height ?? 600;
      this.loadImage(state.task.image_url ?? null);
    } else {
      this.itemLabel.textContent = "Loading...";
    }
    if (state.progress) {
      const { answered, total } = state.progress;
      this.progressBar.textContent = `${answered} / ${total}`;
      this.progressBar.setAttribute("data-answered", String(answered));
    }
    this.message.textContent = state.error ?? "";
    this.paint();
  }

  private loadImage(url: string | null): void {
    this.image = null;
    if (!url) return;
    const image = new Image();
    image.onload = () => {
      this.image = image;
      this.paint();
    };
    image.src = url;
  }

  /** Repaint the scene; a no-op outside real browsers (no 2D context). */
  paint(): void {
    if (this.ctx === undefined) {
      try {
        this.ctx = this.canvas.getContext ? this.canvas.getContext("2d") : null;
      } catch {
        this.ctx = null;
      }
    }
    const ctx = this.ctx;
    if (!ctx) return;
    const state = this.controller.state;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.image) {
      ctx.drawImage(this.image, 0, 0, this.canvas.width, this.canvas.height);
    }
    const selection = state.selection;
    for (const container of state.task?.containers ?? []) {
      const selected =
        selection?.kind === "container" && selection.localId === container.local_id;
      ctx.fillStyle = selected
        ? FILL_SELECTED
        : container.local_id === this.hovered
          ? FILL_HOVER
          : FILL;
      ctx.strokeStyle = STROKE;
      ctx.lineWidth = 2;
      this.tracePolygon(ctx, container);
      ctx.fill();
      ctx.stroke();
    }
  }

  private tracePolygon(ctx: CanvasRenderingContext2D, container: ContainerShape): void {
    ctx.beginPath();
    container.polygon.forEach(([x, y], index) => {
      if (index === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.closePath();
  }
}
