import { ApiClient } from "./api";
import { TaskController } from "./controller";
import { AnnotationView } from "./view";

const params = new URLSearchParams(window.location.search);
const annotator = params.get("annotator") ?? "";

const mount = document.getElementById("app") ?? document.body;
if (!annotator) {
  mount.textContent = "Add ?annotator=YOUR_ID to the URL to begin.";
} else {
  const controller = new TaskController(new ApiClient(""), annotator);
  new AnnotationView(mount, controller);
  void controller.start();
}
