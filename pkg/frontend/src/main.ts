import { ApiClient } from "./api.js";
import { ChatController } from "./state.js";
import { DomView } from "./view.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8000";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
const view = new DomView(root);
const controller = new ChatController(new ApiClient(apiBase), view);
view.bind(controller);
void controller.loadPatients();
