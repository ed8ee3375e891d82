import { ApiClient, apiBaseFromDocument } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app container");
}
const api = new ApiClient(apiBaseFromDocument(document));
void new App(root, api, window.sessionStorage).start();
