import { ApiClient } from "./protocol.js";
import { App, createAppDom } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const elements = createAppDom(document, root);
const app = new App(document, elements, new ApiClient(window.location.origin));
app.startPolling();

declare global {
  // handy for poking at the session from the console
  interface Window {
    pwsApp: App;
  }
}
window.pwsApp = app;
