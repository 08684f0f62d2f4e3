/**
 * Entry point: read the session from the query string and mount the
 * app. ?tagger=t1&phase=1&api=http://host:port ; api defaults to the
 * page's own origin.
 */

import { ServiceClient } from "./api.js";
import { AnnotationApp } from "./app.js";

function mount(): void {
  const params = new URLSearchParams(window.location.search);
  const tagger = params.get("tagger") ?? "";
  const phase = Number(params.get("phase") ?? "1");
  const api = params.get("api") ?? window.location.origin;
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app element");
  }
  if (tagger === "") {
    root.innerHTML = `
      <form class="session-form">
        <label>Tagger <input name="tagger" required></label>
        <label>Phase <input name="phase" type="number" value="1" min="1" max="2"></label>
        <button type="submit">Start tagging</button>
      </form>
    `;
    const form = root.querySelector("form") as HTMLFormElement;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(form);
      const next = new URLSearchParams(window.location.search);
      next.set("tagger", String(data.get("tagger")));
      next.set("phase", String(data.get("phase")));
      window.location.search = next.toString();
    });
    return;
  }
  const app = new AnnotationApp(root, new ServiceClient(api), { tagger, phase });
  void app.start();
}

mount();
