// Browser entry point: credentials from localStorage (or prompt), then boot.

import { ApiClient } from "./api.js";
import { App } from "./app.js";

function credential(key: string, label: string): string {
  let value = localStorage.getItem(key) || "";
  if (!value) {
    value = window.prompt(label) || "";
    localStorage.setItem(key, value);
  }
  return value;
}

function boot(): void {
  const annotatorId = credential("annotator_id", "Annotator id:");
  const token = credential("annotator_token", "Access token:");
  const api = new ApiClient({ annotatorId, token });
  const taskRoot = document.getElementById("task")!;
  const progressRoot = document.getElementById("progress")!;
  const app = new App(api, annotatorId, taskRoot, progressRoot);

  app.queue.installOnlineFlush();
  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) return;
    // Shift toggles which binary dimension y/n feeds; plain y/n sets clarity.
    app.handleKey(event.key, event.shiftKey ? "relevance" : "clarity");
  });

  app.start().catch((err) => {
    const banner = document.createElement("div");
    banner.className = "banner";
    banner.setAttribute("role", "alert");
    banner.textContent = `failed to load tasks: ${err}`;
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.addEventListener("click", () => window.location.reload());
    banner.appendChild(retry);
    taskRoot.textContent = "";
    taskRoot.appendChild(banner);
  });
}

boot();
