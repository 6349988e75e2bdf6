import { ApiClient } from "./api.js";
import { ReportView } from "./reportView.js";
import { StepEditor } from "./stepEditor.js";

/** Hash routing: "#author" (default) or "#report/<sessionId>". */
export function mount(root: HTMLElement, baseUrl = ""): void {
  const api = new ApiClient(baseUrl);

  function route(): void {
    root.textContent = "";
    const hash = window.location.hash;
    if (hash.startsWith("#report/")) {
      const sessionId = hash.slice("#report/".length);
      void new ReportView(root, api).load(sessionId);
      return;
    }
    new StepEditor(root, api);
  }

  window.addEventListener("hashchange", route);
  route();
}

declare global {
  interface Window {
    TIPSMON_SERVICE_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!, window.TIPSMON_SERVICE_URL ?? "");
}
