import { ApiClient } from "./api.js";
import { AppStore } from "./store.js";
import { render } from "./view.js";

declare global {
  interface Window {
    FOUNTAIN_API_BASE?: string;
  }
}

/** Mount the app: render on store changes, delegate DOM events to store
 * actions. Returns the store (tests drive and inspect it directly). */
export function mount(root: HTMLElement, api: ApiClient): AppStore {
  const store = new AppStore(api);

  const redraw = () => {
    root.innerHTML = render(store.getState());
  };
  store.subscribe(redraw);
  redraw();

  root.addEventListener("submit", (event) => {
    const form = event.target as HTMLElement;
    if (form.dataset["form"] === "deviation") {
      event.preventDefault();
      void store.submit();
    }
  });

  root.addEventListener("input", (event) => {
    const el = event.target as HTMLInputElement | HTMLTextAreaElement;
    switch (el.dataset["field"]) {
      case "partRef":
        store.setField("partRef", el.value);
        break;
      case "currentDefinition":
        store.setField("currentDefinition", el.value);
        break;
      case "requestedDeviation":
        store.setField("requestedDeviation", el.value);
        break;
      case "riskEvaluation":
        store.editRiskEvaluation(el.value);
        break;
      case "justification":
        store.setJustification(Number(el.dataset["failure"]), el.value);
        break;
    }
  });

  root.addEventListener("click", (event) => {
    const el = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (!el) return;
    switch (el.dataset["action"]) {
      case "toggle-explanation":
        void store.toggleExplanation(Number(el.dataset["failure"]));
        break;
      case "feedback-useful":
        void store.sendFeedback(Number(el.dataset["item"]), "useful");
        break;
      case "feedback-not-useful":
        void store.sendFeedback(Number(el.dataset["item"]), "not_useful");
        break;
      case "insert-risk-text":
        void store.insertRiskText(Number(el.dataset["failure"]));
        break;
      case "suggestion":
        void store.selectSuggestion(el.dataset["name"] ?? "");
        break;
      case "retry":
        void store.submit();
        break;
    }
  });

  return store;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = window.FOUNTAIN_API_BASE ?? "";
  mount(document.getElementById("app") as HTMLElement, new ApiClient(base));
}
