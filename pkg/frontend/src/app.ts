import { ApiClient, ApiError } from "./api.js";
import { SessionStore } from "./state.js";
import type { GenerateResult, MetricView, SessionView } from "./types.js";
import {
  renderGenerateStage, renderProcessStage, renderProductStage,
  renderResourceStage, renderStageHeader, showViolations,
} from "./views.js";

// Single-page wizard: one screen per configuration stage.  The session id
// lives in the URL hash so a refresh restores the same view from the service.

const DEFAULT_SERVICE = "http://127.0.0.1:8420";

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? DEFAULT_SERVICE;
}

export async function boot(root: HTMLElement): Promise<SessionStore> {
  const api = new ApiClient(serviceUrl());
  let sessionId = window.location.hash.replace(/^#/, "");
  if (!sessionId) {
    const created = await api.createSession();
    sessionId = created.id;
    window.location.hash = sessionId;
  }
  const store = new SessionStore(api, sessionId);
  let metrics: MetricView | null = null;
  let generation: GenerateResult | null = null;

  const rerender = (view: SessionView): void => {
    root.textContent = "";
    root.append(renderStageHeader(view));
    if (view.stage === "product") {
      root.append(renderProductStage(view, {
        submit: (selected) => {
          store.mutate((a, id) => a.postProduct(id, selected)).catch((err) => fail(err));
        },
      }));
    } else if (view.stage === "process") {
      root.append(renderProcessStage(view, {
        take: (decision, value) => {
          store.mutate((a, id) => a.postDecision(id, decision, value)).catch((err) => fail(err));
        },
        rollback: (count) => {
          store.mutate((a, id) => a.postRollback(id, count)).catch((err) => fail(err));
        },
        finish: () => {
          store.mutate((a, id) => a.postFinish(id)).catch((err) => fail(err));
        },
      }));
    } else if (view.stage === "resource") {
      root.append(renderResourceStage(view, {
        submit: (selected) => {
          store.mutate((a, id) => a.postResource(id, selected)).catch((err) => fail(err));
        },
      }));
    } else {
      root.append(renderGenerateStage(view, metrics, generation, {
        generate: () => {
          api.postGenerate(sessionId).then((result) => {
            generation = result;
            if (store.view) rerender(store.view);
          }).catch((err) => fail(err));
        },
      }));
      if (!metrics) {
        api.getMetrics(sessionId).then((m) => {
          metrics = m;
          if (store.view) rerender(store.view);
        }).catch(() => undefined);
      }
    }
  };

  const fail = (err: unknown): void => {
    if (err instanceof ApiError && (err.violations.length || err.pending.length)) {
      const section = root.querySelector<HTMLElement>(".stage");
      if (section) showViolations(section, err.violations.length ? err.violations : err.pending);
      return;
    }
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = String(err instanceof Error ? err.message : err);
    root.prepend(banner);
  };

  store.subscribe(rerender);
  await store.refresh();
  return store;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(document.getElementById("app")!);
}
