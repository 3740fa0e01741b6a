import { buildTree, queueSummary, type TreeNode } from "./state.js";
import type { GenerateResult, MetricView, SessionView } from "./types.js";

// Plain-DOM stage views.  Enable/disable state mirrors the service view; the
// only client-side logic is form bookkeeping.

export interface ProductHandlers {
  submit(selected: string[]): void;
}

export interface ProcessHandlers {
  take(decision: string, value: boolean | string): void;
  rollback(count: number): void;
  finish(): void;
}

export interface ResourceHandlers {
  submit(selected: string[]): void;
}

export interface GenerateHandlers {
  generate(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderStageHeader(view: SessionView): HTMLElement {
  const header = el("nav", "stage-header");
  for (const stage of ["product", "process", "resource", "done"] as const) {
    const step = el("span", "stage-step", stage);
    if (stage === view.stage) step.classList.add("active");
    header.append(step);
  }
  return header;
}

// --- product stage ----------------------------------------------------------

function renderFeatureNode(
  node: TreeNode,
  view: SessionView,
  form: HTMLElement,
  depth: number,
): void {
  const f = node.feature;
  const preselected = new Set(view.product.preselected);
  const row = el("div", "feature-row");
  row.style.marginLeft = `${depth}em`;

  const parentGroup = view.models.product_fm.features.find((x) => x.id === f.parent)?.group;
  if (f.parent === null) {
    row.append(el("span", "feature-root", f.id));
  } else if (parentGroup === "alternative") {
    const radio = el("input");
    radio.type = "radio";
    radio.name = `group-${f.parent}`;
    radio.value = f.id;
    radio.id = `feature-${f.id}`;
    row.append(radio, labelFor(f.id, f.name));
  } else if (parentGroup === "or") {
    const box = el("input");
    box.type = "checkbox";
    box.value = f.id;
    box.id = `feature-${f.id}`;
    box.className = "or-member";
    row.append(box, labelFor(f.id, f.name));
  } else {
    const box = el("input");
    box.type = "checkbox";
    box.value = f.id;
    box.id = `feature-${f.id}`;
    if (f.variability === "mandatory" || preselected.has(f.id)) {
      // mandatory parts are pre-checked and locked; the service includes them
      box.checked = true;
      box.disabled = true;
      box.className = "mandatory";
    }
    row.append(box, labelFor(f.id, f.name));
  }
  form.append(row);
  for (const child of node.children) {
    renderFeatureNode(child, view, form, depth + 1);
  }
}

function labelFor(id: string, name: string): HTMLLabelElement {
  const label = el("label", undefined, name === id ? id : `${id} (${name})`);
  label.htmlFor = `feature-${id}`;
  return label;
}

export function renderProductStage(view: SessionView, handlers: ProductHandlers): HTMLElement {
  const container = el("section", "stage product-stage");
  container.append(el("h2", undefined, "1. Configure the product"));
  const form = el("form");
  renderFeatureNode(buildTree(view.models.product_fm), view, form, 0);
  const errors = el("div", "errors");
  errors.id = "product-errors";
  const submit = el("button", "submit", "Apply product configuration");
  submit.type = "submit";
  form.append(errors, submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const selected: string[] = [...view.product.preselected];
    form.querySelectorAll<HTMLInputElement>("input:checked").forEach((input) => {
      selected.push(input.value);
    });
    handlers.submit([...new Set(selected)].sort());
  });
  container.append(form);
  return container;
}

export function showViolations(container: HTMLElement, violations: string[]): void {
  const errors = container.querySelector(".errors");
  if (!errors) return;
  errors.textContent = "";
  for (const violation of violations) {
    errors.append(el("p", "violation", violation));
  }
}

// --- process stage ----------------------------------------------------------

export function renderProcessStage(view: SessionView, handlers: ProcessHandlers): HTMLElement {
  const container = el("section", "stage process-stage");
  container.append(el("h2", undefined, "2. Explore the production sequence"));
  const layout = el("div", "process-layout");

  const cards = el("div", "decision-cards");
  const questions = new Map(view.models.process_dm.decisions.map((d) => [d.id, d.question]));
  if (view.process.visible.length === 0) {
    const done = el("div", "finish-cta");
    done.append(el("p", undefined, "No steps left to order."));
    const finish = el("button", "finish", "Finish process stage");
    finish.addEventListener("click", () => handlers.finish());
    done.append(finish);
    cards.append(done);
  }
  for (const decision of view.process.visible) {
    const card = el("div", "decision-card");
    card.dataset.decision = decision;
    card.append(el("h3", undefined, decision));
    card.append(el("p", "question", questions.get(decision) ?? ""));
    const takeButton = el("button", "take", "Do this step next");
    takeButton.addEventListener("click", () => handlers.take(decision, true));
    card.append(takeButton);
    cards.append(card);
  }

  const queuePanel = el("aside", "queue-panel");
  queuePanel.append(el("h3", undefined, "Production sequence"));
  const list = el("ol", "queue");
  for (const line of queueSummary(view)) {
    list.append(el("li", "queue-entry", line));
  }
  queuePanel.append(list);
  const rollback = el("button", "rollback", "Roll back last decision");
  rollback.disabled = view.process.queue.filter((q) => q.origin === "user").length === 0;
  rollback.addEventListener("click", () => handlers.rollback(1));
  queuePanel.append(rollback);

  layout.append(cards, queuePanel);
  const errors = el("div", "errors");
  container.append(layout, errors);
  return container;
}

// --- resource stage ---------------------------------------------------------

export function renderResourceStage(view: SessionView, handlers: ResourceHandlers): HTMLElement {
  const container = el("section", "stage resource-stage");
  container.append(el("h2", undefined, "3. Pick the production resources"));
  const form = el("form");
  const required = new Set(view.resource.required);
  const requiredGroups = new Set(view.resource.required_groups);
  const locked = new Set(view.resource.locked);

  const tree = buildTree(view.models.resource_fm);
  const walk = (node: TreeNode, depth: number): void => {
    const f = node.feature;
    const row = el("div", "resource-row");
    row.style.marginLeft = `${depth}em`;
    if (f.parent === null) {
      row.append(el("span", "feature-root", f.id));
    } else if (f.abstract) {
      const title = el("span", "resource-group", f.id);
      if (requiredGroups.has(f.id)) {
        title.classList.add("required");
        row.append(title, el("em", "required-tag", " required, pick at least one member"));
      } else if (locked.has(f.id)) {
        title.classList.add("locked");
        row.append(title, el("em", "locked-tag", " not needed by this sequence"));
      } else {
        row.append(title);
      }
    } else {
      const box = el("input");
      box.type = "checkbox";
      box.value = f.id;
      box.id = `resource-${f.id}`;
      if (required.has(f.id)) {
        box.checked = true;
      }
      if (locked.has(f.id)) {
        box.disabled = true;
        box.className = "locked";
      }
      const label = el("label", undefined, f.id);
      label.htmlFor = `resource-${f.id}`;
      row.append(box, label);
    }
    form.append(row);
    for (const child of node.children) walk(child, depth + 1);
  };
  walk(tree, 0);

  const errors = el("div", "errors");
  const submit = el("button", "submit", "Apply resource configuration");
  submit.type = "submit";
  form.append(errors, submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const selected: string[] = [];
    form.querySelectorAll<HTMLInputElement>("input:checked").forEach((input) => {
      if (!input.disabled) selected.push(input.value);
    });
    handlers.submit(selected.sort());
  });
  container.append(form);
  return container;
}

// --- generate stage ---------------------------------------------------------

export function renderGenerateStage(
  view: SessionView,
  metrics: MetricView | null,
  result: GenerateResult | null,
  handlers: GenerateHandlers,
): HTMLElement {
  const container = el("section", "stage generate-stage");
  container.append(el("h2", undefined, "4. Generate the control code"));
  container.append(el("p", undefined, `Production sequence: ${view.process.sequence.join(" → ")}`));

  if (metrics) {
    const panel = el("div", "metrics-panel");
    panel.append(el("h3", undefined, "Sequence space"));
    panel.append(el("p", "metric-full", `unrestricted: ${metrics.n}! = ${metrics.full_space}`));
    panel.append(el(
      "p", "metric-reduced",
      `staged (${metrics.stage_sizes.map((s) => `${s}!`).join(" + ")}): ${metrics.reduced_space}`,
    ));
    container.append(panel);
  }

  const button = el("button", "generate", "Generate artifact");
  button.addEventListener("click", () => handlers.generate());
  container.append(button);

  if (result) {
    const report = el("div", result.passed ? "report pass" : "report fail");
    report.append(el("h3", undefined, result.passed ? "Consistency: PASS" : "Consistency: FAIL"));
    const entries = el("ul", "report-entries");
    for (const entry of result.entries) {
      entries.append(el("li", entry.ok ? "ok" : "bad",
        `${entry.kind} ${entry.element}: ${entry.detail}`));
    }
    report.append(entries);
    container.append(report);

    const link = el("a", "download", "Download variant application");
    link.setAttribute("download", `${view.models.name}.fbn`);
    link.href = `data:text/plain;charset=utf-8,${encodeURIComponent(result.artifact)}`;
    container.append(link);
  }
  return container;
}
