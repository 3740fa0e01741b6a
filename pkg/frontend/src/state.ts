import type { ApiClient } from "./api.js";
import type { FeatureView, FmView, SessionView } from "./types.js";

// Holds the last view the service returned.  Every mutation goes through the
// service and replaces the whole view; at most one mutation is in flight.

export type Listener = (view: SessionView) => void;

export class SessionStore {
  view: SessionView | null = null;
  private inFlight = false;
  private listeners: Listener[] = [];

  constructor(private api: ApiClient, public sessionId: string) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private publish(view: SessionView): SessionView {
    this.view = view;
    for (const listener of this.listeners) listener(view);
    return view;
  }

  async refresh(): Promise<SessionView> {
    return this.publish(await this.api.getState(this.sessionId));
  }

  /** Run one mutating call; concurrent mutations are rejected client-side. */
  async mutate(action: (api: ApiClient, id: string) => Promise<SessionView>): Promise<SessionView> {
    if (this.inFlight) {
      throw new Error("a mutation is already in flight");
    }
    this.inFlight = true;
    try {
      return this.publish(await action(this.api, this.sessionId));
    } finally {
      this.inFlight = false;
    }
  }

  get busy(): boolean {
    return this.inFlight;
  }
}

// --- pure view helpers (shape only, no rule evaluation) ---------------------

export interface TreeNode {
  feature: FeatureView;
  children: TreeNode[];
}

export function buildTree(fm: FmView): TreeNode {
  const byId = new Map(fm.features.map((f) => [f.id, { feature: f, children: [] as TreeNode[] }]));
  let root: TreeNode | null = null;
  for (const f of fm.features) {
    const node = byId.get(f.id)!;
    if (f.parent === null) {
      root = node;
    } else {
      byId.get(f.parent)!.children.push(node);
    }
  }
  if (!root) throw new Error(`feature model ${fm.model_id} has no root`);
  return root;
}

/** The product selection a submitted form represents: checked boxes, picked
 * radios, and everything the service preselected. */
export function collectSelection(
  preselected: string[],
  checked: string[],
  radioPicks: Record<string, string>,
): string[] {
  const out = new Set(preselected);
  for (const id of checked) out.add(id);
  for (const picked of Object.values(radioPicks)) out.add(picked);
  return [...out].sort();
}

export function queueSummary(view: SessionView): string[] {
  return view.process.queue.map((entry) => {
    const value = typeof entry.value === "string" ? entry.value : entry.value ? "true" : "false";
    return `${entry.seq} ${entry.decision} = ${value} (${entry.origin})`;
  });
}
