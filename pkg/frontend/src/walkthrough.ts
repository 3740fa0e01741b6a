// Scripted end-to-end session against a running service instance:
//   pprvari serve --workspace ws --port 8420      (service side)
//   npm run walkthrough -- http://127.0.0.1:8420  (this script)
//
// Drives product {Pipe2, Lock1} -> the full decision walk (with one rollback
// probe) -> resource pick -> generate, and verifies after every step that the
// local queue mirror equals the service's queue.

import { ApiClient } from "./api.js";
import type { QueueEntry } from "./types.js";

function assertEqual(actual: unknown, expected: unknown, what: string): void {
  const a = JSON.stringify(actual);
  const b = JSON.stringify(expected);
  if (a !== b) {
    throw new Error(`${what}: expected ${b}, got ${a}`);
  }
}

export async function runWalkthrough(baseUrl: string, log: (line: string) => void): Promise<void> {
  const api = new ApiClient(baseUrl);
  const { id } = await api.createSession();
  log(`session ${id}`);

  let view = await api.getState(id);
  const selection = [...new Set([...view.product.preselected, "Pipe2", "Lock1", "Barrel1_2"])].sort();
  view = await api.postProduct(id, selection);
  assertEqual(view.stage, "process", "stage after product config");
  assertEqual(view.process.visible.length, 11, "initially visible steps");

  // local queue mirror, updated only from service responses
  let mirror: QueueEntry[] = [];
  const syncCheck = async (): Promise<void> => {
    const fresh = await api.getState(id);
    assertEqual(fresh.process.queue, mirror, "queue panel vs service queue");
  };

  let rollbackProbed = false;
  while (view.process.visible.length > 0) {
    const batch = [...view.process.visible];
    for (const decision of batch) {
      view = await api.postDecision(id, decision, true);
      mirror = view.process.queue;
      await syncCheck();
    }
    if (!rollbackProbed) {
      rollbackProbed = true;
      const before = await api.getState(id);
      const lastUser = [...before.process.queue].reverse().find((q) => q.origin === "user")!;
      view = await api.postRollback(id, 1);
      mirror = view.process.queue;
      await syncCheck();
      if (mirror.some((q) => q.seq >= lastUser.seq)) {
        throw new Error("rollback left trailing queue entries behind");
      }
      view = await api.postDecision(id, lastUser.decision, lastUser.value);
      mirror = view.process.queue;
      await syncCheck();
      log(`rollback probe ok (re-took ${lastUser.decision})`);
    }
  }

  view = await api.postFinish(id);
  assertEqual(view.stage, "resource", "stage after finish");
  log(`sequence: ${view.process.sequence.join(" -> ")}`);

  const metrics = await api.getMetrics(id);
  assertEqual(metrics.full_space, "620448401733239439360000", "full sequence space");
  assertEqual(metrics.reduced_space, "39917547", "reduced sequence space");
  log(`metric: ${metrics.full_space} -> ${metrics.reduced_space}`);

  view = await api.postResource(id, ["LF_4", "SC_70", "LaserWeldingRobot_01", "PR_04"]);
  assertEqual(view.stage, "done", "stage after resource config");

  const result = await api.postGenerate(id);
  if (!result.passed) {
    throw new Error(`generation reported FAIL:\n${result.report}`);
  }
  if (!result.artifact.includes("application ShiftForkCaseStudyApp")) {
    throw new Error("artifact download payload is not the generated application");
  }
  log("generation PASS; artifact ready for download");
}

const invokedDirectly =
  typeof process !== "undefined" && process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");

if (invokedDirectly) {
  const url = process.argv[2] ?? "http://127.0.0.1:8420";
  runWalkthrough(url, (line) => console.log(line))
    .then(() => {
      console.log("walkthrough: PASS");
    })
    .catch((err) => {
      console.error(`walkthrough: FAIL: ${err instanceof Error ? err.message : err}`);
      process.exit(1);
    });
}
