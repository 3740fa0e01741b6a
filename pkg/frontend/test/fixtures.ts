import type { GenerateResult, SessionView } from "../src/types.js";

// A compact slice of the shift-fork session view, shaped exactly like the
// service payloads.

export function productStageView(): SessionView {
  return {
    id: "abc123",
    stage: "product",
    models: {
      name: "shiftfork",
      product_fm: {
        model_id: "shiftfork_product",
        root: "shiftfork_product",
        features: [
          { id: "shiftfork_product", name: "shiftfork_product", parent: null, abstract: true, variability: "mandatory", group: null },
          { id: "Screw", name: "Screw", parent: "shiftfork_product", abstract: false, variability: "mandatory", group: null },
          { id: "Barrel", name: "Barrel", parent: "shiftfork_product", abstract: true, variability: "mandatory", group: null },
          { id: "Barrel1_1", name: "Barrel 1/1", parent: "Barrel", abstract: false, variability: "mandatory", group: null },
          { id: "Barrel1_2", name: "Barrel 1/2", parent: "Barrel", abstract: false, variability: "optional", group: null },
          { id: "Pipe", name: "Pipe", parent: "shiftfork_product", abstract: true, variability: "mandatory", group: "alternative" },
          { id: "Pipe8", name: "Pipe 8", parent: "Pipe", abstract: false, variability: "optional", group: null },
          { id: "Pipe3", name: "Pipe 3", parent: "Pipe", abstract: false, variability: "optional", group: null },
          { id: "Pipe2", name: "Pipe 2", parent: "Pipe", abstract: false, variability: "optional", group: null },
        ],
      },
      process_dm: {
        model_id: "shiftfork_process",
        decisions: [
          { id: "InsertPipe2", question: "Install InsertPipe2?", type: "boolean", range: null, visible_if: "Pipe == Pipe2", rules: ["InsertPipe2 => InsertPipe"] },
          { id: "InsertScrew", question: "Install InsertScrew?", type: "boolean", range: null, visible_if: "Screw", rules: [] },
        ],
      },
      resource_fm: {
        model_id: "shiftfork_resource",
        root: "shiftfork_resource",
        features: [
          { id: "shiftfork_resource", name: "shiftfork_resource", parent: null, abstract: true, variability: "mandatory", group: null },
          { id: "Linefeeds", name: "Linefeeds", parent: "shiftfork_resource", abstract: true, variability: "optional", group: "or" },
          { id: "LF_4", name: "LF 4", parent: "Linefeeds", abstract: false, variability: "optional", group: null },
          { id: "LF_3", name: "LF 3", parent: "Linefeeds", abstract: false, variability: "optional", group: null },
          { id: "WeldingRobots", name: "WeldingRobots", parent: "shiftfork_resource", abstract: true, variability: "optional", group: "or" },
          { id: "LaserWeldingRobot_01", name: "LaserWeldingRobot_01", parent: "WeldingRobots", abstract: false, variability: "optional", group: null },
          { id: "PR_04", name: "PR 04", parent: "shiftfork_resource", abstract: false, variability: "optional", group: null },
        ],
      },
      cdc_rules: ["shiftfork_product#Pipe2 => shiftfork_process#Pipe2"],
    },
    product: {
      preselected: ["shiftfork_product", "Screw", "Barrel", "Barrel1_1", "Pipe"],
      selected: null,
    },
    process: { visible: [], queue: [], presets: [], sequence: [] },
    resource: { required: [], required_groups: [], locked: [], selected: null },
    metrics: null,
  };
}

export function processStageView(): SessionView {
  const view = productStageView();
  view.stage = "process";
  view.product.selected = [...view.product.preselected, "Pipe2"];
  view.process = {
    visible: ["InsertPipe2", "InsertScrew"],
    queue: [
      { decision: "InsertLock1", value: true, origin: "user", seq: 19 },
      { decision: "InsertLock", value: true, origin: "propagated", seq: 20 },
    ],
    presets: [{ decision: "Pipe", value: "Pipe2", seq: 0 }],
    sequence: ["InsertLock1", "InsertLock"],
  };
  return view;
}

export function resourceStageView(): SessionView {
  const view = processStageView();
  view.stage = "resource";
  view.process.visible = [];
  view.resource = {
    required: [],
    required_groups: ["Linefeeds", "WeldingRobots"],
    locked: ["PR_04"],
    selected: null,
  };
  return view;
}

export function doneView(): SessionView {
  const view = resourceStageView();
  view.stage = "done";
  view.resource.selected = ["LF_4", "LaserWeldingRobot_01"];
  view.metrics = {
    n: 24, r: 24,
    full_space: "620448401733239439360000",
    stage_sizes: [11, 4, 6, 2, 1],
    reduced_space: "39917547",
  };
  return view;
}

export function generateResult(passed = true): GenerateResult {
  return {
    id: "abc123",
    passed,
    report: passed ? "consistency: PASS\n" : "consistency: FAIL\n",
    entries: [
      { kind: "realized", element: "InsertPipe2", ok: true, detail: "block present" },
      ...(passed ? [] : [{ kind: "stale", element: "InsertPipe3", ok: false, detail: "unselectable variant still in network" }]),
    ],
    warnings: [],
    artifact: "application ShiftForkCaseStudyApp {\n}\n",
  };
}
