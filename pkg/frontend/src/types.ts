// Wire types mirroring the /v1 session API.  The client renders exactly what
// the service reports; it never re-derives validity on its own.

export type Stage = "product" | "process" | "resource" | "done";

export interface FeatureView {
  id: string;
  name: string;
  parent: string | null;
  abstract: boolean;
  variability: "mandatory" | "optional";
  group: "or" | "alternative" | null;
}

export interface FmView {
  model_id: string;
  root: string;
  features: FeatureView[];
}

export interface DecisionView {
  id: string;
  question: string;
  type: "boolean" | "enumeration";
  range: string[] | null;
  visible_if: string;
  rules: string[];
}

export interface DmView {
  model_id: string;
  decisions: DecisionView[];
}

export interface QueueEntry {
  decision: string;
  value: boolean | string;
  origin: "user" | "propagated";
  seq: number;
}

export interface MetricView {
  n: number;
  r: number;
  full_space: string;
  stage_sizes: number[];
  reduced_space: string;
}

export interface SessionView {
  id: string;
  stage: Stage;
  models: {
    name: string;
    product_fm: FmView;
    process_dm: DmView;
    resource_fm: FmView;
    cdc_rules: string[];
  };
  product: {
    preselected: string[];
    selected: string[] | null;
  };
  process: {
    visible: string[];
    queue: QueueEntry[];
    presets: { decision: string; value: boolean | string; seq: number }[];
    sequence: string[];
  };
  resource: {
    required: string[];
    required_groups: string[];
    locked: string[];
    selected: string[] | null;
  };
  metrics: MetricView | null;
  propagated?: { decision: string; value: boolean | string }[];
  sequence?: string[];
}

export interface GenerateResult {
  id: string;
  passed: boolean;
  report: string;
  entries: { kind: string; element: string; ok: boolean; detail: string }[];
  warnings: string[];
  artifact: string;
}
