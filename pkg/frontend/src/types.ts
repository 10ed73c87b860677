// Shapes of the review/graph/QA API payloads (see docs/formats.md in the repo root).

export interface TripleView {
  subject: string;
  subject_type: string;
  relation: string;
  object: string;
  object_type: string;
}

export interface ProvenanceView {
  doc_id: string;
  chunk_id: string;
  template_id: string;
  template_version: number;
  provider: string;
  review_decision_id?: string;
}

export interface ReviewItemView {
  item_id: string;
  edge_id: string;
  status: "pending" | "accepted" | "rejected" | "edited";
  version: number;
  context: {
    triple: TripleView;
    rendered: string;
    provenance: ProvenanceView[];
    checklist: string[];
  };
}

export interface ReviewStatsView {
  reviewed: number;
  accepted: number;
  precision: { numerator: number; denominator: number; value: number } | null;
  percent: string;
  pending: number;
}

export interface DecisionRequest {
  action: "accept" | "reject" | "edit";
  expected_version: number;
  note?: string;
  edited_triple?: Record<string, unknown>;
  reviewer?: string;
}

export interface NodeView {
  entity_id: string;
  entity_type: string;
  label: string;
  aliases: string[];
  system_tag: string | null;
  attributes: Record<
    string,
    { value: string; kind: string; unit: string | null; provenance: ProvenanceView[] }
  >;
  external_codes: [string, string][];
}

export interface EdgeView {
  edge_id: string;
  subject: string;
  relation: string;
  object: string;
  status: string;
  provenance: ProvenanceView[];
}

export interface NeighborhoodView {
  nodes: NodeView[];
  edges: EdgeView[];
  distances: Record<string, number>;
}

export interface ChunkView {
  chunk_id: string;
  doc_id: string;
  text: string;
  section_path: string[];
  issuing_org: string;
  title: string;
}

export interface GraphStatsView {
  nodes_by_type: Record<string, number>;
  edges_by_relation: Record<string, number>;
  indicators_by_system: Record<string, number>;
  guidelines_covered: number;
}

export interface TemplateVersionView {
  template_id: string;
  version: number;
  created_from: string | null;
}
