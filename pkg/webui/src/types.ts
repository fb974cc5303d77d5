/** Wire types for the convrec HTTP API. */

export type ConstraintMap = Record<string, string[]>;

export interface DialogueStateJson {
  hard_constraints: ConstraintMap;
  soft_constraints: ConstraintMap;
  recommended_items: string[];
  rejected_items: string[];
  accepted_items: string[];
}

export const STATE_KEYS = [
  "hard_constraints",
  "soft_constraints",
  "recommended_items",
  "rejected_items",
  "accepted_items",
] as const;

export type StateKey = (typeof STATE_KEYS)[number];

export interface ActionJson {
  type: string;
  subkey: string | null;
}

export interface EvidenceJson {
  doc_id: string;
  kind: string;
  score: number;
  text: string;
}

export interface ScoredItemJson {
  item_id: string;
  name: string;
  fused_score: number | null;
  evidence: EvidenceJson[];
}

export interface DiagnosticsJson {
  query_text?: string;
  scored_items?: ScoredItemJson[];
  qa_routing?: Record<string, unknown>;
  prompt_ids_used?: string[];
}

export interface TurnResultJson {
  response_text: string;
  action: ActionJson;
  intents: string[];
  state_snapshot: DialogueStateJson;
  diagnostics: DiagnosticsJson | null;
}

export interface SessionCreatedJson {
  session_id: string;
  greeting: string;
}

export interface HealthJson {
  status: string;
  index_docs: number;
}

export function emptyState(): DialogueStateJson {
  return {
    hard_constraints: {},
    soft_constraints: {},
    recommended_items: [],
    rejected_items: [],
    accepted_items: [],
  };
}
