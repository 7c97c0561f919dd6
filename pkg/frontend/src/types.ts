/** Wire types of the /api/v1 endpoints. Values are rendered verbatim;
 * the client never recomputes scores or chains. */

export interface MatchItem {
  node_id: number;
  role: "cause" | "effect" | "detection";
  similarity: number;
  source_text: "current" | "requested";
}

export interface ClaimItem {
  node_id: number;
  claim_id: string;
  similarity: number;
}

export interface ChainEntry {
  node_id: number;
  text: string;
  similarity: number | null;
}

export interface Chain {
  part_id: number | null;
  part_name: string;
  failure_id: number;
  failure_text: string;
  causes: ChainEntry[];
  effects: ChainEntry[];
  detections: ChainEntry[];
  preventions: ChainEntry[];
}

export interface Recommendation {
  failure_id: number;
  failure_text: string;
  score: number;
  matched: MatchItem[];
  claims: ClaimItem[];
  chain: Chain;
}

export interface DeviationResponse {
  deviation_id: number;
  recommendations: Recommendation[];
  claims: ClaimItem[];
}

export interface DeviationRequestBody {
  part_ref: string;
  requested_deviation: string;
  current_definition: string;
}

export interface FeedbackBody {
  deviation_id: number;
  item_ref: number;
  verdict: Verdict;
  selected?: boolean;
  justification?: string | null;
  user_ref?: string | null;
}

export type Verdict = "useful" | "not_useful";

export interface ErrorEnvelope {
  error: {
    code: string;
    message: string;
    details: Record<string, unknown>;
  };
}
