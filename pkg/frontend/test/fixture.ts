import type { Chain, DeviationResponse } from "../src/types.js";
import type { FetchLike } from "../src/api.js";

export const CHAIN_F1: Chain = {
  part_id: 2,
  part_name: "catalyst",
  failure_id: 9,
  failure_text: "substrate cracked",
  causes: [
    { node_id: 10, text: "thermal overload", similarity: 0.9 },
    { node_id: 14, text: "mechanical shock", similarity: null },
  ],
  effects: [{ node_id: 11, text: "loss of efficiency", similarity: null }],
  detections: [],
  preventions: [],
};

export const CHAIN_F2: Chain = {
  part_id: 2,
  part_name: "catalyst",
  failure_id: 20,
  failure_text: "coating washcoat loss",
  causes: [{ node_id: 21, text: "fuel contamination", similarity: 0.6 }],
  effects: [],
  detections: [],
  preventions: [],
};

export const DEVIATION_RESPONSE: DeviationResponse = {
  deviation_id: 77,
  recommendations: [
    {
      failure_id: 9,
      failure_text: "substrate cracked",
      score: 0.9,
      matched: [
        { node_id: 10, role: "cause", similarity: 0.9, source_text: "requested" },
      ],
      claims: [{ node_id: 30, claim_id: "CL-1", similarity: 0.8 }],
      chain: CHAIN_F1,
    },
    {
      failure_id: 20,
      failure_text: "coating washcoat loss",
      score: 0.6,
      matched: [
        { node_id: 21, role: "cause", similarity: 0.6, source_text: "requested" },
      ],
      claims: [{ node_id: 30, claim_id: "CL-1", similarity: 0.8 }],
      chain: CHAIN_F2,
    },
  ],
  claims: [{ node_id: 30, claim_id: "CL-1", similarity: 0.8 }],
};

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export interface FixtureOptions {
  deviationStatus?: number; // 201 | 404 | 503
  suggestions?: string[];
  emptyRecommendations?: boolean;
  failFeedback?: boolean;
  deviationDelayMs?: number;
}

/** In-memory stand-in for the HTTP service; records every call. */
export function fixtureServer(options: FixtureOptions = {}) {
  const calls: RecordedCall[] = [];

  const json = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });

  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : null;
    calls.push({ url, method, body });

    if (url.endsWith("/api/v1/deviations") && method === "POST") {
      if (options.deviationDelayMs) {
        await new Promise((resolve) => setTimeout(resolve, options.deviationDelayMs));
      }
      if (options.deviationStatus === 404) {
        return json(
          {
            error: {
              code: "part_not_found",
              message: `no part matches '${body.part_ref}'`,
              details: { suggestions: options.suggestions ?? [] },
            },
          },
          404,
        );
      }
      if (options.deviationStatus === 503) {
        return json(
          {
            error: {
              code: "provider_unavailable",
              message: "embedding endpoint unreachable",
              details: {},
            },
          },
          503,
        );
      }
      if (options.emptyRecommendations) {
        return json({ deviation_id: 77, recommendations: [], claims: [] }, 201);
      }
      return json(DEVIATION_RESPONSE, 201);
    }

    const explanation = url.match(/\/api\/v1\/failures\/(\d+)\/explanation/);
    if (explanation && method === "GET") {
      const failureId = Number(explanation[1]);
      const chain = failureId === 9 ? CHAIN_F1 : CHAIN_F2;
      return json(chain);
    }

    if (url.endsWith("/api/v1/feedback") && method === "POST") {
      if (options.failFeedback) {
        return json(
          { error: { code: "io_error", message: "disk full", details: {} } },
          500,
        );
      }
      return json({ feedback_id: `fb-${calls.length}` }, 201);
    }

    if (url.endsWith("/api/v1/risk-text") && method === "POST") {
      const chain = body.failure_id === 9 ? CHAIN_F1 : CHAIN_F2;
      let text = `RISK: ${chain.failure_text}\n`;
      for (const cause of chain.causes) text += `  CAUSE: ${cause.text}\n`;
      if (body.justification) text += `  JUSTIFICATION: ${body.justification}\n`;
      return json({ text });
    }

    return json({ error: { code: "not_found", message: url, details: {} } }, 404);
  };

  return { fetchFn, calls };
}
