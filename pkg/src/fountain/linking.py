"""Dynamic linking of deviation text to FMEA content and warranty claims.

The flow: resolve the impacted part, collect every Cause/Effect/Detection
reachable in the part's BOM subtree (plus claims filed against those
parts), score candidates against both deviation texts, keep matches above
the link threshold, aggregate per failure mode by max, and materialize a
Deviation node whose SIMILAR_TO edges record every retained match.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import query
from .embeddings import EmbeddingCache, cached_vector, cosine
from .errors import AmbiguousPart, PartNotFound
from .explain import CausalChain, chain_for
from .graph import Graph, ensure_concept
from .ingest import SynonymMap, normalize_text

_PART_BY_ID_QUERY = query.parse('MATCH (p:Part {id: $ref}) RETURN p')


@dataclass
class DeviationRequest:
    part_ref: str
    requested_deviation: str
    current_definition: str = ""

    def __post_init__(self) -> None:
        if not self.requested_deviation.strip():
            raise ValueError("requested_deviation must be non-empty")


@dataclass
class LinkerConfig:
    tau_link: float = 0.45
    tau_claim: float = 0.50
    top_k: int = 5
    scope_depth: Optional[int] = None  # None = unlimited BOM depth

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau_link <= 1.0 and 0.0 <= self.tau_claim <= 1.0):
            raise ValueError("thresholds must lie in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class Match:
    node_id: int
    role: str  # cause | effect | detection
    similarity: float
    source_text: str  # current | requested


@dataclass
class ClaimLink:
    node_id: int
    claim_id: str
    similarity: float


@dataclass
class Recommendation:
    failure_node: int
    failure_text: str
    score: float
    matched: list[Match]
    claims: list[ClaimLink]
    chain: CausalChain


@dataclass
class RecommendResult:
    deviation_node_id: int
    recommendations: list[Recommendation]
    claims: list[ClaimLink]
    wal_records: list[dict] = field(default_factory=list)


# --- part resolution --------------------------------------------------------


def _trigrams(text: str) -> set[str]:
    folded = text.casefold()
    if len(folded) < 3:
        return {folded} if folded else set()
    return {folded[i : i + 3] for i in range(len(folded) - 2)}


def _trigram_overlap(a: str, b: str) -> float:
    ta, tb = _trigrams(a), _trigrams(b)
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def resolve_part(graph: Graph, part_ref: str, synonyms: SynonymMap) -> int:
    """Resolve a user-entered part reference to exactly one Part node.

    An exact external-id match wins; otherwise the synonym-normalized ref
    is matched case-insensitively against part names. No match raises
    PartNotFound with up to 3 suggestions ranked by trigram overlap.
    """
    rows = query.execute(_PART_BY_ID_QUERY, {"ref": part_ref}, graph)
    if len(rows) == 1:
        return rows[0][0].id
    if len(rows) > 1:
        raise AmbiguousPart(part_ref, [str(r[0].props.get("id", r[0].id)) for r in rows])
    normalized = normalize_text(part_ref, synonyms).strip()
    folded = normalized.casefold()
    candidates = [
        node
        for node in graph.nodes_with_label("Part")
        if isinstance(node.props.get("name"), str) and node.props["name"].casefold() == folded
    ]
    if len(candidates) == 1:
        return candidates[0].id
    if len(candidates) > 1:
        raise AmbiguousPart(part_ref, [str(n.props.get("id", n.id)) for n in candidates])
    scored = sorted(
        (
            (-_trigram_overlap(normalized, str(node.props.get("name", ""))), str(node.props.get("name", "")))
            for node in graph.nodes_with_label("Part")
        ),
    )
    suggestions = [name for score, name in scored if score < 0.0][:3]
    raise PartNotFound(part_ref, suggestions)


# --- candidate scoping --------------------------------------------------------

_ROLE_EDGES = (("HAS_CAUSE", "cause"), ("HAS_EFFECT", "effect"), ("DETECTED_BY", "detection"))


@dataclass
class _Candidate:
    node_id: int
    role: str
    text: str
    failure_id: int
    failure_text: str


def _scope(graph: Graph, part: int, config: LinkerConfig) -> tuple[list[_Candidate], list[tuple[int, str, str]]]:
    """FMEA candidates and claims in the part's subtree.

    Claims come back as (node id, external claim id, text).
    """
    part_set = {part} | graph.descendants(part, "HAS_CHILD", config.scope_depth)
    candidates: list[_Candidate] = []
    claims: list[tuple[int, str, str]] = []
    seen_claims: set[int] = set()
    for part_id in sorted(part_set):
        for _, failure in graph.neighbors(part_id, "out", "HAS_FAILURE_MODE"):
            failure_text = str(failure.props.get("text", ""))
            for edge_type, role in _ROLE_EDGES:
                for _, node in graph.neighbors(failure.id, "out", edge_type):
                    candidates.append(
                        _Candidate(node.id, role, str(node.props.get("text", "")), failure.id, failure_text)
                    )
        for _, claim in graph.neighbors(part_id, "in", "CLAIM_FOR"):
            if claim.id in seen_claims:
                continue
            seen_claims.add(claim.id)
            claims.append((claim.id, str(claim.props.get("id", claim.id)), str(claim.props.get("text", ""))))
    return candidates, claims


def candidate_scope(graph: Graph, part: int, config: LinkerConfig) -> set[tuple[int, str]]:
    """All text-bearing nodes in scope for a part, as (node id, role)."""
    candidates, claims = _scope(graph, part, config)
    scoped = {(c.node_id, c.role) for c in candidates}
    scoped |= {(node_id, "claim") for node_id, _, _ in claims}
    return scoped


# --- scoring and persistence ---------------------------------------------------


def _best_similarity(vec: np.ndarray, q_current: np.ndarray, q_requested: np.ndarray) -> tuple[float, str]:
    sim_cur = cosine(vec, q_current)
    sim_req = cosine(vec, q_requested)
    # ties go to the requested-deviation text, the primary signal
    if sim_req >= sim_cur:
        return sim_req, "requested"
    return sim_cur, "current"


def recommend(
    graph: Graph,
    request: DeviationRequest,
    config: LinkerConfig,
    provider,
    cache: Optional[EmbeddingCache],
    synonyms: SynonymMap,
) -> RecommendResult:
    """Score the part's candidate texts against the deviation and persist a
    Deviation node with SIMILAR_TO edges for every match >= tau.

    Returns the top_k failure recommendations (score desc, node id asc) with
    causal chains, plus claims >= tau_claim. Deterministic for a fixed
    (graph, request, config, provider fingerprint).
    """
    part = resolve_part(graph, request.part_ref, synonyms)
    candidates, claims = _scope(graph, part, config)

    current_norm = normalize_text(request.current_definition, synonyms)
    requested_norm = normalize_text(request.requested_deviation, synonyms)
    q_current = cached_vector(provider, cache, current_norm)
    q_requested = cached_vector(provider, cache, requested_norm)

    matches: list[tuple[_Candidate, float, str]] = []
    for candidate in candidates:
        vec = cached_vector(provider, cache, candidate.text)
        best, source = _best_similarity(vec, q_current, q_requested)
        if best >= config.tau_link:
            matches.append((candidate, best, source))

    by_failure: dict[int, list[tuple[_Candidate, float, str]]] = {}
    for item in matches:
        by_failure.setdefault(item[0].failure_id, []).append(item)

    ranked = sorted(
        by_failure.items(),
        key=lambda kv: (-max(m[1] for m in kv[1]), kv[0]),
    )

    claim_links: list[tuple[int, str, float, str]] = []
    for node_id, claim_ext, text in claims:
        vec = cached_vector(provider, cache, text)
        best, source = _best_similarity(vec, q_current, q_requested)
        if best >= config.tau_claim:
            claim_links.append((node_id, claim_ext, best, source))
    claim_links.sort(key=lambda c: (-c[2], c[0]))

    # write phase: the deviation node and its links
    watermark = graph.watermark()
    recommended_failures = [fid for fid, _ in ranked[: config.top_k]]
    deviation_id = _persist_deviation(
        graph, part, request, current_norm, requested_norm, matches, claim_links, recommended_failures
    )

    claims_out = [ClaimLink(node_id, ext, sim) for node_id, ext, sim, _ in claim_links]
    recommendations = []
    for failure_id, failure_matches in ranked[: config.top_k]:
        ordered = sorted(failure_matches, key=lambda m: (-m[1], m[0].node_id))
        recommendations.append(
            Recommendation(
                failure_node=failure_id,
                failure_text=failure_matches[0][0].failure_text,
                score=max(m[1] for m in failure_matches),
                matched=[Match(c.node_id, c.role, sim, source) for c, sim, source in ordered],
                claims=claims_out,
                chain=chain_for(graph, failure_id, deviation_id),
            )
        )
    return RecommendResult(
        deviation_node_id=deviation_id,
        recommendations=recommendations,
        claims=claims_out,
        wal_records=graph.records_since(watermark),
    )


def _persist_deviation(
    graph: Graph,
    part: int,
    request: DeviationRequest,
    current_norm: str,
    requested_norm: str,
    matches: list[tuple[_Candidate, float, str]],
    claim_links: list[tuple[int, str, float, str]],
    recommended_failures: list[int],
) -> int:
    concept = ensure_concept(graph, "Deviation")
    deviation_id = graph.create_node(
        ["Deviation"],
        {
            "current_definition": request.current_definition,
            "requested_deviation": request.requested_deviation,
            "current_definition_norm": current_norm,
            "requested_deviation_norm": requested_norm,
            "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "recommended": json.dumps(
                {
                    "failures": recommended_failures,
                    "claims": [node_id for node_id, _, _, _ in claim_links],
                }
            ),
        },
    )
    graph.create_edge("INSTANCE_OF", deviation_id, concept, dedupe=True)
    graph.create_edge("CONCERNS_PART", deviation_id, part, dedupe=True)
    for candidate, sim, source in sorted(matches, key=lambda m: (m[0].node_id, -m[1])):
        graph.create_edge(
            "SIMILAR_TO", deviation_id, candidate.node_id,
            {"score": float(sim), "source_text": source}, dedupe=True,
        )
    for node_id, _, sim, source in claim_links:
        graph.create_edge(
            "SIMILAR_TO", deviation_id, node_id,
            {"score": float(sim), "source_text": source}, dedupe=True,
        )
    return deviation_id


def link_claims(
    graph: Graph,
    deviation: int,
    config: LinkerConfig,
    provider,
    cache: Optional[EmbeddingCache],
) -> list[ClaimLink]:
    """Claims in the deviation's part scope scoring >= tau_claim, linked via
    SIMILAR_TO edges (idempotent thanks to edge dedupe)."""
    node = graph.node(deviation)
    parts = [n.id for _, n in graph.neighbors(deviation, "out", "CONCERNS_PART")]
    if not parts:
        return []
    q_current_text = str(node.props.get("current_definition_norm", ""))
    q_requested_text = str(node.props.get("requested_deviation_norm", ""))
    q_current = cached_vector(provider, cache, q_current_text)
    q_requested = cached_vector(provider, cache, q_requested_text)
    _, claims = _scope(graph, parts[0], config)
    out: list[tuple[int, str, float, str]] = []
    for node_id, ext, text in claims:
        vec = cached_vector(provider, cache, text)
        best, source = _best_similarity(vec, q_current, q_requested)
        if best >= config.tau_claim:
            out.append((node_id, ext, best, source))
    out.sort(key=lambda c: (-c[2], c[0]))
    for node_id, _, sim, source in out:
        graph.create_edge(
            "SIMILAR_TO", deviation, node_id,
            {"score": float(sim), "source_text": source}, dedupe=True,
        )
    return [ClaimLink(node_id, ext, sim) for node_id, ext, sim, _ in out]
