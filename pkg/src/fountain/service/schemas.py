"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, field_validator

from ..explain import CausalChain
from ..linking import RecommendResult


class DeviationIn(BaseModel):
    part_ref: str
    requested_deviation: str
    current_definition: str = ""

    @field_validator("part_ref", "requested_deviation")
    @classmethod
    def _non_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must be non-empty")
        return value


class MatchOut(BaseModel):
    node_id: int
    role: str
    similarity: float
    source_text: str


class ClaimOut(BaseModel):
    node_id: int
    claim_id: str
    similarity: float


class ChainEntryOut(BaseModel):
    node_id: int
    text: str
    similarity: Optional[float] = None


class ChainOut(BaseModel):
    part_id: Optional[int]
    part_name: str
    failure_id: int
    failure_text: str
    causes: list[ChainEntryOut]
    effects: list[ChainEntryOut]
    detections: list[ChainEntryOut]
    preventions: list[ChainEntryOut]

    @classmethod
    def from_chain(cls, chain: CausalChain) -> "ChainOut":
        entry = lambda e: ChainEntryOut(node_id=e.node_id, text=e.text, similarity=e.similarity)
        return cls(
            part_id=chain.part_id,
            part_name=chain.part_name,
            failure_id=chain.failure_id,
            failure_text=chain.failure_text,
            causes=[entry(e) for e in chain.causes],
            effects=[entry(e) for e in chain.effects],
            detections=[entry(e) for e in chain.detections],
            preventions=[entry(e) for e in chain.preventions],
        )


class RecommendationOut(BaseModel):
    failure_id: int
    failure_text: str
    score: float
    matched: list[MatchOut]
    claims: list[ClaimOut]
    chain: ChainOut


class DeviationOut(BaseModel):
    deviation_id: int
    recommendations: list[RecommendationOut]
    claims: list[ClaimOut]

    @classmethod
    def from_result(cls, result: RecommendResult) -> "DeviationOut":
        claims = [
            ClaimOut(node_id=c.node_id, claim_id=c.claim_id, similarity=c.similarity)
            for c in result.claims
        ]
        return cls(
            deviation_id=result.deviation_node_id,
            recommendations=[
                RecommendationOut(
                    failure_id=r.failure_node,
                    failure_text=r.failure_text,
                    score=r.score,
                    matched=[
                        MatchOut(
                            node_id=m.node_id,
                            role=m.role,
                            similarity=m.similarity,
                            source_text=m.source_text,
                        )
                        for m in r.matched
                    ],
                    claims=claims,
                    chain=ChainOut.from_chain(r.chain),
                )
                for r in result.recommendations
            ],
            claims=claims,
        )


class FeedbackIn(BaseModel):
    deviation_id: int
    item_ref: int
    verdict: Literal["useful", "not_useful"]
    selected: bool = False
    justification: Optional[str] = None
    user_ref: Optional[str] = None


class FeedbackOut(BaseModel):
    feedback_id: str


class RiskTextIn(BaseModel):
    deviation_id: int
    failure_id: int
    justification: Optional[str] = None


class RiskTextOut(BaseModel):
    text: str


class UserStatsOut(BaseModel):
    deviations_evaluated: int
    all_useful: int
    mixed: int
    none_useful: int
    incomplete: int


class FeedbackStatsOut(BaseModel):
    users: dict[str, UserStatsOut]
    useful_items: int
    not_useful_items: int
