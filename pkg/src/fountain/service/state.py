"""Shared service state: graph, providers, logs and locking."""

from __future__ import annotations

import datetime
import json
import os
import shutil
import threading
from dataclasses import dataclass
from typing import Optional

from .. import evalsuite, ingest, linking
from ..embeddings import EmbeddingCache, ensure_graph_embeddings, make_provider
from ..errors import IngestInProgress, ProviderUnavailable, UnknownNode
from ..explain import chain_for, render_risk_text
from ..ingest import SynonymMap, csv_source
from ..linking import DeviationRequest, LinkerConfig
from ..persistence import AppendLog, DataPaths, FeedbackLog, RWLock, compact, load_graph


@dataclass
class ServiceConfig:
    data_dir: str
    listen: str = "127.0.0.1:8077"
    provider: str = "test"  # "test" | "lookup:<path>" | provider base URL
    synonyms_path: Optional[str] = None
    tau_link: float = 0.45
    tau_claim: float = 0.50
    top_k: int = 5
    scope_depth: Optional[int] = None
    warm_embeddings: bool = True

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(**data)

    def linker_config(self) -> LinkerConfig:
        return LinkerConfig(
            tau_link=self.tau_link,
            tau_claim=self.tau_claim,
            top_k=self.top_k,
            scope_depth=self.scope_depth,
        )

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


_INGEST_KINDS = ("bom", "fmea", "claims", "synonyms")


class AppState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.paths = DataPaths(config.data_dir).ensure()
        self.graph = load_graph(self.paths)
        self.synonyms = self._load_synonyms()
        self.provider = make_provider(config.provider)
        self.cache = EmbeddingCache(self.paths.embeddings)
        self.feedback_log = FeedbackLog(self.paths.feedback)
        self.wal = AppendLog(self.paths.deviations_wal)
        self.lock = RWLock()
        self._ingest_lock = threading.Lock()
        if config.warm_embeddings:
            try:
                ensure_graph_embeddings(self.graph, self.provider, self.cache)
            except ProviderUnavailable:
                pass  # resumes lazily once the provider is back

    def _load_synonyms(self) -> SynonymMap:
        if os.path.exists(self.paths.synonyms):
            return ingest.load_synonyms(self.paths.synonyms)
        if self.config.synonyms_path:
            shutil.copyfile(self.config.synonyms_path, self.paths.synonyms)
            return ingest.load_synonyms(self.paths.synonyms)
        return SynonymMap.empty()

    # -- write paths ---------------------------------------------------------

    def recommend(self, request: DeviationRequest) -> linking.RecommendResult:
        with self.lock.writing():
            result = linking.recommend(
                self.graph, request, self.config.linker_config(),
                self.provider, self.cache, self.synonyms,
            )
            self.wal.append(
                {"deviation": result.deviation_node_id, "records": result.wal_records}
            )
        return result

    def record_feedback(
        self,
        deviation_id: int,
        item_ref: int,
        verdict: str,
        selected: bool = False,
        justification: Optional[str] = None,
        user_ref: Optional[str] = None,
    ) -> str:
        with self.lock.reading():
            deviation = self.graph.node(deviation_id)
            if "Deviation" not in deviation.labels:
                raise UnknownNode(f"node {deviation_id} is not a Deviation", node_id=deviation_id)
            item = self.graph.node(item_ref)
            if not item.labels & {"FailureMode", "WarrantyClaim"}:
                raise UnknownNode(
                    f"node {item_ref} is not a recommendable item", node_id=item_ref
                )
        seq, feedback_id = self.feedback_log.next_id()
        self.feedback_log.append(
            {
                "seq": seq,
                "feedback_id": feedback_id,
                "deviation_id": deviation_id,
                "item_ref": item_ref,
                "verdict": verdict,
                "selected": selected,
                "justification": justification,
                "user_ref": user_ref,
                "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            }
        )
        return feedback_id

    def risk_text(self, deviation_id: int, failure_id: int, justification: Optional[str]) -> str:
        with self.lock.reading():
            deviation = self.graph.node(deviation_id)
            if "Deviation" not in deviation.labels:
                raise UnknownNode(f"node {deviation_id} is not a Deviation", node_id=deviation_id)
            chain = chain_for(self.graph, failure_id, deviation_id)
            text = render_risk_text(chain, justification)
        self.record_feedback(
            deviation_id, failure_id, "useful", selected=True, justification=justification
        )
        return text

    def ingest_csv(self, kind: str, body: str, allow_orphans: bool = False) -> dict:
        if kind not in _INGEST_KINDS:
            raise ValueError(f"unknown ingest kind {kind!r}")
        if not self._ingest_lock.acquire(blocking=False):
            raise IngestInProgress("another ingest is already running")
        try:
            if kind == "synonyms":
                synonyms = ingest.load_synonyms(csv_source(body))
                with open(self.paths.synonyms, "w", encoding="utf-8") as fh:
                    fh.write(body)
                with self.lock.writing():
                    self.synonyms = synonyms
                return {"terms": len(synonyms.entries)}
            with self.lock.writing():
                if kind == "bom":
                    counts = ingest.load_bom(self.graph, csv_source(body))
                elif kind == "fmea":
                    counts = ingest.load_fmea(
                        self.graph, csv_source(body), self.synonyms, allow_orphans=allow_orphans
                    )
                else:
                    counts = ingest.load_claims(self.graph, csv_source(body), self.synonyms)
                compact(self.graph, self.paths)
                if self.config.warm_embeddings:
                    try:
                        ensure_graph_embeddings(self.graph, self.provider, self.cache)
                    except ProviderUnavailable:
                        pass
            return counts
        finally:
            self._ingest_lock.release()

    def snapshot(self) -> dict:
        with self.lock.writing():
            records = compact(self.graph, self.paths)
        return {"path": self.paths.snapshot, "records": records}

    # -- read paths -----------------------------------------------------------

    def explanation(self, failure_id: int, deviation_id: Optional[int]):
        with self.lock.reading():
            return chain_for(self.graph, failure_id, deviation_id)

    def feedback_stats(self) -> evalsuite.FeedbackSummary:
        with self.lock.reading():
            recommended = evalsuite.recommended_items_from_graph(self.graph)
            records = [
                evalsuite.FeedbackRecord(
                    feedback_id=str(r.get("feedback_id", "")),
                    deviation_id=int(r["deviation_id"]),
                    item_ref=int(r["item_ref"]),
                    verdict=str(r["verdict"]),
                    selected=bool(r.get("selected", False)),
                    justification=r.get("justification"),
                    user_ref=r.get("user_ref"),
                    timestamp=str(r.get("timestamp", "")),
                )
                for r in self.feedback_log.replay()
            ]
            return evalsuite.summarize_feedback(records, recommended)

    def close(self) -> None:
        self.feedback_log.close()
        self.wal.close()
        self.cache.close()
