"""Model-suitability gate, negation check and feedback aggregation.

The suitability gate computes the full cross-group cosine matrix for two
sentence groups and classifies curated expected-high / expected-low pairs.
A provider passes when every expected-high pair clears the threshold,
every expected-low pair stays below it, and the margin between the worst
high and the best low is at least delta. The built-in sentence groups and
pair lists ship as fixture files next to this module.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .errors import UnknownDeviation, UnknownPairId
from .graph import Graph

VERDICTS = ("useful", "not_useful")


# --- sentence groups -----------------------------------------------------------


@dataclass
class SentenceGroupSet:
    groups: dict[str, list[tuple[str, str]]]  # name -> [(id, sentence)]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rows in self.groups.values():
            for sid, _ in rows:
                if sid in seen:
                    raise ValueError(f"duplicate sentence id {sid!r}")
                seen.add(sid)
        self._sentences = {sid: text for rows in self.groups.values() for sid, text in rows}

    def sentence(self, sid: str) -> str:
        try:
            return self._sentences[sid]
        except KeyError:
            raise UnknownPairId(f"unknown sentence id {sid!r}", sentence_id=sid) from None

    def ids(self, group: str) -> list[str]:
        return [sid for sid, _ in self.groups[group]]

    @classmethod
    def from_csv(cls, source) -> "SentenceGroupSet":
        groups: dict[str, list[tuple[str, str]]] = {}
        reader = csv.reader(source)
        header = next(reader)
        if [h.strip() for h in header] != ["group", "id", "sentence"]:
            raise ValueError("sentence group files need a group,id,sentence header")
        for group, sid, sentence in reader:
            groups.setdefault(group, []).append((sid, sentence))
        return cls(groups)


def _fixture_text(name: str) -> str:
    return resources.files("fountain.fixtures").joinpath(name).read_text(encoding="utf-8")


def builtin_groups() -> SentenceGroupSet:
    """The packaged evaluation sentences (plain-language failure modes plus
    negated variants)."""
    return SentenceGroupSet.from_csv(_fixture_text("sentence_groups.csv").splitlines())


# --- check specs ----------------------------------------------------------------


@dataclass
class CheckSpec:
    row_group: str
    col_group: str
    expected_high: list[tuple[str, str]]
    expected_low: list[tuple[str, str]]
    delta: float = 0.15
    tau: float = 0.45

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    @classmethod
    def from_json(cls, text: str) -> "CheckSpec":
        data = json.loads(text)
        return cls(
            row_group=data["row_group"],
            col_group=data["col_group"],
            expected_high=[tuple(p) for p in data["expected_high"]],
            expected_low=[tuple(p) for p in data["expected_low"]],
            delta=data.get("delta", 0.15),
            tau=data.get("tau", 0.45),
        )


def builtin_similarity_checks() -> CheckSpec:
    return CheckSpec.from_json(_fixture_text("similarity_checks.json"))


def builtin_negation_checks() -> CheckSpec:
    return CheckSpec.from_json(_fixture_text("negation_checks.json"))


# --- suitability report -----------------------------------------------------------


@dataclass
class PairResult:
    a: str
    b: str
    similarity: float
    expected: str  # high | low
    ok: bool


@dataclass
class SuitabilityReport:
    row_group: str
    col_group: str
    row_ids: list[str]
    col_ids: list[str]
    matrix: list[list[float]]
    pairs: list[PairResult]
    tau: float
    delta: float
    min_high: Optional[float]
    max_low: Optional[float]
    separation: Optional[float]
    passed: bool

    def failing_pairs(self) -> list[PairResult]:
        return [p for p in self.pairs if not p.ok]

    def to_dict(self) -> dict:
        return {
            "row_group": self.row_group,
            "col_group": self.col_group,
            "row_ids": self.row_ids,
            "col_ids": self.col_ids,
            "matrix": self.matrix,
            "pairs": [
                {"a": p.a, "b": p.b, "similarity": p.similarity, "expected": p.expected, "ok": p.ok}
                for p in self.pairs
            ],
            "tau": self.tau,
            "delta": self.delta,
            "min_high": self.min_high,
            "max_low": self.max_low,
            "separation": self.separation,
            "pass": self.passed,
        }

    def to_text(self) -> str:
        width = max([len(r) for r in self.row_ids] + [7])
        col_width = max([len(c) for c in self.col_ids] + [6])
        lines = [
            " " * width + " " + " ".join(f"{c:>{col_width}}" for c in self.col_ids)
        ]
        for row_id, row in zip(self.row_ids, self.matrix):
            cells = " ".join(f"{v:>{col_width}.3f}" for v in row)
            lines.append(f"{row_id:>{width}} {cells}")
        lines.append("")
        for pair in self.pairs:
            status = "ok" if pair.ok else "FLAG"
            lines.append(
                f"{status:>4}  {{{pair.a}, {pair.b}}} expected {pair.expected:<4} similarity {pair.similarity:.3f}"
            )
        sep = "n/a" if self.separation is None else f"{self.separation:.3f}"
        lines.append("")
        lines.append(
            f"min_high={self._fmt(self.min_high)} max_low={self._fmt(self.max_low)} "
            f"separation={sep} tau={self.tau} delta={self.delta} -> "
            + ("PASS" if self.passed else "FAIL")
        )
        return "\n".join(lines) + "\n"

    @staticmethod
    def _fmt(value: Optional[float]) -> str:
        return "n/a" if value is None else f"{value:.3f}"


def run_suitability(provider, groups: SentenceGroupSet, spec: CheckSpec) -> SuitabilityReport:
    """Full cross-group cosine matrix plus per-pair classification.

    pass <=> separation >= delta AND min_high >= tau AND max_low < tau,
    with each condition vacuously true when the pair list is empty.
    """
    row_ids = groups.ids(spec.row_group)
    col_ids = groups.ids(spec.col_group)
    row_vecs = np.stack(provider.embed_batch([groups.sentence(i) for i in row_ids]))
    col_vecs = np.stack(provider.embed_batch([groups.sentence(i) for i in col_ids]))
    matrix = row_vecs @ col_vecs.T

    def lookup(a: str, b: str) -> float:
        if a in row_ids and b in col_ids:
            return float(matrix[row_ids.index(a), col_ids.index(b)])
        if b in row_ids and a in col_ids:
            return float(matrix[row_ids.index(b), col_ids.index(a)])
        missing = a if a not in row_ids and a not in col_ids else b
        raise UnknownPairId(f"pair id {missing!r} is not in either group", sentence_id=missing)

    pairs: list[PairResult] = []
    highs: list[float] = []
    lows: list[float] = []
    for a, b in spec.expected_high:
        sim = lookup(a, b)
        highs.append(sim)
        pairs.append(PairResult(a, b, sim, "high", sim >= spec.tau))
    for a, b in spec.expected_low:
        sim = lookup(a, b)
        lows.append(sim)
        pairs.append(PairResult(a, b, sim, "low", sim < spec.tau))

    min_high = min(highs) if highs else None
    max_low = max(lows) if lows else None
    separation = min_high - max_low if highs and lows else None
    passed = (
        (min_high is None or min_high >= spec.tau)
        and (max_low is None or max_low < spec.tau)
        and (separation is None or separation >= spec.delta)
    )
    return SuitabilityReport(
        row_group=spec.row_group,
        col_group=spec.col_group,
        row_ids=row_ids,
        col_ids=col_ids,
        matrix=[[float(v) for v in row] for row in matrix],
        pairs=pairs,
        tau=spec.tau,
        delta=spec.delta,
        min_high=min_high,
        max_low=max_low,
        separation=separation,
        passed=passed,
    )


def run_negation(provider, groups: Optional[SentenceGroupSet] = None) -> SuitabilityReport:
    """The negation-handling check over the negated sentence groups with
    the packaged expected-pair classification."""
    return run_suitability(provider, groups or builtin_groups(), builtin_negation_checks())


# --- feedback aggregation ----------------------------------------------------------


@dataclass
class FeedbackRecord:
    feedback_id: str
    deviation_id: int
    item_ref: int
    verdict: str  # useful | not_useful
    selected: bool = False
    justification: Optional[str] = None
    user_ref: Optional[str] = None
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")


ANONYMOUS = "anonymous"


@dataclass
class UserSummary:
    deviations_evaluated: int = 0
    all_useful: int = 0
    mixed: int = 0
    none_useful: int = 0
    incomplete: int = 0


@dataclass
class FeedbackSummary:
    users: dict[str, UserSummary] = field(default_factory=dict)
    useful_items: int = 0
    not_useful_items: int = 0

    def to_dict(self) -> dict:
        return {
            "users": {
                key: {
                    "deviations_evaluated": row.deviations_evaluated,
                    "all_useful": row.all_useful,
                    "mixed": row.mixed,
                    "none_useful": row.none_useful,
                    "incomplete": row.incomplete,
                }
                for key, row in self.users.items()
            },
            "useful_items": self.useful_items,
            "not_useful_items": self.not_useful_items,
        }


def summarize_feedback(
    records: list[FeedbackRecord],
    recommended: dict[int, list[int]],
) -> FeedbackSummary:
    """Per-user deviation categories plus global item tallies.

    The latest verdict per (user, deviation, item) wins, in record order.
    A deviation counts as all_useful / none_useful / mixed only once every
    recommended item has a verdict from that user; otherwise it is counted
    as incomplete. Records without a user_ref pool into one anonymous row.
    """
    effective: dict[tuple[str, int, int], str] = {}
    for record in records:
        if record.deviation_id not in recommended:
            raise UnknownDeviation(
                f"feedback references unknown deviation {record.deviation_id}",
                deviation_id=record.deviation_id,
            )
        user = record.user_ref if record.user_ref is not None else ANONYMOUS
        effective[(user, record.deviation_id, record.item_ref)] = record.verdict

    summary = FeedbackSummary()
    for verdict in effective.values():
        if verdict == "useful":
            summary.useful_items += 1
        else:
            summary.not_useful_items += 1

    touched: dict[str, set[int]] = {}
    for user, deviation_id, _ in effective:
        touched.setdefault(user, set()).add(deviation_id)
    for user in sorted(touched):
        row = UserSummary()
        for deviation_id in sorted(touched[user]):
            items = recommended[deviation_id]
            verdicts = [effective.get((user, deviation_id, item)) for item in items]
            if not items or any(v is None for v in verdicts):
                row.incomplete += 1
                continue
            row.deviations_evaluated += 1
            if all(v == "useful" for v in verdicts):
                row.all_useful += 1
            elif all(v == "not_useful" for v in verdicts):
                row.none_useful += 1
            else:
                row.mixed += 1
        summary.users[user] = row
    return summary


def recommended_items_from_graph(graph: Graph) -> dict[int, list[int]]:
    """Recommended failure/claim node ids per deviation, read back from the
    ``recommended`` property the linker stores on each Deviation node."""
    out: dict[int, list[int]] = {}
    for node in graph.nodes_with_label("Deviation"):
        items: list[int] = []
        raw = node.props.get("recommended")
        if isinstance(raw, str) and raw:
            try:
                data = json.loads(raw)
                items = list(data.get("failures", [])) + list(data.get("claims", []))
            except ValueError:
                items = []
        out[node.id] = items
    return out
