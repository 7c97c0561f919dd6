from __future__ import annotations

import csv
import io
import random

import numpy as np
import pytest

from fountain.graph import Graph
from fountain.ingest import SynonymMap, load_bom, load_claims, load_fmea
from fountain.query.ast import (
    Literal,
    NodePattern,
    Param,
    Predicate,
    PropRef,
    QueryAst,
    RelPattern,
    ReturnItem,
)


# --- small fixed fixtures -----------------------------------------------------


@pytest.fixture
def synonyms_cat() -> SynonymMap:
    return SynonymMap([("cat", "catalyst"), ("cat converter", "catalytic converter")])


def small_fixture_graph() -> Graph:
    """One assembly with a child part, two failure modes, causes/effects,
    and a warranty claim; built through the real loaders."""
    graph = Graph()
    load_bom(graph, io.StringIO(
        "part_id,parent_id,part_name,level,quantity\n"
        "P0,,exhaust system,0,1\n"
        "P1,P0,catalyst,1,1\n"
        "P2,P0,muffler,1,2\n"
    ))
    load_fmea(graph, io.StringIO(
        "fmea_id,fmea_type,part_id,failure_mode,cause,effect,detection,prevention\n"
        "F-1,D,P1,substrate cracked,thermal overload during regeneration,loss of conversion efficiency,pressure drop monitoring,thermal shield\n"
        "F-2,D,P1,substrate cracked,mechanical shock from mounting,loss of conversion efficiency,,\n"
        "F-3,D,P2,shell corrosion perforation,condensate pooling at low spot,exhaust leak noise,visual inspection at service,\n"
    ), SynonymMap.empty())
    load_claims(graph, io.StringIO(
        "claim_id,part_id,claim_text,date\n"
        "CL-1,P1,rattling noise from cracked catalyst substrate,2021-04-12\n"
        "CL-2,P2,muffler rusted through after two winters,2022-01-30\n"
    ), SynonymMap.empty())
    return graph


@pytest.fixture
def fixture_graph() -> Graph:
    return small_fixture_graph()


def external_id_map(graph: Graph, label: str) -> dict[str, int]:
    return {
        node.props["id"]: node.id
        for node in graph.nodes_with_label(label)
        if "id" in node.props
    }


def node_by_text(graph: Graph, label: str, text: str) -> int:
    hits = [n.id for n in graph.nodes_with_label(label) if n.props.get("text") == text]
    assert len(hits) == 1, (label, text, hits)
    return hits[0]


# --- lookup-vector construction --------------------------------------------------


def cluster_vectors(
    sentences: list[str],
    clusters: list[list[str]],
    within: float = 0.9,
) -> dict[str, list[float]]:
    """Unit vectors with cosine == `within` inside each cluster and 0.0
    across clusters / to unclustered sentences.

    Construction: orthogonal basis direction per cluster plus an orthogonal
    per-sentence noise axis: v = sqrt(within)*c_k + sqrt(1-within)*e_i.
    """
    ordered = sorted(set(sentences))
    cluster_of: dict[str, int] = {}
    for idx, members in enumerate(clusters):
        for text in members:
            assert text in set(ordered), f"cluster sentence {text!r} not in sentence list"
            cluster_of[text] = idx
    next_cluster = len(clusters)
    for text in ordered:
        if text not in cluster_of:
            cluster_of[text] = next_cluster
            next_cluster += 1
    dim = next_cluster + len(ordered)
    out: dict[str, list[float]] = {}
    for i, text in enumerate(ordered):
        vec = np.zeros(dim)
        vec[cluster_of[text]] = np.sqrt(within)
        vec[next_cluster + i] = np.sqrt(1.0 - within)
        out[text] = vec.tolist()
    return out


def forced_vectors(
    query_text: str,
    sims: dict[str, float],
    zero_texts: list[str] | tuple[str, ...] = (),
) -> dict[str, list[float]]:
    """Lookup-provider vectors giving each text an exact cosine against the
    query: v = s*q + sqrt(1-s^2)*e_i on per-text orthogonal axes."""
    dim = 1 + len(sims) + len(zero_texts)
    out = {query_text: [1.0] + [0.0] * (dim - 1)}
    axis = 1
    for text, s in sims.items():
        vec = [0.0] * dim
        vec[0] = s
        vec[axis] = float(np.sqrt(1.0 - s * s))
        out[text] = vec
        axis += 1
    for text in zero_texts:
        vec = [0.0] * dim
        vec[axis] = 1.0
        out[text] = vec
        axis += 1
    return out


# --- random graphs and queries for the differential suite -------------------------

_LABELS = ["Part", "FailureMode", "Cause", "Widget", "Gadget"]
_NODE_KEYS = ["id", "name", "severity", "score", "ok"]
_EDGE_TYPES = ["HAS_CAUSE", "REL_A", "REL_B"]
_VALUES = ["a", "b", "c", "alpha", 0, 1, 2, 7, 0.5, 1.5, 2.5, True, False]


def random_property_graph(rng: random.Random, max_nodes: int = 50) -> Graph:
    graph = Graph()
    n = rng.randint(1, max_nodes)
    for _ in range(n):
        labels = rng.sample(_LABELS, rng.randint(1, 2))
        props = {}
        for key in rng.sample(_NODE_KEYS, rng.randint(0, 3)):
            props[key] = rng.choice(_VALUES)
        graph.create_node(labels, props)
    ids = [node.id for node in graph.nodes()]
    for _ in range(rng.randint(0, 2 * n)):
        src, dst = rng.choice(ids), rng.choice(ids)
        props = {}
        if rng.random() < 0.4:
            props["w"] = rng.choice(_VALUES)
        graph.create_edge(rng.choice(_EDGE_TYPES), src, dst, props)
    return graph


def random_query(rng: random.Random, graph: Graph) -> tuple[QueryAst, dict]:
    hops = rng.choices([0, 1, 2, 3, 4], weights=[25, 30, 25, 15, 5])[0]
    params: dict = {}
    pool_nodes = list(graph.nodes())

    def value_expr():
        # half the time pick a value that exists somewhere, to get matches
        if pool_nodes and rng.random() < 0.5:
            node = rng.choice(pool_nodes)
            if node.props:
                value = node.props[rng.choice(sorted(node.props))]
            else:
                value = rng.choice(_VALUES)
        else:
            value = rng.choice(_VALUES)
        if rng.random() < 0.3:
            name = f"p{len(params)}"
            params[name] = value
            return Param(name)
        return Literal(value)

    nodes = []
    var_count = 0
    for i in range(hops + 1):
        var = None
        if rng.random() < 0.8:
            var = f"v{var_count}"
            var_count += 1
        label = rng.choice(_LABELS) if rng.random() < 0.4 else None
        props = []
        if rng.random() < 0.35:
            for key in rng.sample(_NODE_KEYS, rng.randint(1, 2)):
                props.append((key, value_expr()))
        nodes.append(NodePattern(var, label, tuple(props)))
    rels = []
    for _ in range(hops):
        var = None
        if rng.random() < 0.3:
            var = f"v{var_count}"
            var_count += 1
        rel_type = rng.choice(_EDGE_TYPES) if rng.random() < 0.5 else None
        rels.append(RelPattern(var, rel_type, rng.choice(["right", "left"])))

    bound = [n.var for n in nodes if n.var] + [r.var for r in rels if r.var]
    if not bound:
        nodes[0] = NodePattern("v0", nodes[0].label, nodes[0].props)
        bound = ["v0"]

    where = []
    node_vars = [n.var for n in nodes if n.var]
    for _ in range(rng.randint(0, 2)):
        lhs = PropRef(rng.choice(bound), rng.choice(_NODE_KEYS + ["w"]))
        op = rng.choice(["=", "<>", "<", ">", "<=", ">=", "CONTAINS"])
        if rng.random() < 0.3 and node_vars:
            rhs = PropRef(rng.choice(bound), rng.choice(_NODE_KEYS + ["w"]))
        else:
            rhs = value_expr()
        where.append(Predicate(lhs, op, rhs))

    returns = []
    for _ in range(rng.randint(1, 3)):
        var = rng.choice(bound)
        key = rng.choice(_NODE_KEYS + ["w"]) if rng.random() < 0.5 else None
        returns.append(ReturnItem(var, key))

    limit = rng.randint(1, 10) if rng.random() < 0.25 else None
    return QueryAst(tuple(nodes), tuple(rels), tuple(where), tuple(returns), limit), params


def normalize_rows(rows) -> list[tuple]:
    from fountain.graph import Edge, Node, kind_of

    out = []
    for row in rows:
        norm = []
        for value in row:
            if isinstance(value, Node):
                norm.append(("n", value.id))
            elif isinstance(value, Edge):
                norm.append(("e", value.id))
            elif value is None:
                norm.append(None)
            else:
                norm.append(("v", kind_of(value), value))
        out.append(tuple(norm))
    return out


# --- random FMEA worlds for linker tests -------------------------------------------

_WORDS = [
    "weld", "seam", "crack", "leak", "flow", "noise", "vibration", "mount",
    "bracket", "corrosion", "rust", "thermal", "overload", "sensor", "gasket",
    "seal", "torque", "fatigue", "pipe", "flange", "coating", "surface",
    "pressure", "drop", "rattle", "shield", "clamp", "bolt", "misalignment",
]


def _phrase(rng: random.Random, lo: int = 2, hi: int = 6) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(lo, hi)))


def random_fmea_world(rng: random.Random, max_parts: int = 12) -> tuple[Graph, list[str]]:
    """A BOM tree with FMEA chains and claims, built through the loaders.

    Returns the graph and the part external ids (for picking request refs).
    Node count stays well under 200.
    """
    graph = Graph()
    n_parts = rng.randint(2, max_parts)
    bom = io.StringIO()
    writer = csv.writer(bom)
    writer.writerow(["part_id", "parent_id", "part_name", "level", "quantity"])
    part_ids = []
    for i in range(n_parts):
        part_id = f"P{i}"
        parent = "" if i == 0 else f"P{rng.randint(0, i - 1)}"
        writer.writerow([part_id, parent, _phrase(rng, 1, 2) + f" {i}", 0 if i == 0 else 1, 1])
        part_ids.append(part_id)
    load_bom(graph, io.StringIO(bom.getvalue()))

    fmea = io.StringIO()
    writer = csv.writer(fmea)
    writer.writerow(FMEA_HEADER)
    row_id = 0
    for part_id in part_ids:
        for _ in range(rng.randint(0, 3)):
            failure = _phrase(rng)
            for _ in range(rng.randint(1, 3)):
                row_id += 1
                writer.writerow([
                    f"R{row_id}",
                    rng.choice("DP"),
                    part_id,
                    failure,
                    _phrase(rng),
                    _phrase(rng) if rng.random() < 0.7 else "",
                    _phrase(rng) if rng.random() < 0.4 else "",
                    _phrase(rng) if rng.random() < 0.3 else "",
                ])
    if row_id:
        load_fmea(graph, io.StringIO(fmea.getvalue()), SynonymMap.empty())

    claims = io.StringIO()
    writer = csv.writer(claims)
    writer.writerow(["claim_id", "part_id", "claim_text", "date"])
    n_claims = rng.randint(0, 5)
    for i in range(n_claims):
        writer.writerow([f"CL{i}", rng.choice(part_ids), _phrase(rng), "2023-05-17"])
    if n_claims:
        load_claims(graph, io.StringIO(claims.getvalue()), SynonymMap.empty())
    return graph, part_ids


FMEA_HEADER = [
    "fmea_id", "fmea_type", "part_id", "failure_mode", "cause", "effect", "detection", "prevention",
]


def random_query_phrase(rng: random.Random) -> str:
    return _phrase(rng, 3, 8)


# --- feedback log construction ------------------------------------------------------


def build_user_feedback(
    user: str | None,
    all_useful: int,
    mixed: int,
    none_useful: int,
    start_deviation: int = 0,
    items_per_deviation: int = 2,
):
    """Synthetic feedback records realizing exact per-category counts.

    Returns (records, recommended_map). Every deviation gets
    items_per_deviation recommended items, all of them verdicted.
    """
    from fountain.evalsuite import FeedbackRecord

    records: list[FeedbackRecord] = []
    recommended: dict[int, list[int]] = {}
    deviation = start_deviation
    plans = (
        [("useful",) * items_per_deviation] * all_useful
        + [("useful",) + ("not_useful",) * (items_per_deviation - 1)] * mixed
        + [("not_useful",) * items_per_deviation] * none_useful
    )
    for plan in plans:
        items = [deviation * 100 + i for i in range(items_per_deviation)]
        recommended[deviation] = items
        for item, verdict in zip(items, plan):
            records.append(
                FeedbackRecord(
                    feedback_id=f"fb-{deviation}-{item}",
                    deviation_id=deviation,
                    item_ref=item,
                    verdict=verdict,
                    user_ref=user,
                )
            )
        deviation += 1
    return records, recommended


def random_feedback_log(rng: random.Random):
    """Random multi-user log with partial verdicts and verdict flips."""
    from fountain.evalsuite import FeedbackRecord

    users = [None, "u1", "u2"]
    recommended: dict[int, list[int]] = {}
    records: list[FeedbackRecord] = []
    n_devs = rng.randint(0, 12)
    for dev in range(n_devs):
        items = [dev * 10 + i for i in range(rng.randint(1, 4))]
        recommended[dev] = items
        for user in users:
            if rng.random() < 0.4:
                continue
            for item in items:
                for _ in range(rng.randint(0, 2)):  # 0 = unverdicted, 2 = flip
                    records.append(
                        FeedbackRecord(
                            feedback_id=f"r{len(records)}",
                            deviation_id=dev,
                            item_ref=item,
                            verdict=rng.choice(["useful", "not_useful"]),
                            user_ref=user,
                        )
                    )
    rng.shuffle(records)
    return records, recommended
