import hashlib
import json
import os

import pytest
from fastapi.testclient import TestClient

from fountain.persistence import load_graph
from fountain.service import AppState, ServiceConfig, create_app

BOM = (
    "part_id,parent_id,part_name,level,quantity\n"
    "P0,,exhaust system,0,1\n"
    "P1,P0,catalyst,1,1\n"
    "P2,P0,muffler,1,2\n"
)
FMEA = (
    "fmea_id,fmea_type,part_id,failure_mode,cause,effect,detection,prevention\n"
    "F-1,D,P1,substrate cracked,thermal overload during regeneration,loss of conversion efficiency,pressure drop monitoring,thermal shield\n"
    "F-2,D,P1,substrate cracked,mechanical shock from mounting,loss of conversion efficiency,,\n"
    "F-3,D,P2,shell corrosion perforation,condensate pooling at low spot,exhaust leak noise,visual inspection at service,\n"
)
CLAIMS = (
    "claim_id,part_id,claim_text,date\n"
    "CL-1,P1,rattling noise from cracked catalyst substrate,2021-04-12\n"
    "CL-2,P2,muffler rusted through after two winters,2022-01-30\n"
)
SYNONYMS = "term,canonical\ncat,catalyst\n"

QUERY = "thermal overload during regeneration causing cracking"


@pytest.fixture
def service(tmp_path):
    config = ServiceConfig(data_dir=str(tmp_path / "data"), provider="test")
    state = AppState(config)
    client = TestClient(create_app(state), raise_server_exceptions=False)
    for kind, body in (("bom", BOM), ("fmea", FMEA), ("claims", CLAIMS), ("synonyms", SYNONYMS)):
        response = client.post(f"/api/v1/admin/ingest/{kind}", content=body)
        assert response.status_code == 200, response.text
    yield client, state
    state.close()


def _state_digest(state: AppState) -> str:
    records = json.dumps(state.graph.records_since((0, 0)), sort_keys=True)
    feedback = b""
    if os.path.exists(state.paths.feedback):
        with open(state.paths.feedback, "rb") as fh:
            feedback = fh.read()
    return hashlib.sha256(records.encode() + feedback).hexdigest()


class TestDeviations:
    def test_valid_request_yields_recommendations_with_chains(self, service):
        client, _ = service
        response = client.post(
            "/api/v1/deviations",
            json={"part_ref": "P1", "requested_deviation": QUERY},
        )
        assert response.status_code == 201
        body = response.json()
        assert body["deviation_id"] >= 0
        assert len(body["recommendations"]) >= 1
        scores = [r["score"] for r in body["recommendations"]]
        assert scores == sorted(scores, reverse=True)
        for rec in body["recommendations"]:
            assert rec["chain"]["failure_text"] == rec["failure_text"]
            assert rec["chain"]["causes"], "chain must be non-empty"
            for match in rec["matched"]:
                assert match["similarity"] >= 0.45

    def test_unknown_part_404_with_suggestions(self, service):
        client, _ = service
        response = client.post(
            "/api/v1/deviations",
            json={"part_ref": "caatalyst", "requested_deviation": "x"},
        )
        assert response.status_code == 404
        error = response.json()["error"]
        assert error["code"] == "part_not_found"
        assert "catalyst" in error["details"]["suggestions"]

    def test_missing_required_field_400(self, service):
        client, _ = service
        response = client.post("/api/v1/deviations", json={"part_ref": "P1"})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "malformed_body"

    def test_blank_deviation_text_400(self, service):
        client, _ = service
        response = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": "   "}
        )
        assert response.status_code == 400

    def test_synonym_resolution_in_part_ref(self, service):
        client, _ = service
        response = client.post(
            "/api/v1/deviations", json={"part_ref": "cat", "requested_deviation": QUERY}
        )
        assert response.status_code == 201

    def test_ambiguous_part_409(self, service):
        client, state = service
        state.graph.create_node(["Part"], {"id": "PX", "name": "Catalyst"})
        response = client.post(
            "/api/v1/deviations", json={"part_ref": "CATALYST", "requested_deviation": "x"}
        )
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "ambiguous_part"


class TestExplanation:
    def _one_recommendation(self, client):
        response = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY}
        )
        body = response.json()
        return body["deviation_id"], body["recommendations"][0]

    def test_explanation_with_deviation_similarities(self, service):
        client, _ = service
        deviation_id, rec = self._one_recommendation(client)
        response = client.get(
            f"/api/v1/failures/{rec['failure_id']}/explanation",
            params={"deviation": deviation_id},
        )
        assert response.status_code == 200
        chain = response.json()
        assert chain == rec["chain"]
        assert any(c["similarity"] is not None for c in chain["causes"])

    def test_explanation_without_deviation_has_no_similarities(self, service):
        client, _ = service
        _, rec = self._one_recommendation(client)
        response = client.get(f"/api/v1/failures/{rec['failure_id']}/explanation")
        assert response.status_code == 200
        for group in ("causes", "effects", "detections", "preventions"):
            assert all(entry["similarity"] is None for entry in response.json()[group])

    def test_part_id_is_not_a_failure_mode(self, service):
        client, state = service
        part = next(iter(state.graph.nodes_with_label("Part"))).id
        response = client.get(f"/api/v1/failures/{part}/explanation")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "not_a_failure_mode"

    def test_unknown_failure_404(self, service):
        client, _ = service
        assert client.get("/api/v1/failures/424242/explanation").status_code == 404

    def test_read_endpoints_do_not_mutate_state(self, service):
        client, state = service
        deviation_id, rec = self._one_recommendation(client)
        before = _state_digest(state)
        client.get(f"/api/v1/failures/{rec['failure_id']}/explanation")
        client.get(f"/api/v1/failures/{rec['failure_id']}/explanation", params={"deviation": deviation_id})
        client.get("/api/v1/stats/feedback")
        client.get("/api/v1/health")
        assert _state_digest(state) == before


class TestFeedback:
    def _recommend(self, client):
        body = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY}
        ).json()
        return body["deviation_id"], body["recommendations"][0]["failure_id"]

    def test_useful_verdict_counts_in_stats(self, service):
        client, _ = service
        deviation_id, failure_id = self._recommend(client)
        response = client.post(
            "/api/v1/feedback",
            json={"deviation_id": deviation_id, "item_ref": failure_id, "verdict": "useful"},
        )
        assert response.status_code == 201
        assert response.json()["feedback_id"].startswith("fb-")
        stats = client.get("/api/v1/stats/feedback").json()
        assert stats["useful_items"] == 1
        assert stats["users"]["anonymous"]["all_useful"] == 1

    def test_invalid_verdict_400(self, service):
        client, _ = service
        deviation_id, failure_id = self._recommend(client)
        response = client.post(
            "/api/v1/feedback",
            json={"deviation_id": deviation_id, "item_ref": failure_id, "verdict": "maybe"},
        )
        assert response.status_code == 400

    def test_unknown_ids_404(self, service):
        client, _ = service
        deviation_id, failure_id = self._recommend(client)
        assert (
            client.post(
                "/api/v1/feedback",
                json={"deviation_id": 999_999, "item_ref": failure_id, "verdict": "useful"},
            ).status_code
            == 404
        )
        assert (
            client.post(
                "/api/v1/feedback",
                json={"deviation_id": deviation_id, "item_ref": 999_999, "verdict": "useful"},
            ).status_code
            == 404
        )

    def test_resubmission_flips_effective_verdict(self, service):
        client, _ = service
        deviation_id, failure_id = self._recommend(client)
        base = {"deviation_id": deviation_id, "item_ref": failure_id, "user_ref": "u1"}
        client.post("/api/v1/feedback", json={**base, "verdict": "not_useful"})
        stats = client.get("/api/v1/stats/feedback").json()
        assert stats["users"]["u1"]["none_useful"] == 1
        client.post("/api/v1/feedback", json={**base, "verdict": "useful"})
        stats = client.get("/api/v1/stats/feedback").json()
        assert stats["users"]["u1"]["none_useful"] == 0
        assert stats["users"]["u1"]["all_useful"] == 1
        assert stats["useful_items"] == 1 and stats["not_useful_items"] == 0

    def test_stats_on_empty_log(self, service):
        client, _ = service
        stats = client.get("/api/v1/stats/feedback").json()
        assert stats == {"users": {}, "useful_items": 0, "not_useful_items": 0}


class TestRiskText:
    def test_block_and_selected_feedback(self, service):
        client, _ = service
        body = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY}
        ).json()
        deviation_id = body["deviation_id"]
        rec = body["recommendations"][0]
        response = client.post(
            "/api/v1/risk-text",
            json={
                "deviation_id": deviation_id,
                "failure_id": rec["failure_id"],
                "justification": "mitigated by 100% inspection",
            },
        )
        assert response.status_code == 200
        text = response.json()["text"]
        assert text.startswith(f"RISK: {rec['failure_text']}\n")
        assert text.endswith("  JUSTIFICATION: mitigated by 100% inspection\n")
        for cause in rec["chain"]["causes"]:
            assert f"  CAUSE: {cause['text']}\n" in text
        stats = client.get("/api/v1/stats/feedback").json()
        assert stats["useful_items"] == 1

    def test_no_justification_line_when_omitted(self, service):
        client, _ = service
        body = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY}
        ).json()
        response = client.post(
            "/api/v1/risk-text",
            json={
                "deviation_id": body["deviation_id"],
                "failure_id": body["recommendations"][0]["failure_id"],
            },
        )
        assert "JUSTIFICATION" not in response.json()["text"]

    def test_unknown_ids_404(self, service):
        client, _ = service
        response = client.post(
            "/api/v1/risk-text", json={"deviation_id": 999_999, "failure_id": 1}
        )
        assert response.status_code == 404


class TestAdmin:
    def test_ingest_counts_match_loader_contract(self, tmp_path):
        config = ServiceConfig(data_dir=str(tmp_path / "data"), provider="test")
        state = AppState(config)
        client = TestClient(create_app(state))
        response = client.post("/api/v1/admin/ingest/bom", content=BOM)
        assert response.status_code == 200
        counts = response.json()
        assert counts["parts_created"] == 3 and counts["edges_created"] == 2
        response = client.post("/api/v1/admin/ingest/fmea", content=FMEA)
        assert response.json() == {
            "records_read": 3,
            "chains_created": 3,
            "duplicates_dropped": 0,
        }
        state.close()

    def test_ingest_error_maps_to_400(self, service):
        client, _ = service
        response = client.post("/api/v1/admin/ingest/bom", content="garbage,header\n1,2\n")
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "malformed_row"

    def test_unknown_kind_400(self, service):
        client, _ = service
        assert client.post("/api/v1/admin/ingest/nope", content="x").status_code == 400

    def test_concurrent_ingest_409(self, service):
        client, state = service
        assert state._ingest_lock.acquire(blocking=False)
        try:
            response = client.post("/api/v1/admin/ingest/bom", content=BOM)
            assert response.status_code == 409
            assert response.json()["error"]["code"] == "ingest_in_progress"
        finally:
            state._ingest_lock.release()

    def test_snapshot_endpoint_compacts_wal(self, service):
        client, state = service
        client.post("/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY})
        assert os.path.exists(state.paths.deviations_wal)
        response = client.post("/api/v1/admin/snapshot")
        assert response.status_code == 200
        assert not os.path.exists(state.paths.deviations_wal)
        reloaded = load_graph(state.paths)
        assert reloaded == state.graph


class TestCrashRecovery:
    def test_restart_reproduces_acknowledged_state(self, tmp_path):
        data_dir = str(tmp_path / "data")
        config = ServiceConfig(data_dir=data_dir, provider="test")
        state = AppState(config)
        client = TestClient(create_app(state))
        for kind, body in (("bom", BOM), ("fmea", FMEA), ("claims", CLAIMS)):
            client.post(f"/api/v1/admin/ingest/{kind}", content=body)
        deviation = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY}
        ).json()
        for _ in range(3):
            client.post(
                "/api/v1/feedback",
                json={
                    "deviation_id": deviation["deviation_id"],
                    "item_ref": deviation["recommendations"][0]["failure_id"],
                    "verdict": "useful",
                },
            )
        graph_before = state.graph
        # crash: in-flight appends torn mid-write, state abandoned without close
        with open(state.paths.feedback, "a") as fh:
            fh.write('{"seq": 99, "feedback_id": "fb-torn"')
        with open(state.paths.deviations_wal, "a") as fh:
            fh.write('{"deviation": 123, "records": [')

        revived = AppState(ServiceConfig(data_dir=data_dir, provider="test"))
        assert revived.graph == graph_before
        assert len(revived.feedback_log.replay()) == 3
        # the revived log continues the sequence without clashing
        client2 = TestClient(create_app(revived))
        response = client2.post(
            "/api/v1/feedback",
            json={
                "deviation_id": deviation["deviation_id"],
                "item_ref": deviation["recommendations"][0]["failure_id"],
                "verdict": "not_useful",
            },
        )
        assert response.status_code == 201
        assert len(revived.feedback_log.replay()) == 4
        revived.close()
        state.close()

    def test_wal_replay_preserves_ids(self, tmp_path):
        data_dir = str(tmp_path / "data")
        state = AppState(ServiceConfig(data_dir=data_dir, provider="test"))
        client = TestClient(create_app(state))
        for kind, body in (("bom", BOM), ("fmea", FMEA)):
            client.post(f"/api/v1/admin/ingest/{kind}", content=body)
        first = client.post(
            "/api/v1/deviations", json={"part_ref": "P1", "requested_deviation": QUERY}
        ).json()
        revived = AppState(ServiceConfig(data_dir=data_dir, provider="test"))
        node = revived.graph.node(first["deviation_id"])
        assert "Deviation" in node.labels
        edges = revived.graph.neighbors(first["deviation_id"], "out", "SIMILAR_TO")
        matched = {m["node_id"] for r in first["recommendations"] for m in r["matched"]}
        assert matched <= {n.id for _, n in edges} | set()
        state.close()
        revived.close()


class TestHealth:
    def test_health_counts(self, service):
        client, state = service
        body = client.get("/api/v1/health").json()
        assert body["status"] == "ok"
        assert body["nodes"] == state.graph.node_count()
