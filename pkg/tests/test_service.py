"""Annotation session durability and the HTTP wire contract."""

import dataclasses
import json

import pytest
from fastapi.testclient import TestClient

from gosl.config import ExperimentConfig
from gosl.errors import StateError
from gosl.loop import RunSettings, run_experiment, simulated_oracle
from gosl.service import create_app
from gosl.session import AnswerOutOfRange, AnswerRejected, HumanSession

SBM = {
    "classes": 5, "nodes_per_class": 60, "p_intra": 0.12, "p_inter": 0.01,
    "feature_dim": 8, "class_mean_separation": 3.0, "feature_noise_std": 0.8,
    "seed": 2,
}
CONFIG = {
    "sbm": SBM,
    "id_classes": [0, 1, 2],
    "seeds": [0],
    "split_seed": 2,
    "hidden": 8,
    "epochs": 40,
    "m": 6,
}


def make_config():
    return ExperimentConfig.from_dict(dict(CONFIG))


def make_session(tmp_path, seed=0):
    return HumanSession.create(tmp_path / "sess", make_config(), seed=seed)


def oracle_for(session):
    return simulated_oracle(session.loop.graph, session.loop.split)


def answer_batch(session, oracle):
    for node in list(session.loop.pending):
        session.submit_answer(node, oracle.query(node))


class TestHumanSession:
    def test_create_writes_files(self, tmp_path):
        session = make_session(tmp_path)
        d = session.directory
        assert (d / "config.json").exists()
        assert (d / "state.json").exists()
        assert session.status()["status"] == "awaiting_annotations"

    def test_create_refuses_existing(self, tmp_path):
        make_session(tmp_path)
        with pytest.raises(StateError):
            make_session(tmp_path)

    def test_open_missing(self, tmp_path):
        with pytest.raises(StateError):
            HumanSession.open(tmp_path / "nothing")

    def test_answer_validation(self, tmp_path):
        session = make_session(tmp_path)
        node = session.loop.pending[0]
        with pytest.raises(AnswerOutOfRange):
            session.submit_answer(node, 99)
        with pytest.raises(AnswerRejected):
            session.submit_answer(10 ** 9, 0)
        session.submit_answer(node, 0)
        with pytest.raises(AnswerRejected):
            session.submit_answer(node, 1)

    def test_crash_mid_batch_resumes_without_loss(self, tmp_path):
        session = make_session(tmp_path)
        oracle = oracle_for(session)
        pending = list(session.loop.pending)
        for node in pending[:7]:
            session.submit_answer(node, oracle.query(node))
        del session  # simulated crash: no snapshot written mid-batch

        resumed = HumanSession.open(tmp_path / "sess")
        assert set(resumed.partial) == set(pending[:7])
        # Replayed answers must refuse a duplicate.
        with pytest.raises(AnswerRejected):
            resumed.submit_answer(pending[0], 0)
        for node in pending[7:]:
            resumed.submit_answer(node, oracle.query(node))
        assert resumed.loop.round_index == 1

    def test_session_matches_simulated_run(self, tmp_path):
        session = make_session(tmp_path, seed=3)
        oracle = oracle_for(session)
        while not session.loop.finished:
            answer_batch(session, oracle)
        ref = run_experiment(session.loop.graph, session.loop.split,
                             session.loop.settings, oracle, seed=3)
        assert [a.key() for a in session.loop.reports] == [b.key() for b in ref.reports]
        rep = session.final_report()
        assert rep["final_precision"] == pytest.approx(ref.final_precision)
        assert rep["metrics"] == ref.final_metrics.as_dict()

    def test_pending_item_shape(self, tmp_path):
        session = make_session(tmp_path)
        item = session.pending_item(session.loop.pending[0], hops=2)
        assert set(item) == {"node_id", "round", "degree", "feature_preview",
                             "neighbor_summary", "two_hop_summary"}
        assert item["round"] == 0
        assert item["degree"] >= 0


class TestHttpService:
    def build(self, tmp_path, token=None):
        session = make_session(tmp_path)
        client = TestClient(create_app(session, session_token=token))
        return session, client

    def test_status_contract(self, tmp_path):
        session, client = self.build(tmp_path)
        body = client.get("/api/status").json()
        assert body == {
            "round": 0,
            "answered": 0,
            "pending": len(session.loop.pending),
            "total_budget": session.loop.plan.total,
            "precision_so_far": 0.0,
            "status": "awaiting_annotations",
            "finished": False,
        }

    def test_queue_and_node_detail(self, tmp_path):
        session, client = self.build(tmp_path)
        queue = client.get("/api/queue").json()
        assert [q["node_id"] for q in queue] == list(session.loop.pending)
        node = queue[0]["node_id"]
        detail = client.get(f"/api/node/{node}").json()
        assert detail["node_id"] == node
        assert detail["two_hop_summary"] is not None
        assert client.get("/api/node/999999").status_code == 404

    def test_classes_endpoint(self, tmp_path):
        _, client = self.build(tmp_path)
        body = client.get("/api/classes").json()
        assert body == {"classes": ["class_0", "class_1", "class_2"], "unknown": -1}

    def test_label_accept_and_reject(self, tmp_path):
        session, client = self.build(tmp_path)
        node = session.loop.pending[0]
        r = client.post("/api/label", json={"node_id": node, "answer": 1})
        assert r.status_code == 200
        assert r.json()["accepted"] is True
        assert r.json()["answered"] == 1
        # Duplicate -> 409, out-of-range -> 422.
        assert client.post("/api/label", json={"node_id": node, "answer": 1}).status_code == 409
        other = session.loop.pending[1]
        assert client.post("/api/label", json={"node_id": other, "answer": 42}).status_code == 422
        assert client.post("/api/label", json={"node_id": 999999, "answer": 0}).status_code == 409

    def test_token_enforced(self, tmp_path):
        session, client = self.build(tmp_path, token="s3cret")
        node = session.loop.pending[0]
        assert client.post("/api/label", json={"node_id": node, "answer": 0}).status_code == 403
        r = client.post("/api/label", json={"node_id": node, "answer": 0},
                        headers={"X-Session-Token": "s3cret"})
        assert r.status_code == 200
        # Reads stay open.
        assert client.get("/api/status").status_code == 200

    def test_report_available_only_when_finished(self, tmp_path):
        session, client = self.build(tmp_path)
        assert client.get("/api/report").status_code == 409
        oracle = oracle_for(session)
        while not session.loop.finished:
            for node in list(session.loop.pending):
                ans = oracle.query(node)
                assert client.post("/api/label",
                                   json={"node_id": node, "answer": ans}).status_code == 200
        rep = client.get("/api/report")
        assert rep.status_code == 200
        body = rep.json()
        assert {"final_precision", "total_annotated", "truncated", "metrics", "rounds"} <= set(body)
        assert client.get("/api/status").json()["finished"] is True

    def test_scripted_http_session_reproduces_simulated_run(self, tmp_path):
        session, client = self.build(tmp_path)
        oracle = oracle_for(session)
        while client.get("/api/status").json()["status"] == "awaiting_annotations":
            for item in client.get("/api/queue").json():
                node = item["node_id"]
                client.post("/api/label", json={"node_id": node, "answer": oracle.query(node)})
        ref = run_experiment(session.loop.graph, session.loop.split,
                             session.loop.settings, oracle, seed=0)
        got = client.get("/api/report").json()
        assert got["rounds"] == [
            {**r.key(), "elapsed": rr["elapsed"]}
            for r, rr in zip(ref.reports, got["rounds"])
        ]
        assert got["metrics"] == ref.final_metrics.as_dict()
