"""Durable human-annotation sessions layered on the active loop.

A session directory holds three files:

* ``config.json``  — experiment definition (dataset/SBM, split seed, run
  settings, run seed, class names)
* ``state.json``   — loop snapshot, rewritten whenever a batch completes
* ``answers.log``  — append-only JSON lines, one per accepted answer; the
  durability primitive (appended and flushed before acknowledgement)

On restart the snapshot is restored and any logged answers for the current
batch are replayed, so no answer is ever lost or applied twice.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import StateError
from .graph import UNKNOWN
from .loop import ActiveLoop, RoundReport


class AnswerRejected(Exception):
    """Answer refused because the node is not pending or already answered."""


class AnswerOutOfRange(Exception):
    """Answer value outside {0..C-1} ∪ {UNKNOWN}."""


class HumanSession:
    """Single-annotator session: one pending batch at a time, durable answers."""

    directory: Path
    config: ExperimentConfig
    loop: ActiveLoop
    seed: int
    strategy: str
    ablation: str
    partial: dict[int, int]
    lock: threading.Lock
    id_classes: tuple[int, ...]

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, directory, config: ExperimentConfig, seed: int,
               strategy: str = "lego", ablation: str = "none") -> "HumanSession":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / "state.json").exists():
            raise StateError(f"session already exists at {directory}")
        graph, id_classes = config.load_graph()
        split = config.build_split(graph, id_classes)
        settings = config.run_settings(strategy, ablation)
        loop = ActiveLoop(graph, split, settings, seed)
        session = cls.__new__(cls)
        session.directory = directory
        session.config = config
        session.loop = loop
        session.seed = seed
        session.strategy = strategy
        session.ablation = ablation
        session.partial = {}
        session.lock = threading.Lock()
        session.id_classes = id_classes
        (directory / "config.json").write_text(json.dumps({
            "experiment": config.to_dict(),
            "seed": seed,
            "strategy": strategy,
            "ablation": ablation,
        }, indent=2))
        session._write_snapshot()
        return session

    @classmethod
    def open(cls, directory) -> "HumanSession":
        directory = Path(directory)
        cfg_path = directory / "config.json"
        state_path = directory / "state.json"
        if not cfg_path.exists() or not state_path.exists():
            raise StateError(f"no session at {directory}")
        try:
            meta = json.loads(cfg_path.read_text())
            snap = json.loads(state_path.read_text())
        except json.JSONDecodeError as exc:
            raise StateError(f"corrupt session files in {directory}: {exc}") from exc
        config = ExperimentConfig.from_dict(meta["experiment"])
        graph, id_classes = config.load_graph()
        split = config.build_split(graph, id_classes)
        settings = config.run_settings(meta["strategy"], meta["ablation"])
        loop = ActiveLoop.restore(graph, split, settings, snap)
        session = cls.__new__(cls)
        session.directory = directory
        session.config = config
        session.loop = loop
        session.seed = meta["seed"]
        session.strategy = meta["strategy"]
        session.ablation = meta["ablation"]
        session.partial = {}
        session.lock = threading.Lock()
        session.id_classes = id_classes
        session._replay_log()
        return session

    # -- persistence ----------------------------------------------------------

    @property
    def _log_path(self) -> Path:
        return self.directory / "answers.log"

    def _write_snapshot(self) -> None:
        tmp = self.directory / "state.json.tmp"
        tmp.write_text(json.dumps(self.loop.snapshot()))
        tmp.replace(self.directory / "state.json")

    def _append_log(self, node: int, answer: int, annotator: str) -> None:
        record = {
            "node_id": node,
            "answer": answer,
            "round": self.loop.round_index,
            "timestamp": time.time(),
            "annotator": annotator,
        }
        with open(self._log_path, "a") as f:
            f.write(json.dumps(record) + "\n")
            f.flush()

    def _replay_log(self) -> None:
        if not self._log_path.exists():
            return
        for line in self._log_path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["round"] != self.loop.round_index:
                continue  # belongs to an already-snapshotted batch
            node = int(rec["node_id"])
            if node in self.loop.pending and node not in self.partial:
                self._accept(node, int(rec["answer"]))

    # -- annotation ------------------------------------------------------------

    @property
    def n_id_classes(self) -> int:
        return self.loop.split.n_id_classes

    def class_names(self) -> list[str]:
        names = None
        if self.config.dataset is not None:
            from .data import REGISTRY
            names = REGISTRY.get(self.config.dataset, {}).get("class_order")
        if names is not None:
            return [names[c] for c in self.id_classes]
        return [f"class_{c}" for c in self.id_classes]

    def submit_answer(self, node: int, answer: int, annotator: str = "human") -> None:
        """Validate, durably log, and apply one answer; advance on completion."""
        with self.lock:
            node = int(node)
            if not isinstance(answer, int) or (answer != UNKNOWN and
                                               not 0 <= answer < self.n_id_classes):
                raise AnswerOutOfRange(
                    f"answer must be in 0..{self.n_id_classes - 1} or {UNKNOWN}")
            if node not in self.loop.pending:
                raise AnswerRejected(f"node {node} is not in the pending batch")
            if node in self.partial:
                raise AnswerRejected(f"node {node} already answered")
            self._append_log(node, answer, annotator)
            self._accept(node, answer)

    def _accept(self, node: int, answer: int) -> None:
        self.partial[node] = answer
        if len(self.partial) == len(self.loop.pending):
            self.loop.submit(dict(self.partial))
            self.partial = {}
            self._write_snapshot()

    # -- views -------------------------------------------------------------------

    def status(self) -> dict:
        answered = self.loop.cum_p + self.loop.cum_q + len(self.partial)
        return {
            "round": self.loop.round_index,
            "answered": answered,
            "pending": len(self.loop.pending) - len(self.partial),
            "total_budget": self.loop.plan.total,
            "precision_so_far": self.loop.cumulative_precision(),
            "status": "idle" if self.loop.finished or not self.loop.pending
                      else "awaiting_annotations",
            "finished": self.loop.finished,
        }

    def pending_items(self) -> list[dict]:
        return [self.pending_item(n) for n in self.loop.pending if n not in self.partial]

    def pending_item(self, node: int, hops: int = 1) -> dict:
        graph = self.loop.graph
        feats = graph.features[node]
        row = np.asarray(feats.todense()).ravel() if hasattr(feats, "todense") else np.asarray(feats)
        top = np.argsort(-np.abs(row))[:10]
        top = [int(i) for i in top if row[i] != 0]
        item = {
            "node_id": int(node),
            "round": self.loop.round_index,
            "degree": int(graph.degrees()[node]),
            "feature_preview": top,
            "neighbor_summary": self._label_histogram(node, 1),
        }
        if hops > 1:
            item["two_hop_summary"] = self._label_histogram(node, 2)
        return item

    def _label_histogram(self, node: int, hops: int) -> dict:
        adj = self.loop.graph.adjacency
        frontier = {int(node)}
        seen = {int(node)}
        for _ in range(hops):
            nxt = set()
            for u in frontier:
                nxt.update(int(v) for v in adj[u].indices)
            frontier = nxt - seen
            seen |= nxt
        neighborhood = seen - {int(node)}
        counts: dict[str, int] = {}
        unknowns = 0
        for v in neighborhood:
            if v in self.loop.state.labeled:
                key = str(self.loop.state.labeled[v])
                counts[key] = counts.get(key, 0) + 1
            elif v in self.loop.state.unknown:
                unknowns += 1
        return {"class_counts": counts, "unknown": unknowns}

    def final_report(self) -> dict | None:
        if not self.loop.finished or self.loop.result is None:
            return None
        res = self.loop.result
        return {
            "final_precision": res.final_precision,
            "total_annotated": res.total_annotated,
            "truncated": res.truncated,
            "metrics": res.final_metrics.as_dict() if res.final_metrics else None,
            "rounds": [r.as_dict() for r in res.reports],
        }
