"""Round orchestration: filter → potential IDs → classifier → selection → oracle.

The driver is a resumable state machine (``ActiveLoop``): it exposes a
pending query batch, accepts the answers, and advances. The simulated-oracle
runner and the human-annotation service both drive the same machine, so a
scripted human session reproduces a simulated run exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, StateError
from .graph import (
    UNKNOWN,
    Graph,
    LabelState,
    OpenSetSplit,
    draw_initial_nodes,
    normalize_adjacency,
)
from .metrics import EvalResult, evaluate
from .models import (
    TrainConfig,
    hidden_features,
    potential_id_nodes,
    predict_probs,
    train_classifier_for_split,
    train_filter_for_split,
)
from .selection import QueryBatch, SelectionConfig, select_lego, select_random, select_uncertainty

STRATEGIES = ("lego", "random", "uncertainty")
ABLATIONS = ("none", "no_filter", "no_cluster")


def mix_seed(seed: int, stream: int) -> int:
    """Derive an independent, reproducible child seed for a numbered stream."""
    return int(np.random.SeedSequence([int(seed), int(stream)]).generate_state(1)[0])


@dataclass(frozen=True)
class BudgetPlan:
    """Annotation budget: initial draw, per-round batch, and the total."""

    initial: int
    per_round: int
    total: int

    def __post_init__(self):
        if self.initial < 0 or self.per_round <= 0 or self.total < self.initial:
            raise ConfigError("invalid budget plan")
        if (self.total - self.initial) % self.per_round != 0:
            raise ConfigError(
                f"budget (total-initial)={self.total - self.initial} must be divisible "
                f"by per_round={self.per_round}")

    @property
    def rounds(self) -> int:
        return (self.total - self.initial) // self.per_round

    @classmethod
    def paper_defaults(cls, n_id_classes: int) -> "BudgetPlan":
        return cls(initial=5 * n_id_classes, per_round=2 * n_id_classes,
                   total=15 * n_id_classes)


@dataclass
class RunSettings:
    """Everything that defines one experiment run apart from graph and seed."""

    strategy: str = "lego"
    ablation: str = "none"
    w_unknown: float = 0.1
    hidden: int = 32
    lr: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 5e-4
    epochs: int = 300
    m: int = 48
    initial_budget: int | None = None     # default 5·C
    per_round_budget: int | None = None   # default 2·C
    total_budget: int | None = None       # default 15·C
    eval_each_round: bool = False
    include_initial_in_precision: bool = True
    use_validation: bool = True
    id_only_seed: bool = False
    evaluate_final: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; known: {STRATEGIES}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}; known: {ABLATIONS}")

    def train_cfg(self) -> TrainConfig:
        return TrainConfig(hidden=self.hidden, epochs=self.epochs, lr=self.lr,
                           dropout=self.dropout, weight_decay=self.weight_decay)

    def budget_plan(self, n_id_classes: int) -> BudgetPlan:
        default = BudgetPlan.paper_defaults(n_id_classes)
        return BudgetPlan(
            initial=self.initial_budget if self.initial_budget is not None else default.initial,
            per_round=self.per_round_budget if self.per_round_budget is not None else default.per_round,
            total=self.total_budget if self.total_budget is not None else default.total,
        )


@dataclass
class RoundReport:
    """Outcome of one annotation round (round 0 is the initial draw)."""

    round_index: int
    nodes: tuple[int, ...]
    strategy_tag: str
    p: int
    q: int
    cumulative_precision: float
    metrics: dict | None = None
    elapsed: float = 0.0

    def key(self) -> dict:
        """Deterministic portion (everything except wall-clock time)."""
        return {
            "round_index": self.round_index,
            "nodes": list(self.nodes),
            "strategy_tag": self.strategy_tag,
            "p": self.p,
            "q": self.q,
            "cumulative_precision": self.cumulative_precision,
            "metrics": self.metrics,
        }

    def as_dict(self) -> dict:
        d = self.key()
        d["elapsed"] = self.elapsed
        return d


class Oracle:
    """Answer source: returns an ID class index (< C) or UNKNOWN."""

    def query(self, node: int) -> int:
        raise NotImplementedError


class SimulatedOracle(Oracle):
    """Answers from ground-truth labels through the split's label map."""

    def __init__(self, graph: Graph, split: OpenSetSplit):
        self._labels = graph.labels
        self._split = split

    def query(self, node: int) -> int:
        return self._split.remap_label(int(self._labels[node]))


def simulated_oracle(graph: Graph, split: OpenSetSplit) -> SimulatedOracle:
    return SimulatedOracle(graph, split)


@dataclass
class ExperimentResult:
    reports: list[RoundReport]
    final_metrics: EvalResult | None
    final_precision: float
    truncated: bool
    total_annotated: int
    classifier: object | None = None


class ActiveLoop:
    """Resumable driver for one experiment.

    Lifecycle: construct → read ``pending`` → ``submit(answers)`` → repeat
    until ``finished``. The pending batch for round 0 is the blind initial
    draw; later batches come from the configured strategy.
    """

    def __init__(self, graph: Graph, split: OpenSetSplit, settings: RunSettings, seed: int):
        self.graph = graph
        self.split = split
        self.settings = settings
        self.seed = int(seed)
        self.a_hat = normalize_adjacency(graph)
        self.plan = settings.budget_plan(split.n_id_classes)
        self.state = LabelState(pool=set(int(n) for n in split.pool_nodes))
        self.round_index = 0
        self.cum_p = 0
        self.cum_q = 0
        self.reports: list[RoundReport] = []
        self.truncated = False
        self.finished = False
        self.result: ExperimentResult | None = None
        self._round_started = time.perf_counter()
        self.pending: tuple[int, ...] = ()
        self._stage_initial()

    # -- batch production -------------------------------------------------

    def _stage_initial(self) -> None:
        if self.plan.initial == 0:
            self._advance_after_round()
            return
        rng = np.random.default_rng(mix_seed(self.seed, 0))
        pool = np.array(sorted(self.state.pool))
        picked = draw_initial_nodes(pool, min(self.plan.initial, pool.size), rng)
        self.pending = tuple(int(n) for n in np.sort(picked))
        self._round_started = time.perf_counter()

    def _select_batch(self, round_idx: int) -> QueryBatch:
        s = self.settings
        seed_r = mix_seed(self.seed, round_idx)
        pool = sorted(self.state.pool)
        b = min(self.plan.per_round, len(pool))
        if not self.state.labeled:
            # Nothing to train on yet; spend the budget blindly.
            return select_random(pool, b, seed_r)
        if s.strategy == "random":
            return select_random(pool, b, seed_r)
        cfg = s.train_cfg()
        if s.strategy == "uncertainty":
            clf = train_classifier_for_split(self.graph, self.a_hat, self.state.labeled,
                                             self.split, cfg=cfg, seed=mix_seed(seed_r, 2),
                                             use_validation=s.use_validation)
            return select_uncertainty(pool, predict_probs(clf, self.graph, self.a_hat), b)

        # Full pipeline (with optional ablations).
        if s.ablation == "no_filter":
            potential = np.array(pool, dtype=int)
        else:
            filt = train_filter_for_split(self.graph, self.a_hat, self.state, self.split,
                                          w_unknown=s.w_unknown, cfg=cfg,
                                          seed=mix_seed(seed_r, 1),
                                          use_validation=s.use_validation)
            potential = potential_id_nodes(filt, self.graph, self.a_hat, pool).indices
        if s.ablation == "no_cluster":
            if potential.size >= b:
                batch = select_random(potential, b, seed_r)
            else:
                rest = np.setdiff1d(np.array(pool), potential)
                extra = select_random(rest, b - potential.size, mix_seed(seed_r, 3)).nodes
                batch = QueryBatch(nodes=tuple(int(n) for n in potential) + extra,
                                   strategy_tag="no_cluster")
            return QueryBatch(nodes=batch.nodes, strategy_tag="no_cluster")
        clf = train_classifier_for_split(self.graph, self.a_hat, self.state.labeled,
                                         self.split, cfg=cfg, seed=mix_seed(seed_r, 2),
                                         use_validation=s.use_validation)
        hidden = hidden_features(clf, self.graph, self.a_hat)
        probs = predict_probs(clf, self.graph, self.a_hat)
        sel_cfg = SelectionConfig(m=s.m, b=b, seed=seed_r)
        return select_lego(hidden, potential, pool, probs, sel_cfg)

    # -- answer intake -----------------------------------------------------

    def submit(self, answers: dict[int, int]) -> RoundReport:
        """Apply a complete answer set for the pending batch and advance."""
        if self.finished:
            raise StateError("experiment already finished")
        if set(int(k) for k in answers) != set(self.pending):
            raise StateError("answers do not match the pending batch")
        answers = {int(k): int(v) for k, v in answers.items()}
        p, q = self.state.apply_answers(answers, self.split.n_id_classes)
        self.cum_p += p
        self.cum_q += q
        self.state.check_partition(self.split)
        strategy_tag = "initial" if self.round_index == 0 else self._pending_tag
        metrics = None
        if self.settings.eval_each_round and self.round_index > 0 and self.state.labeled:
            clf = train_classifier_for_split(
                self.graph, self.a_hat, self.state.labeled, self.split,
                cfg=self.settings.train_cfg(),
                seed=mix_seed(mix_seed(self.seed, self.round_index), 4),
                use_validation=self.settings.use_validation)
            metrics = evaluate(clf, self.graph, self.a_hat, self.split).as_dict()
        report = RoundReport(
            round_index=self.round_index,
            nodes=self.pending,
            strategy_tag=strategy_tag,
            p=p,
            q=q,
            cumulative_precision=self.cumulative_precision(),
            metrics=metrics,
            elapsed=time.perf_counter() - self._round_started,
        )
        self.reports.append(report)
        self.pending = ()
        self._advance_after_round()
        return report

    def cumulative_precision(self) -> float:
        p, q = self.cum_p, self.cum_q
        if not self.settings.include_initial_in_precision and self.reports:
            first = next((r for r in self.reports if r.round_index == 0), None)
            if first is not None:
                p -= first.p
                q -= first.q
        return p / (p + q) if (p + q) else 0.0

    def _advance_after_round(self) -> None:
        self.round_index += 1
        out_of_rounds = self.round_index > self.plan.rounds
        pool_empty = not self.state.pool
        if out_of_rounds or pool_empty or self.truncated:
            self.truncated = self.truncated or (pool_empty and not out_of_rounds)
            self._finalize()
            return
        batch = self._select_batch(self.round_index)
        if len(batch.nodes) < self.plan.per_round:
            self.truncated = True
        self._pending_tag = batch.strategy_tag
        self.pending = batch.nodes
        self._round_started = time.perf_counter()

    def _finalize(self) -> None:
        self.finished = True
        final_metrics = None
        classifier = None
        if self.state.labeled and self.settings.evaluate_final:
            classifier = train_classifier_for_split(
                self.graph, self.a_hat, self.state.labeled, self.split,
                cfg=self.settings.train_cfg(),
                seed=mix_seed(self.seed, self.plan.rounds + 1),
                use_validation=self.settings.use_validation)
            final_metrics = evaluate(classifier, self.graph, self.a_hat, self.split)
        self.result = ExperimentResult(
            reports=self.reports,
            final_metrics=final_metrics,
            final_precision=self.cumulative_precision(),
            truncated=self.truncated,
            total_annotated=self.cum_p + self.cum_q,
            classifier=classifier,
        )

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-serializable state sufficient to resume mid-session."""
        return {
            "seed": self.seed,
            "round_index": self.round_index,
            "labeled": {str(k): v for k, v in self.state.labeled.items()},
            "unknown": sorted(self.state.unknown),
            "pool": sorted(self.state.pool),
            "cum_p": self.cum_p,
            "cum_q": self.cum_q,
            "pending": list(self.pending),
            "pending_tag": getattr(self, "_pending_tag", "initial"),
            "truncated": self.truncated,
            "finished": self.finished,
            "reports": [r.as_dict() for r in self.reports],
        }

    @classmethod
    def restore(cls, graph: Graph, split: OpenSetSplit, settings: RunSettings,
                snap: dict) -> "ActiveLoop":
        loop = cls.__new__(cls)
        loop.graph = graph
        loop.split = split
        loop.settings = settings
        loop.seed = int(snap["seed"])
        loop.a_hat = normalize_adjacency(graph)
        loop.plan = settings.budget_plan(split.n_id_classes)
        loop.state = LabelState(
            labeled={int(k): int(v) for k, v in snap["labeled"].items()},
            unknown=set(snap["unknown"]),
            pool=set(snap["pool"]),
        )
        loop.round_index = snap["round_index"]
        loop.cum_p = snap["cum_p"]
        loop.cum_q = snap["cum_q"]
        loop.pending = tuple(snap["pending"])
        loop._pending_tag = snap.get("pending_tag", "initial")
        loop.truncated = snap["truncated"]
        loop.finished = snap["finished"]
        loop.reports = [
            RoundReport(round_index=r["round_index"], nodes=tuple(r["nodes"]),
                        strategy_tag=r["strategy_tag"], p=r["p"], q=r["q"],
                        cumulative_precision=r["cumulative_precision"],
                        metrics=r["metrics"], elapsed=r["elapsed"])
            for r in snap["reports"]
        ]
        loop.result = None
        loop._round_started = time.perf_counter()
        if loop.finished:
            loop._finalize()
        return loop


def run_experiment(graph: Graph, split: OpenSetSplit, settings: RunSettings,
                   oracle: Oracle, seed: int) -> ExperimentResult:
    """Drive a full experiment against an oracle and return its result."""
    loop = ActiveLoop(graph, split, settings, seed)
    while not loop.finished:
        answers = {int(n): oracle.query(int(n)) for n in loop.pending}
        loop.submit(answers)
    assert loop.result is not None
    return loop.result
