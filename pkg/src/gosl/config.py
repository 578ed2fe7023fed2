"""Experiment configuration: one JSON file describing a run matrix."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import REGISTRY, SbmSpec, dataset_registry, generate_sbm
from .errors import ConfigError
from .graph import Graph, OpenSetSplit, build_split
from .loop import ABLATIONS, STRATEGIES, RunSettings

_RUN_KEYS = {
    "strategy", "ablation", "w_unknown", "hidden", "lr", "dropout", "weight_decay",
    "epochs", "m", "eval_each_round", "include_initial_in_precision",
    "use_validation", "id_only_seed", "evaluate_final",
}
_TOP_KEYS = _RUN_KEYS | {
    "dataset", "sbm", "id_classes", "seeds", "split_seed", "budgets", "data_dir",
    "strategies", "ablations", "jobs",
}
_BUDGET_KEYS = {"initial", "per_round", "total"}


@dataclass
class ExperimentConfig:
    """Parsed run matrix: one dataset, a list of strategies, a list of seeds."""

    dataset: str | None = None
    sbm: SbmSpec | None = None
    id_classes: tuple[int, ...] | None = None
    seeds: tuple[int, ...] = ()
    split_seed: int = 0
    budgets: dict = field(default_factory=dict)
    data_dir: str = "data"
    strategies: tuple[str, ...] = ("lego",)
    ablations: tuple[str, ...] = ("none",)
    jobs: int = 1
    run_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("config needs a non-empty 'seeds' list")
        if (self.dataset is None) == (self.sbm is None):
            raise ConfigError("config needs exactly one of 'dataset' or 'sbm'")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; known: {STRATEGIES}")
        for a in self.ablations:
            if a not in ABLATIONS:
                raise ConfigError(f"unknown ablation {a!r}; known: {ABLATIONS}")
        bad = set(self.budgets) - _BUDGET_KEYS
        if bad:
            raise ConfigError(f"unknown budget keys: {sorted(bad)}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        sbm = SbmSpec(**raw["sbm"]) if "sbm" in raw else None
        strategies = raw.get("strategies") or [raw.get("strategy", "lego")]
        ablations = raw.get("ablations") or [raw.get("ablation", "none")]
        run_overrides = {k: raw[k] for k in _RUN_KEYS - {"strategy", "ablation"} if k in raw}
        return cls(
            dataset=raw.get("dataset"),
            sbm=sbm,
            id_classes=tuple(raw["id_classes"]) if "id_classes" in raw else None,
            seeds=tuple(int(s) for s in raw["seeds"]) if "seeds" in raw else (),
            split_seed=int(raw.get("split_seed", 0)),
            budgets=dict(raw.get("budgets", {})),
            data_dir=raw.get("data_dir", "data"),
            strategies=tuple(strategies),
            ablations=tuple(ablations),
            jobs=int(raw.get("jobs", 1)),
            run_overrides=run_overrides,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        """Effective-config echo; re-parses to an identical run plan."""
        d = {
            "seeds": list(self.seeds),
            "split_seed": self.split_seed,
            "budgets": dict(self.budgets),
            "data_dir": self.data_dir,
            "strategies": list(self.strategies),
            "ablations": list(self.ablations),
            "jobs": self.jobs,
        }
        if self.dataset is not None:
            d["dataset"] = self.dataset
        if self.sbm is not None:
            d["sbm"] = dataclasses.asdict(self.sbm)
        if self.id_classes is not None:
            d["id_classes"] = list(self.id_classes)
        d.update(self.run_overrides)
        return d

    def load_graph(self) -> tuple[Graph, tuple[int, ...]]:
        """Materialize the graph and the ID class tuple."""
        if self.sbm is not None:
            graph = generate_sbm(self.sbm)
            if self.id_classes is None:
                raise ConfigError("'sbm' configs must state 'id_classes'")
            return graph, self.id_classes
        graph, defaults = dataset_registry(self.dataset, self.data_dir)
        return graph, self.id_classes or defaults["id_classes"]

    def build_split(self, graph: Graph, id_classes) -> OpenSetSplit:
        return build_split(graph, id_classes, self.split_seed)

    def run_settings(self, strategy: str, ablation: str = "none") -> RunSettings:
        kwargs = dict(self.run_overrides)
        kwargs["strategy"] = strategy
        kwargs["ablation"] = ablation
        for key, attr in (("initial", "initial_budget"), ("per_round", "per_round_budget"),
                          ("total", "total_budget")):
            if key in self.budgets:
                kwargs[attr] = int(self.budgets[key])
        return RunSettings(**kwargs)


def known_datasets() -> list[str]:
    return sorted(REGISTRY)
