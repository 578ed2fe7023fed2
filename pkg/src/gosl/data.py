"""Dataset loading (citation text format), synthetic graphs, and the registry."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DatasetError
from .graph import Graph


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model with Gaussian per-class feature means."""

    classes: int
    nodes_per_class: int
    p_intra: float
    p_inter: float
    feature_dim: int
    class_mean_separation: float = 2.0
    feature_noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_inter < 1.0 or not 0.0 <= self.p_intra <= 1.0:
            raise DatasetError("edge probabilities must lie in [0, 1]")
        if self.p_inter > self.p_intra:
            raise DatasetError("p_inter must not exceed p_intra")
        if self.feature_dim < 1:
            raise DatasetError("feature_dim must be at least 1")


def generate_sbm(spec: SbmSpec) -> Graph:
    """Sample a block-model graph with linearly separable class features."""
    rng = np.random.default_rng(spec.seed)
    n = spec.classes * spec.nodes_per_class
    labels = np.repeat(np.arange(spec.classes), spec.nodes_per_class)

    # Nearly orthogonal class directions: QR when the feature space is wide
    # enough, normalized Gaussians otherwise.
    raw = rng.standard_normal((spec.feature_dim, spec.classes))
    if spec.feature_dim >= spec.classes:
        q, _ = np.linalg.qr(raw)
        directions = q[:, : spec.classes]
    else:
        directions = raw / np.linalg.norm(raw, axis=0, keepdims=True)
    means = (spec.class_mean_separation * directions).T  # classes × F
    features = means[labels] + spec.feature_noise_std * rng.standard_normal((n, spec.feature_dim))

    rows, cols = [], []
    for i in range(n):
        same = labels[i + 1:] == labels[i]
        probs = np.where(same, spec.p_intra, spec.p_inter)
        hits = np.flatnonzero(rng.random(n - i - 1) < probs) + i + 1
        rows.extend([i] * len(hits))
        cols.extend(hits.tolist())
    data = np.ones(len(rows), dtype=np.float64)
    upper = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    adj = (upper + upper.T).tocsr()
    return Graph(adjacency=adj, features=features, labels=labels,
                 n_classes_total=spec.classes)


def load_content_cites(content_path, cites_path, class_order=None) -> Graph:
    """Parse the two-file citation text format into a Graph.

    Content lines are ``node_id <tab> f_1 ... f_F <tab> class_name``; cites
    lines are ``target_id <tab> source_id``. Node ids become dense indices in
    file order; class names map to indices by first appearance unless
    ``class_order`` pins them. Edges are symmetrized; self-loops, duplicates,
    and edges naming unknown ids are dropped with a warning count.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    node_index: dict[str, int] = {}
    class_index: dict[str, int] = {}
    if class_order is not None:
        class_index = {name: i for i, name in enumerate(class_order)}
    feat_rows, labels = [], []
    n_features = None
    with open(content_path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                raise DatasetError(f"{content_path}:{lineno}: malformed content line")
            node_id, values, cls = parts[0], parts[1:-1], parts[-1]
            if n_features is None:
                n_features = len(values)
            elif len(values) != n_features:
                raise DatasetError(
                    f"{content_path}:{lineno}: expected {n_features} features, got {len(values)}")
            if node_id in node_index:
                raise DatasetError(f"{content_path}:{lineno}: duplicate node id {node_id}")
            node_index[node_id] = len(node_index)
            try:
                feat_rows.append(np.array(values, dtype=np.float64))
            except ValueError as exc:
                raise DatasetError(f"{content_path}:{lineno}: bad feature value ({exc})") from exc
            if cls not in class_index:
                if class_order is not None:
                    raise DatasetError(f"{content_path}:{lineno}: class {cls!r} not in pinned order")
                class_index[cls] = len(class_index)
            labels.append(class_index[cls])

    n = len(node_index)
    skipped = dropped_loops = duplicates = 0
    edges: set[tuple[int, int]] = set()
    with open(cites_path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetError(f"{cites_path}:{lineno}: malformed cites line")
            tgt, src = parts
            if tgt not in node_index or src not in node_index:
                skipped += 1
                continue
            i, j = node_index[src], node_index[tgt]
            if i == j:
                dropped_loops += 1
                continue
            key = (min(i, j), max(i, j))
            if key in edges:
                duplicates += 1
                continue
            edges.add(key)
    if skipped or dropped_loops or duplicates:
        warnings.warn(
            f"{cites_path.name}: skipped {skipped} edges with unknown ids, "
            f"{dropped_loops} self-loops, {duplicates} duplicates")

    if edges:
        arr = np.array(sorted(edges))
        rows = np.concatenate([arr[:, 0], arr[:, 1]])
        cols = np.concatenate([arr[:, 1], arr[:, 0]])
        adj = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    else:
        adj = sp.csr_matrix((n, n))
    features = sp.csr_matrix(np.vstack(feat_rows))
    return Graph(adjacency=adj, features=features,
                 labels=np.array(labels, dtype=int), n_classes_total=len(class_index))


# Pinned per-dataset conventions: class ordering (where names exist) and the
# ID/OOD division. Alternate divisions carry an ``_alt`` suffix.
_CORA_CLASS_ORDER = (
    "Theory",
    "Reinforcement_Learning",
    "Genetic_Algorithms",
    "Neural_Networks",
    "Probabilistic_Methods",
    "Case_Based",
    "Rule_Learning",
)

REGISTRY: dict[str, dict] = {
    "cora": {
        "files": ("cora/cora.content", "cora/cora.cites"),
        "class_order": _CORA_CLASS_ORDER,
        "n_classes": 7,
        "ood_classes": (0, 1, 3),
    },
    "cora_alt": {
        "files": ("cora/cora.content", "cora/cora.cites"),
        "class_order": _CORA_CLASS_ORDER,
        "n_classes": 7,
        "id_classes": (1, 2, 3, 4),
    },
    "amazon_computer": {
        "files": ("amazon_computer/amazon_computer.content", "amazon_computer/amazon_computer.cites"),
        "class_order": None,
        "n_classes": 10,
        "ood_classes": (0, 3, 4, 5, 9),
    },
    "amazon_photo": {
        "files": ("amazon_photo/amazon_photo.content", "amazon_photo/amazon_photo.cites"),
        "class_order": None,
        "n_classes": 8,
        "ood_classes": (1, 6, 7),
    },
    "lastfm_asia": {
        "files": ("lastfm_asia/lastfm_asia.content", "lastfm_asia/lastfm_asia.cites"),
        "class_order": None,
        "n_classes": 18,
        "ood_classes": (1, 2, 3, 4, 5, 9, 10, 12, 17),
    },
    "lastfm_asia_alt": {
        "files": ("lastfm_asia/lastfm_asia.content", "lastfm_asia/lastfm_asia.cites"),
        "class_order": None,
        "n_classes": 18,
        "id_classes": tuple(range(9)),
    },
}


def registry_id_classes(name: str) -> tuple[int, ...]:
    entry = REGISTRY[name]
    if "id_classes" in entry:
        return tuple(entry["id_classes"])
    return tuple(c for c in range(entry["n_classes"]) if c not in entry["ood_classes"])


def dataset_registry(name: str, data_dir="data") -> tuple[Graph, dict]:
    """Load a registered dataset and its default split arguments.

    A ``manifest.json`` in ``data_dir`` may override file paths, class order,
    or the OOD division (keys: files, class_order, ood_classes/id_classes).
    """
    if name not in REGISTRY:
        raise DatasetError(f"unknown dataset {name!r}; known: {sorted(REGISTRY)}")
    entry = dict(REGISTRY[name])
    data_dir = Path(data_dir)
    manifest_path = data_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        entry.update(manifest.get(name, {}))
    content, cites = (data_dir / p for p in entry["files"])
    if not content.exists() or not cites.exists():
        raise DatasetError(
            f"dataset {name!r} files not found (expected {content} and {cites}); "
            "run `gosl convert` or place the raw text files there")
    graph = load_content_cites(content, cites, class_order=entry.get("class_order"))
    if "id_classes" in entry:
        id_classes = tuple(entry["id_classes"])
    else:
        id_classes = tuple(c for c in range(graph.n_classes_total)
                           if c not in tuple(entry["ood_classes"]))
    return graph, {"id_classes": id_classes}
