"""Graph container, symmetric adjacency normalization, and open-set splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, GraphStructureError

#: Oracle answer for a node that belongs to none of the known classes.
UNKNOWN = -1

# Protocol constants: validation holds 10 nodes per ID class from each
# partition, the test set targets 500 ID + 500 OOD nodes, and small graphs
# fall back to 40% of each partition.
VAL_PER_CLASS = 10
TEST_PER_PARTITION = 500
SMALL_GRAPH_TEST_FRACTION = 0.4
MIN_ID_CLASSES = 3


@dataclass(frozen=True)
class Graph:
    """Immutable graph with features and privately held ground-truth labels.

    ``labels`` exist for simulation and evaluation only; training code must
    never read them directly (it goes through an oracle).
    """

    adjacency: sp.csr_matrix
    features: np.ndarray | sp.csr_matrix
    labels: np.ndarray
    n_classes_total: int

    def __post_init__(self):
        a = self.adjacency
        if a.shape[0] != a.shape[1]:
            raise GraphStructureError("adjacency must be square")
        if (a != a.T).nnz != 0:
            raise GraphStructureError("adjacency must be symmetric")
        if a.diagonal().any():
            raise GraphStructureError("adjacency must have a zero diagonal")
        if self.features.shape[0] != a.shape[0]:
            raise GraphStructureError("feature rows must match node count")
        if sp.issparse(self.features):
            finite = np.isfinite(self.features.data).all()
        else:
            finite = np.isfinite(self.features).all()
        if not finite:
            raise GraphStructureError("features contain non-finite entries")
        if len(self.labels) != a.shape[0]:
            raise GraphStructureError("label count must match node count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes_total):
            raise GraphStructureError("label index out of range")

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel().astype(int)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency with self-loops: D̃^-1/2 (A+I) D̃^-1/2."""

    matrix: sp.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]


def normalize_adjacency(graph: Graph) -> NormalizedAdjacency:
    """Return the self-loop-augmented, degree-normalized adjacency.

    Entry (i, j) of the result is (A+I)_ij / sqrt((deg_i+1)(deg_j+1)), so the
    diagonal is 1/(deg_i+1) and the sparsity pattern is A plus the diagonal.
    """
    a = graph.adjacency
    a_tilde = (a + sp.identity(a.shape[0], format="csr", dtype=np.float64)).tocsr()
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    return NormalizedAdjacency((d @ a_tilde @ d).tocsr())


@dataclass(frozen=True)
class OpenSetSplit:
    """ID/OOD class partition with validation, test, and pool node sets."""

    id_classes: tuple[int, ...]
    ood_classes: tuple[int, ...]
    val_nodes: np.ndarray
    test_nodes: np.ndarray
    pool_nodes: np.ndarray

    @property
    def n_id_classes(self) -> int:
        return len(self.id_classes)

    @property
    def id_label_map(self) -> dict[int, int]:
        """Bijection from original class index to the dense 0..C-1 range."""
        return {orig: i for i, orig in enumerate(self.id_classes)}

    def remap_label(self, original: int) -> int:
        """Map an original class index to an ID class index, or UNKNOWN."""
        return self.id_label_map.get(original, UNKNOWN)


def build_split(graph: Graph, id_classes, seed: int) -> OpenSetSplit:
    """Partition nodes into validation / test / pool for an ID class choice.

    Validation takes 10 nodes per ID class from each of the ID and OOD
    partitions; the test set takes 500 ID + 500 OOD nodes when available and
    40% of each partition otherwise. Deterministic for a fixed seed.
    """
    id_classes = tuple(int(c) for c in id_classes)
    all_classes = set(range(graph.n_classes_total))
    for c in id_classes:
        if c not in all_classes:
            raise CapacityError(f"class {c} does not exist (have {graph.n_classes_total} classes)")
    if len(set(id_classes)) != len(id_classes):
        raise CapacityError("duplicate ID class requested")
    if len(id_classes) < MIN_ID_CLASSES:
        raise CapacityError(f"need at least {MIN_ID_CLASSES} ID classes, got {len(id_classes)}")
    ood_classes = tuple(sorted(all_classes - set(id_classes)))

    id_mask = np.isin(graph.labels, id_classes)
    id_nodes = np.flatnonzero(id_mask)
    ood_nodes = np.flatnonzero(~id_mask)

    c = len(id_classes)
    n_val = VAL_PER_CLASS * c
    if len(id_nodes) - n_val >= TEST_PER_PARTITION and len(ood_nodes) - n_val >= TEST_PER_PARTITION:
        n_test_id = n_test_ood = TEST_PER_PARTITION
    else:
        n_test_id = int(SMALL_GRAPH_TEST_FRACTION * len(id_nodes))
        n_test_ood = int(SMALL_GRAPH_TEST_FRACTION * len(ood_nodes))
    for name, nodes, need in (
        ("ID", id_nodes, n_val + n_test_id),
        ("OOD", ood_nodes, n_val + n_test_ood),
    ):
        if len(nodes) < need or min(n_test_id, n_test_ood) == 0:
            raise CapacityError(
                f"{name} partition has {len(nodes)} nodes, needs {need} "
                f"(shortfall {max(need - len(nodes), 1)})"
            )
    # Per-ID-class validation capacity: 10 nodes of every ID class.
    for cls in id_classes:
        have = int((graph.labels == cls).sum())
        if have < VAL_PER_CLASS:
            raise CapacityError(f"ID class {cls} has {have} nodes, needs {VAL_PER_CLASS}")

    rng = np.random.default_rng(seed)
    val_id = np.concatenate([
        rng.choice(np.flatnonzero(graph.labels == cls), size=VAL_PER_CLASS, replace=False)
        for cls in id_classes
    ])
    val_ood = rng.choice(np.setdiff1d(ood_nodes, val_id), size=n_val, replace=False)
    val = np.sort(np.concatenate([val_id, val_ood]))

    rest_id = np.setdiff1d(id_nodes, val)
    rest_ood = np.setdiff1d(ood_nodes, val)
    test_id = rng.choice(rest_id, size=n_test_id, replace=False)
    test_ood = rng.choice(rest_ood, size=n_test_ood, replace=False)
    test = np.sort(np.concatenate([test_id, test_ood]))

    pool = np.setdiff1d(np.arange(graph.n_nodes), np.concatenate([val, test]))
    return OpenSetSplit(
        id_classes=id_classes,
        ood_classes=ood_classes,
        val_nodes=val,
        test_nodes=test,
        pool_nodes=pool,
    )


@dataclass
class LabelState:
    """Evolving annotation state: labeled ID nodes, known-unknowns, and pool.

    The three sets always partition the split's original pool. Only the
    active-learning driver mutates this.
    """

    labeled: dict[int, int] = field(default_factory=dict)
    unknown: set[int] = field(default_factory=set)
    pool: set[int] = field(default_factory=set)

    def apply_answers(self, answers: dict[int, int], n_id_classes: int) -> tuple[int, int]:
        """Move answered nodes out of the pool; return (p, q) counts."""
        p = q = 0
        for node, ans in answers.items():
            node = int(node)
            if node not in self.pool:
                raise ValueError(f"node {node} is not in the unlabeled pool")
            self.pool.remove(node)
            if ans == UNKNOWN:
                self.unknown.add(node)
                q += 1
            else:
                ans = int(ans)
                if not 0 <= ans < n_id_classes:
                    raise ValueError(f"answer {ans} out of range for {n_id_classes} ID classes")
                self.labeled[node] = ans
                p += 1
        return p, q

    def check_partition(self, split: OpenSetSplit) -> None:
        """Assert labeled/unknown/pool are disjoint and cover the split pool."""
        lab = set(self.labeled)
        assert not (lab & self.unknown) and not (lab & self.pool) and not (self.unknown & self.pool)
        assert lab | self.unknown | self.pool == set(split.pool_nodes.tolist())


def init_label_state(split: OpenSetSplit, initial_budget: int, seed: int, oracle,
                     id_only: bool = False) -> LabelState:
    """Draw the initial seed nodes from the pool and query the oracle.

    Draws are blind (may hit OOD nodes) unless ``id_only`` forces redraws
    until every seed node is ID.
    """
    if initial_budget > len(split.pool_nodes):
        raise CapacityError("initial budget exceeds pool size")
    state = LabelState(pool=set(split.pool_nodes.tolist()))
    if initial_budget == 0:
        return state
    rng = np.random.default_rng(seed)
    picked = draw_initial_nodes(split.pool_nodes, initial_budget, rng, oracle if id_only else None)
    answers = {int(n): oracle.query(int(n)) for n in picked}
    state.apply_answers(answers, split.n_id_classes)
    return state


def draw_initial_nodes(pool_nodes: np.ndarray, budget: int, rng, id_oracle=None) -> np.ndarray:
    """Uniform draw without replacement; optionally restricted to ID answers."""
    if id_oracle is None:
        return rng.choice(np.sort(pool_nodes), size=budget, replace=False)
    remaining = list(np.sort(pool_nodes))
    picked = []
    while len(picked) < budget and remaining:
        idx = rng.integers(len(remaining))
        node = remaining.pop(int(idx))
        if id_oracle.query(int(node)) != UNKNOWN:
            picked.append(node)
    if len(picked) < budget:
        raise CapacityError("pool exhausted before ID-only initial draw completed")
    return np.array(picked)
