import numpy as np
import pytest
import scipy.sparse as sp

from gosl.data import SbmSpec, generate_sbm
from gosl.graph import Graph, build_split


def make_graph(n=8, n_edges=10, n_features=4, n_classes=3, seed=0, dense=True):
    """Random small graph for unit tests (symmetric, no self-loops)."""
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n))
    while adj.sum() < 2 * n_edges:
        i, j = rng.integers(n, size=2)
        if i != j:
            adj[i, j] = adj[j, i] = 1.0
    features = rng.standard_normal((n, n_features))
    if not dense:
        features = sp.csr_matrix(features)
    labels = rng.integers(n_classes, size=n)
    return Graph(adjacency=sp.csr_matrix(adj), features=features,
                 labels=labels, n_classes_total=n_classes)


SMOKE_SBM = SbmSpec(classes=10, nodes_per_class=40, p_intra=0.08, p_inter=0.004,
                    feature_dim=16, class_mean_separation=2.5,
                    feature_noise_std=1.0, seed=1)
SMOKE_ID_CLASSES = (0, 1, 2, 3, 4)


@pytest.fixture(scope="session")
def sbm_graph():
    return generate_sbm(SMOKE_SBM)


@pytest.fixture(scope="session")
def sbm_split(sbm_graph):
    return build_split(sbm_graph, SMOKE_ID_CLASSES, seed=0)


def small_sbm(seed=2):
    """Tiny, strongly separable SBM for fast training tests."""
    return generate_sbm(SbmSpec(classes=6, nodes_per_class=25, p_intra=0.25,
                                p_inter=0.01, feature_dim=8,
                                class_mean_separation=3.0,
                                feature_noise_std=0.8, seed=seed))
