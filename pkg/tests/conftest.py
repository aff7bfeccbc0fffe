import os
from pathlib import Path

import numpy as np
import pytest

from diagram.data import DirectedGraph, FeatureMatrix

DATA_DIR_ENV = "DIAGRAM_DATA_DIR"


def find_dataset(name: str):
    """Locate <name>.content/.cites under $DIAGRAM_DATA_DIR or ./data."""
    roots = []
    if os.environ.get(DATA_DIR_ENV):
        roots.append(Path(os.environ[DATA_DIR_ENV]))
    roots.append(Path(__file__).resolve().parents[1] / "data")
    for root in roots:
        for prefix in (root / name / name, root / name):
            content = Path(str(prefix) + ".content")
            cites = Path(str(prefix) + ".cites")
            if content.exists() and cites.exists():
                return content, cites
    return None


def require_dataset(name: str):
    paths = find_dataset(name)
    if paths is None:
        pytest.skip(f"{name} dataset files not available "
                    f"(set {DATA_DIR_ENV} to a directory holding "
                    f"{name}/{name}.content and {name}/{name}.cites)")
    return paths


def random_digraph(n: int, m: int, seed: int, ensure_connected: bool = False) -> DirectedGraph:
    """Random simple digraph with m distinct non-self edges."""
    rng = np.random.default_rng(seed)
    edges = set()
    if ensure_connected:
        # random spanning path first, random direction per hop
        order = rng.permutation(n)
        for a, b in zip(order[:-1], order[1:]):
            u, v = (int(a), int(b)) if rng.random() < 0.5 else (int(b), int(a))
            edges.add((u, v))
    while len(edges) < m:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.add((int(u), int(v)))
    edge_arr = np.array(sorted(edges), dtype=np.int64)
    return DirectedGraph([f"n{i}" for i in range(n)], edge_arr,
                         {"edge_direction": "citing->cited"})


def random_features(n: int, d: int, seed: int, density: float = 0.4) -> FeatureMatrix:
    rng = np.random.default_rng(seed)
    dense = (rng.random((n, d)) < density).astype(float)
    import scipy.sparse as sp
    return FeatureMatrix(sp.csr_matrix(dense), mode="binary")


@pytest.fixture
def toy_graph():
    """6-node weakly connected digraph with one reciprocal pair."""
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 0), (2, 5)]
    return DirectedGraph([f"n{i}" for i in range(6)],
                         np.array(edges, dtype=np.int64),
                         {"edge_direction": "citing->cited"})


@pytest.fixture
def toy_features():
    return random_features(6, 4, seed=7)


CONTENT_LINES = """\
p0 1 0 0 1 0 1 theory
p1 0 1 0 1 0 0 theory
p2 1 1 0 0 0 0 systems
p3 0 0 1 0 1 0 systems
p4 1 0 0 0 0 1 systems
p5 0 1 1 0 0 0 ml
p6 0 0 0 1 1 0 ml
p7 1 0 1 0 0 0 ml
p8 0 1 0 0 1 1 theory
p9 1 1 1 0 0 0 ml
p10 0 0 0 1 0 1 systems
p11 1 0 0 0 1 0 theory
"""

# Ring over all 12 papers plus chords and one reciprocal pair; citing
# column is second per the cites convention "<cited> <citing>".
CITES_LINES = """\
p1 p0
p2 p1
p3 p2
p4 p3
p5 p4
p6 p5
p7 p6
p8 p7
p9 p8
p10 p9
p11 p10
p0 p11
p0 p1
p4 p0
p6 p2
p9 p3
p11 p5
p2 p8
p5 p10
p7 p11
"""


@pytest.fixture
def fixture_dataset(tmp_path):
    """A small on-disk .content/.cites dataset (12 nodes, 20 edges, 3 classes)."""
    content = tmp_path / "toy.content"
    cites = tmp_path / "toy.cites"
    content.write_text(CONTENT_LINES)
    cites.write_text(CITES_LINES)
    return content, cites
