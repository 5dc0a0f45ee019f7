import random

import pytest

from tuplemine.corpus import GraphEdge, GraphNode, LinguisticGraph

LABELS = ["nsubj", "dobj", "amod", "advmod", "nmod", "xcomp", "obl", "mark"]


def build_graph(words, edges, gid="g", freq=1, gtype="eventuality"):
    """edges: iterable of (src, dst, label) index triples."""
    g = LinguisticGraph(
        id=gid,
        nodes=tuple(GraphNode(i, w) for i, w in enumerate(words)),
        edges=tuple(GraphEdge(s, d, l) for s, d, l in edges),
        freq=freq,
        gtype=gtype,
    )
    g.validate()
    return g


def random_connected_graph(rng: random.Random, n_nodes=None, gid="rg",
                           extra_edge_p=0.3, unique_words=True):
    """Random tree plus extra edges; words w0..w{n-1} (unique by default)."""
    n = n_nodes if n_nodes is not None else rng.randint(2, 8)
    if unique_words:
        words = [f"w{i}" for i in range(n)]
    else:
        words = [f"w{rng.randint(0, max(1, n // 2))}" for _ in range(n)]
    edges = set()
    for i in range(1, n):
        parent = rng.randrange(i)
        if rng.random() < 0.5:
            edges.add((parent, i, rng.choice(LABELS)))
        else:
            edges.add((i, parent, rng.choice(LABELS)))
    for _ in range(int(n * extra_edge_p)):
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b:
            edges.add((a, b, rng.choice(LABELS)))
    return build_graph(words, sorted(edges), gid=gid)


@pytest.fixture
def case_study_graph():
    """The 'human have something' graph."""
    return build_graph(
        ["human", "have", "something"],
        [(1, 0, "nsubj"), (1, 2, "dobj")],
        gid="cs",
    )
