"""Core graph and knowledge-base data types, corpus ingestion, and phrase lookup.

A corpus is a list of small directed graphs whose nodes are words and whose
edges carry linguistic relation labels (dependency labels or discourse
connectives).  The seed knowledge base is a set of (head, relation, tail)
tuples used to bootstrap pattern mining.
"""

from __future__ import annotations

import enum
import json
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path

GRAPH_TYPES = ("eventuality", "discourse")


class InputError(ValueError):
    """Raised when an input file fails validation; message names the offender."""


@dataclass(frozen=True)
class GraphNode:
    index: int
    word: str


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    label: str


@dataclass(frozen=True)
class LinguisticGraph:
    """A directed word graph with a corpus frequency and an origin type."""

    id: str
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    freq: int = 1
    gtype: str = "eventuality"

    @property
    def words(self) -> list[str]:
        return [n.word for n in self.nodes]

    def neighbors(self, index: int) -> list[int]:
        """Indices adjacent to ``index`` ignoring edge direction, ascending."""
        out = {e.dst for e in self.edges if e.src == index}
        out |= {e.src for e in self.edges if e.dst == index}
        return sorted(out)

    def edges_between(self, a: int, b: int) -> list[GraphEdge]:
        """All edges connecting a and b in either direction, sorted for determinism."""
        hits = [e for e in self.edges if (e.src == a and e.dst == b) or (e.src == b and e.dst == a)]
        return sorted(hits, key=lambda e: (e.label, e.src, e.dst))

    def validate(self) -> None:
        n = len(self.nodes)
        if n < 1:
            raise InputError(f"graph {self.id!r}: must have at least one node")
        for i, node in enumerate(self.nodes):
            if node.index != i:
                raise InputError(f"graph {self.id!r}: node indices must be contiguous from 0")
            if not node.word or any(c.isspace() for c in node.word):
                raise InputError(f"graph {self.id!r}: bad word {node.word!r} at index {i}")
        seen = set()
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise InputError(
                    f"graph {self.id!r}: edge ({e.src},{e.dst},{e.label}) references a missing node"
                )
            if e.src == e.dst:
                raise InputError(f"graph {self.id!r}: self-loop on node {e.src}")
            key = (e.src, e.dst, e.label)
            if key in seen:
                raise InputError(f"graph {self.id!r}: duplicate edge {key}")
            seen.add(key)
        if self.freq < 1:
            raise InputError(f"graph {self.id!r}: freq must be >= 1")
        if self.gtype not in GRAPH_TYPES:
            raise InputError(f"graph {self.id!r}: unknown type {self.gtype!r}")
        if not self._weakly_connected():
            raise InputError(f"graph {self.id!r}: not weakly connected")

    def _weakly_connected(self) -> bool:
        if len(self.nodes) == 1:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            cur = queue.popleft()
            for nb in self.neighbors(cur):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return len(seen) == len(self.nodes)


@dataclass(frozen=True)
class GraphCorpus:
    graphs: tuple[LinguisticGraph, ...]

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def by_id(self, graph_id: str) -> LinguisticGraph:
        return self._index()[graph_id]

    def _index(self) -> dict[str, LinguisticGraph]:
        # cached on first use; frozen dataclass so stash via object.__setattr__
        cache = getattr(self, "_id_index", None)
        if cache is None:
            cache = {g.id: g for g in self.graphs}
            object.__setattr__(self, "_id_index", cache)
        return cache

    def __contains__(self, graph_id: str) -> bool:
        return graph_id in self._index()


@dataclass(frozen=True)
class SeedTuple:
    head: tuple[str, ...]
    relation: str
    tail: tuple[str, ...]


@dataclass(frozen=True)
class SeedKB:
    tuples: tuple[SeedTuple, ...]
    relations: frozenset[str] = field(default_factory=frozenset)

    def subset(self, relation: str) -> list[SeedTuple]:
        return [t for t in self.tuples if t.relation == relation]

    def relation_sizes(self) -> dict[str, int]:
        counts: Counter[str] = Counter(t.relation for t in self.tuples)
        return dict(counts)


def load_corpus(path: str | Path) -> GraphCorpus:
    """Load a JSON Lines graph corpus, validating every record.

    Each line: ``{"id": str, "type": "eventuality"|"discourse", "freq": int,
    "nodes": [{"i": int, "w": str}, ...], "edges": [{"src": int, "dst": int,
    "label": str}, ...]}``.  Node array order is word order.
    """
    graphs: list[LinguisticGraph] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                graph = _graph_from_record(rec)
            except (KeyError, TypeError) as exc:
                raise InputError(f"{path}:{lineno}: malformed graph record: {exc}") from exc
            try:
                graph.validate()
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
            if graph.id in seen_ids:
                raise InputError(f"{path}:{lineno}: duplicate graph id {graph.id!r}")
            seen_ids.add(graph.id)
            graphs.append(graph)
    return GraphCorpus(tuple(graphs))


def _graph_from_record(rec: dict) -> LinguisticGraph:
    nodes = tuple(GraphNode(index=int(n["i"]), word=str(n["w"])) for n in rec["nodes"])
    edges = tuple(
        GraphEdge(src=int(e["src"]), dst=int(e["dst"]), label=str(e["label"]))
        for e in rec["edges"]
    )
    return LinguisticGraph(
        id=str(rec["id"]),
        nodes=nodes,
        edges=edges,
        freq=int(rec.get("freq", 1)),
        gtype=str(rec.get("type", "eventuality")),
    )


def load_seed_kb(path: str | Path) -> SeedKB:
    """Load the seed tuple TSV (head<TAB>relation<TAB>tail), deduplicating.

    The relation vocabulary is whatever relations appear in the file.
    """
    tuples: list[SeedTuple] = []
    seen: set[SeedTuple] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise InputError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
            head, relation, tail = fields
            head_words = tuple(head.split())
            tail_words = tuple(tail.split())
            if not head_words:
                raise InputError(f"{path}:{lineno}: empty head phrase")
            if not tail_words:
                raise InputError(f"{path}:{lineno}: empty tail phrase")
            if not relation:
                raise InputError(f"{path}:{lineno}: empty relation")
            t = SeedTuple(head=head_words, relation=relation, tail=tail_words)
            if t not in seen:
                seen.add(t)
                tuples.append(t)
    relations = frozenset(t.relation for t in tuples)
    return SeedKB(tuples=tuple(tuples), relations=relations)


class Locate(enum.Enum):
    UNIQUE = "unique"
    AMBIGUOUS = "ambiguous"
    MISSING = "missing"


def locate_phrase(graph: LinguisticGraph, phrase: tuple[str, ...] | list[str]) -> tuple[Locate, list[int]]:
    """Find the positions of a phrase's words in the graph.

    Unique iff every word of the phrase occurs exactly once among the graph's
    nodes; positions are returned in phrase order.  Any word with >= 2
    occurrences makes the result Ambiguous (this fires before Missing, and a
    phrase with an internally repeated word is always Ambiguous).  Otherwise
    a word with no occurrence makes the result Missing.
    """
    if not phrase:
        raise ValueError("phrase must be non-empty")
    occurrences: dict[str, list[int]] = {}
    for node in graph.nodes:
        occurrences.setdefault(node.word, []).append(node.index)
    phrase_counts = Counter(phrase)
    for word, k in phrase_counts.items():
        if k > 1 or len(occurrences.get(word, ())) > 1:
            return Locate.AMBIGUOUS, []
    for word in phrase:
        if word not in occurrences:
            return Locate.MISSING, []
    return Locate.UNIQUE, [occurrences[w][0] for w in phrase]
