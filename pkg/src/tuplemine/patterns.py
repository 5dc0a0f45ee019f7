"""Pattern extraction from (seed tuple, graph) matches.

A pattern has three parts: a head structure (slot nodes H0, H1, ...), a tail
structure (T0, T1, ...) and an internal path whose interior nodes are literal
word anchors (I0, I1, ...).  Head and tail structures are BFS spanning trees
over the matched phrase positions; the internal path is the shortest path
between the two structures after collapsing each to a super-node.  Slots are
wildcards at match time; internal literals constrain the matched word.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass

from .corpus import GraphEdge, LinguisticGraph, Locate, SeedTuple, locate_phrase

HEAD_SLOT = "head"
TAIL_SLOT = "tail"
INTERNAL = "internal"

# Discard causes surfaced by extract_pattern_detail, in reporting order.
DISCARD_CAUSES = ("ambiguous", "missing", "overlap", "disconnected")


@dataclass(frozen=True)
class PatternNode:
    slot_id: str
    role: str
    literal: str | None = None


@dataclass(frozen=True)
class PatternEdge:
    src: str
    dst: str
    label: str


@dataclass(frozen=True)
class Pattern:
    nodes: tuple[PatternNode, ...]
    edges: tuple[PatternEdge, ...]
    relation: str

    @property
    def head_slots(self) -> list[str]:
        return [n.slot_id for n in self.nodes if n.role == HEAD_SLOT]

    @property
    def tail_slots(self) -> list[str]:
        return [n.slot_id for n in self.nodes if n.role == TAIL_SLOT]

    @property
    def literals(self) -> dict[str, str]:
        return {n.slot_id: n.literal for n in self.nodes if n.role == INTERNAL}

    @property
    def length(self) -> int:
        """Pattern length: number of edges (head tree + path + tail tree)."""
        return len(self.edges)


def extract_head_structure(
    graph: LinguisticGraph, positions: list[int]
) -> tuple[list[int], list[GraphEdge]] | None:
    """BFS spanning tree over ``positions`` only; None if they don't connect.

    The search starts at the first position, walks edges in either direction,
    and never leaves the position set.  Child order is ascending node index,
    so the tree (and hence the pattern) is deterministic.  Tree edges keep
    their original direction and label.
    """
    pos_set = set(positions)
    visited = {positions[0]}
    tree_edges: list[GraphEdge] = []
    queue = deque([positions[0]])
    while queue:
        cur = queue.popleft()
        for nb in graph.neighbors(cur):
            if nb in pos_set and nb not in visited:
                visited.add(nb)
                tree_edges.append(graph.edges_between(cur, nb)[0])
                queue.append(nb)
    if visited != pos_set:
        return None
    return positions, tree_edges


def extract_internal_path(
    graph: LinguisticGraph, head_nodes: list[int], tail_nodes: list[int]
) -> tuple[list[int], list[GraphEdge]] | None:
    """Shortest path between the collapsed head and tail structures.

    Returns (interior node indices in head-to-tail order, path edges).  An
    empty interior means the structures are adjacent and the single
    connecting edge is returned.  Among equal-length paths the one with the
    lexicographically least node-index sequence (head attachment, interior
    nodes, tail attachment) wins; parallel edges tie-break on least label.
    Returns None when no path exists (defensive; impossible on connected
    graphs).
    """
    head_set, tail_set = set(head_nodes), set(tail_nodes)
    if head_set & tail_set:
        raise ValueError("head and tail structures must be disjoint")

    # BFS distances toward the tail super-node over the collapsed graph.
    # dist[v] is defined for interior candidates (nodes outside both sets).
    dist: dict[int, int] = {}
    frontier = sorted(
        {nb for t in tail_set for nb in graph.neighbors(t)} - tail_set - head_set
    )
    if any(nb in head_set for t in tail_set for nb in graph.neighbors(t)):
        head_tail_adjacent = True
    else:
        head_tail_adjacent = False
    for v in frontier:
        dist[v] = 1
    queue = deque(frontier)
    while queue:
        cur = queue.popleft()
        for nb in graph.neighbors(cur):
            if nb in head_set or nb in tail_set:
                continue
            if nb not in dist:
                dist[nb] = dist[cur] + 1
                queue.append(nb)

    if head_tail_adjacent:
        total = 1
    else:
        interior_starts = [
            nb
            for h in head_set
            for nb in graph.neighbors(h)
            if nb in dist
        ]
        if not interior_starts:
            return None
        total = 1 + min(dist[v] for v in interior_starts)

    # Greedy lexicographic reconstruction: least head attachment first, then
    # least next interior node at each step, then least tail attachment.
    def attaches(h: int) -> bool:
        if total == 1:
            return any(nb in tail_set for nb in graph.neighbors(h))
        return any(nb in dist and dist[nb] == total - 1 for nb in graph.neighbors(h))

    h_attach = min(h for h in head_set if attaches(h))
    interior: list[int] = []
    cur = h_attach
    for step in range(1, total):
        remaining = total - step
        nxt = min(
            nb for nb in graph.neighbors(cur) if nb in dist and dist[nb] == remaining
        )
        interior.append(nxt)
        cur = nxt
    t_attach = min(t for t in tail_set if t in graph.neighbors(cur))

    path_nodes = [h_attach] + interior + [t_attach]
    path_edges = [
        graph.edges_between(a, b)[0] for a, b in zip(path_nodes, path_nodes[1:])
    ]
    return interior, path_edges


def extract_pattern(tup: SeedTuple, graph: LinguisticGraph) -> Pattern | None:
    """Extract the pattern for a (tuple, graph) pair, or None on discard."""
    pattern, _cause = extract_pattern_detail(tup, graph)
    return pattern


def extract_pattern_detail(
    tup: SeedTuple, graph: LinguisticGraph
) -> tuple[Pattern | None, str]:
    """Like extract_pattern but also names the discard cause.

    Causes: "ok", "ambiguous" (a head/tail word matches more than once),
    "missing" (a word is absent), "overlap" (head and tail share a node),
    "disconnected" (head or tail words don't connect through themselves, or
    no head-to-tail path exists).
    """
    h_status, h_pos = locate_phrase(graph, tup.head)
    t_status, t_pos = locate_phrase(graph, tup.tail)
    if Locate.AMBIGUOUS in (h_status, t_status):
        return None, "ambiguous"
    if Locate.MISSING in (h_status, t_status):
        return None, "missing"
    if set(h_pos) & set(t_pos):
        return None, "overlap"

    head_struct = extract_head_structure(graph, h_pos)
    if head_struct is None:
        return None, "disconnected"
    tail_struct = extract_head_structure(graph, t_pos)
    if tail_struct is None:
        return None, "disconnected"
    path = extract_internal_path(graph, head_struct[0], tail_struct[0])
    if path is None:
        return None, "disconnected"
    interior, path_edges = path

    # Slot ids follow phrase word order; interior ids follow path order.
    slot_of: dict[int, str] = {}
    nodes: list[PatternNode] = []
    for k, pos in enumerate(h_pos):
        slot_of[pos] = f"H{k}"
        nodes.append(PatternNode(slot_id=f"H{k}", role=HEAD_SLOT))
    for k, pos in enumerate(interior):
        slot_of[pos] = f"I{k}"
        nodes.append(PatternNode(slot_id=f"I{k}", role=INTERNAL, literal=graph.nodes[pos].word))
    for k, pos in enumerate(t_pos):
        slot_of[pos] = f"T{k}"
        nodes.append(PatternNode(slot_id=f"T{k}", role=TAIL_SLOT))

    edges = [
        PatternEdge(src=slot_of[e.src], dst=slot_of[e.dst], label=e.label)
        for e in head_struct[1] + path_edges + tail_struct[1]
    ]
    return Pattern(nodes=tuple(nodes), edges=tuple(edges), relation=tup.relation), "ok"


def canonicalize(pattern: Pattern) -> str:
    """Deterministic string key for structural pattern identity.

    Grammar: node tokens joined by "|" (H slots by id, then I literals as
    ``I<k>=word``, then T slots), then each edge as ``src-label->dst`` sorted
    by (src, label, dst); all segments joined by ";".
    """
    def slot_sort(slot_id: str) -> tuple[str, int]:
        return slot_id[0], int(slot_id[1:])

    h = sorted((n.slot_id for n in pattern.nodes if n.role == HEAD_SLOT), key=slot_sort)
    i = sorted((n for n in pattern.nodes if n.role == INTERNAL), key=lambda n: slot_sort(n.slot_id))
    t = sorted((n.slot_id for n in pattern.nodes if n.role == TAIL_SLOT), key=slot_sort)
    node_part = "|".join(h + [f"{n.slot_id}={n.literal}" for n in i] + t)
    edge_parts = sorted(
        (f"{e.src}-{e.label}->{e.dst}" for e in pattern.edges),
        key=lambda s: _edge_sort_key(s),
    )
    return ";".join([node_part] + edge_parts)


def _edge_sort_key(rendered: str) -> tuple[str, str, str]:
    m = _EDGE_RE.match(rendered)
    assert m is not None
    return m.group(1), m.group(2), m.group(3)


_EDGE_RE = re.compile(r"^([HIT]\d+)-(.+)->([HIT]\d+)$")
_LITERAL_RE = re.compile(r"^(I\d+)=(.+)$")
_SLOT_RE = re.compile(r"^[HT]\d+$")


def parse_key(key: str, relation: str) -> Pattern:
    """Rebuild a Pattern from its canonical key (inverse of canonicalize)."""
    segments = key.split(";")
    nodes: list[PatternNode] = []
    for token in segments[0].split("|"):
        if _SLOT_RE.match(token):
            role = HEAD_SLOT if token[0] == "H" else TAIL_SLOT
            nodes.append(PatternNode(slot_id=token, role=role))
            continue
        m = _LITERAL_RE.match(token)
        if not m:
            raise ValueError(f"bad pattern key node token: {token!r}")
        nodes.append(PatternNode(slot_id=m.group(1), role=INTERNAL, literal=m.group(2)))
    edges: list[PatternEdge] = []
    for seg in segments[1:]:
        m = _EDGE_RE.match(seg)
        if not m:
            raise ValueError(f"bad pattern key edge token: {seg!r}")
        edges.append(PatternEdge(src=m.group(1), dst=m.group(3), label=m.group(2)))
    return Pattern(nodes=tuple(nodes), edges=tuple(edges), relation=relation)
