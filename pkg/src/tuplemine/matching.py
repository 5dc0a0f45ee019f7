"""Apply selected patterns corpus-wide to extract candidate tuples.

Matching is subgraph embedding of a pattern into a graph: an injective
assignment of pattern slots to graph nodes such that every pattern edge maps
to a graph edge with the same label and direction, and every literal slot
lands on a node with the literal's word.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus import GraphCorpus, LinguisticGraph
from .patterns import HEAD_SLOT, INTERNAL, TAIL_SLOT, Pattern


@dataclass(frozen=True)
class Match:
    assignment: tuple[tuple[str, int], ...]  # (slot-id, node index), slot-sorted
    graph_id: str

    def as_dict(self) -> dict[str, int]:
        return dict(self.assignment)


@dataclass(frozen=True)
class CandidateTuple:
    head: tuple[str, ...]
    relation: str
    tail: tuple[str, ...]
    pattern_key: str


@dataclass
class SupportSet:
    head: tuple[str, ...]
    relation: str
    tail: tuple[str, ...]
    supports: set[tuple[str, str]] = field(default_factory=set)  # (graph-id, pattern-key)

    @property
    def graph_ids(self) -> list[str]:
        return sorted({gid for gid, _ in self.supports})

    @property
    def pattern_keys(self) -> list[str]:
        return sorted({key for _, key in self.supports})

    @property
    def identity(self) -> tuple[str, str, str]:
        return (" ".join(self.head), self.relation, " ".join(self.tail))


def match_pattern(pattern: Pattern, graph: LinguisticGraph) -> list[Match]:
    """Enumerate all injective embeddings of the pattern into the graph.

    Backtracking over pattern slots in canonical order; candidate graph
    nodes are tried in ascending index, so output order is deterministic.
    """
    role_order = {HEAD_SLOT: 0, INTERNAL: 1, TAIL_SLOT: 2}
    slots = [
        n.slot_id
        for n in sorted(pattern.nodes, key=lambda n: (role_order[n.role], int(n.slot_id[1:])))
    ]
    literals = pattern.literals
    # Adjacency of pattern edges per slot for incremental checking.
    edges_by_slot: dict[str, list] = {s: [] for s in slots}
    for e in pattern.edges:
        edges_by_slot[e.src].append(e)
        edges_by_slot[e.dst].append(e)

    graph_edges = {(e.src, e.dst, e.label) for e in graph.edges}
    n = len(graph.nodes)
    matches: list[Match] = []
    assignment: dict[str, int] = {}
    used: set[int] = set()

    def consistent(slot: str, node: int) -> bool:
        lit = literals.get(slot)
        if lit is not None and graph.nodes[node].word != lit:
            return False
        for e in edges_by_slot[slot]:
            other = e.dst if e.src == slot else e.src
            if other not in assignment:
                continue
            if e.src == slot:
                src, dst = node, assignment[other]
            else:
                src, dst = assignment[other], node
            if (src, dst, e.label) not in graph_edges:
                return False
        return True

    def backtrack(depth: int) -> None:
        if depth == len(slots):
            matches.append(Match(
                assignment=tuple(sorted(assignment.items())),
                graph_id=graph.id,
            ))
            return
        slot = slots[depth]
        for node in range(n):
            if node in used:
                continue
            if consistent(slot, node):
                assignment[slot] = node
                used.add(node)
                backtrack(depth + 1)
                used.remove(node)
                del assignment[slot]

    backtrack(0)
    return matches


def match_to_candidate(pattern: Pattern, key: str, graph: LinguisticGraph, match: Match) -> CandidateTuple:
    """Read off head/tail words of a match, each ordered by node index."""
    a = match.as_dict()
    head_nodes = sorted(a[s] for s in pattern.head_slots)
    tail_nodes = sorted(a[s] for s in pattern.tail_slots)
    return CandidateTuple(
        head=tuple(graph.nodes[i].word for i in head_nodes),
        relation=pattern.relation,
        tail=tuple(graph.nodes[i].word for i in tail_nodes),
        pattern_key=key,
    )


def extract_knowledge(
    patterns: list[tuple[Pattern, str]], corpus: GraphCorpus
) -> list[tuple[CandidateTuple, str]]:
    """Run every (pattern, key) over every graph; one candidate per match."""
    out: list[tuple[CandidateTuple, str]] = []
    for graph in corpus:
        out.extend(extract_from_graph(patterns, graph))
    return out


def extract_from_graph(
    patterns: list[tuple[Pattern, str]], graph: LinguisticGraph
) -> list[tuple[CandidateTuple, str]]:
    out: list[tuple[CandidateTuple, str]] = []
    for pattern, key in patterns:
        for m in match_pattern(pattern, graph):
            out.append((match_to_candidate(pattern, key, graph, m), graph.id))
    return out


def aggregate_support(raw: list[tuple[CandidateTuple, str]]) -> list[SupportSet]:
    """Group candidates by (head, relation, tail); dedupe supports as a set."""
    groups: dict[tuple[str, str, str], SupportSet] = {}
    for cand, graph_id in raw:
        identity = (" ".join(cand.head), cand.relation, " ".join(cand.tail))
        group = groups.get(identity)
        if group is None:
            group = SupportSet(head=cand.head, relation=cand.relation, tail=cand.tail)
            groups[identity] = group
        group.supports.add((graph_id, cand.pattern_key))
    return [groups[k] for k in sorted(groups, key=lambda t: (t[1], t[0], t[2]))]


def write_knowledge(path: str | Path, supports: list[SupportSet],
                    scores: dict[tuple[str, str, str], float] | None = None) -> None:
    """Knowledge TSV: head, relation, tail, support_count, pattern_keys, score."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in supports:
            score = "" if scores is None else f"{scores[s.identity]:.6f}"
            fh.write("\t".join([
                " ".join(s.head),
                s.relation,
                " ".join(s.tail),
                str(len(s.supports)),
                ",".join(s.pattern_keys),
                score,
            ]) + "\n")


def write_supports(path: str | Path, supports: list[SupportSet]) -> None:
    """Companion file recording each tuple's (graph-id, pattern-key) supports.

    The knowledge TSV itself carries only the aggregate columns; ranking
    needs the supporting graph ids back, so they live here.
    Columns: head, relation, tail, supports (comma-joined graph-id:key pairs).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for s in supports:
            fh.write("\t".join([
                " ".join(s.head),
                s.relation,
                " ".join(s.tail),
                ",".join(f"{gid}:{key}" for gid, key in sorted(s.supports)),
            ]) + "\n")


def read_knowledge(path: str | Path) -> list[SupportSet]:
    """Read the 6-column knowledge TSV; supports carry pattern keys only."""
    out: list[SupportSet] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            head, relation, tail, _count, keys, _score = fields
            out.append(SupportSet(
                head=tuple(head.split()), relation=relation, tail=tuple(tail.split()),
                supports={("", k) for k in keys.split(",") if k},
            ))
    return out


def read_supports(path: str | Path) -> list[SupportSet]:
    out: list[SupportSet] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            head, relation, tail, pairs_field = fields
            pairs = set()
            for item in pairs_field.split(","):
                gid, _, key = item.partition(":")
                pairs.add((gid, key))
            out.append(SupportSet(
                head=tuple(head.split()), relation=relation, tail=tuple(tail.split()),
                supports=pairs,
            ))
    return out
