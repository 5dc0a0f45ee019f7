"""Pattern counting and plausibility scoring.

For a pattern P and relation r:

    U(P|r) = (C(P|r)/sqrt(|C^r|)) / sum_r' C(P|r')/sqrt(|C^r'|)
    F(P|r) = C(P|r) * L(P) * U(P|r)
    P(P|r) = F(P|r) / sum_{P' in patterns of r} F(P'|r)

where C(P|r) is the observation count, L(P) the pattern's edge count and
|C^r| the number of seed tuples of relation r.  Patterns with plausibility
strictly greater than the threshold (default 0.05) survive selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .patterns import Pattern, canonicalize

DEFAULT_THRESHOLD = 0.05


@dataclass
class PatternStats:
    """Accumulated observation counts, keyed by (canonical key, relation)."""

    counts: dict[tuple[str, str], int] = field(default_factory=dict)
    relation_sizes: dict[str, int] = field(default_factory=dict)
    lengths: dict[str, int] = field(default_factory=dict)

    def accumulate(self, pattern: Pattern) -> None:
        key = canonicalize(pattern)
        self.accumulate_key(key, pattern.relation, pattern.length)

    def accumulate_key(self, key: str, relation: str, length: int) -> None:
        if length < 1:
            raise ValueError(f"pattern {key!r}: length must be >= 1")
        known = self.lengths.get(key)
        if known is not None and known != length:
            raise ValueError(
                f"pattern {key!r}: length conflict ({known} vs {length}); "
                "canonical keys must determine length"
            )
        self.lengths[key] = length
        self.counts[(key, relation)] = self.counts.get((key, relation), 0) + 1

    def merge(self, other: "PatternStats") -> None:
        for (key, relation), c in other.counts.items():
            known = self.lengths.get(key)
            if known is not None and known != other.lengths[key]:
                raise ValueError(f"pattern {key!r}: length conflict on merge")
            self.lengths[key] = other.lengths[key]
            self.counts[(key, relation)] = self.counts.get((key, relation), 0) + c

    def relations(self) -> list[str]:
        return sorted({r for _, r in self.counts})

    def keys_for(self, relation: str) -> list[str]:
        return sorted(k for k, r in self.counts if r == relation)


@dataclass(frozen=True)
class ScoredPattern:
    key: str
    relation: str
    uniqueness: float
    raw_score: float
    plausibility: float


def uniqueness(stats: PatternStats, key: str, relation: str) -> float:
    """Square-root-normalized share of the key's observations owned by r."""
    c = stats.counts.get((key, relation), 0)
    if c <= 0:
        raise ValueError(f"pattern {key!r} was never observed for {relation!r}")
    denom = 0.0
    for (k, r), count in stats.counts.items():
        if k == key:
            size = stats.relation_sizes.get(r)
            if size is None or size < 1:
                raise ValueError(f"missing relation size for {r!r}")
            denom += count / math.sqrt(size)
    return (c / math.sqrt(stats.relation_sizes[relation])) / denom


def plausibility(stats: PatternStats, relation: str) -> list[ScoredPattern]:
    """Score every pattern observed for the relation; plausibilities sum to 1."""
    keys = stats.keys_for(relation)
    if not keys:
        raise ValueError(f"no patterns observed for relation {relation!r}")
    raw: list[tuple[str, float, float]] = []
    for key in keys:
        u = uniqueness(stats, key, relation)
        f = stats.counts[(key, relation)] * stats.lengths[key] * u
        raw.append((key, u, f))
    total = sum(f for _, _, f in raw)
    return [
        ScoredPattern(key=key, relation=relation, uniqueness=u, raw_score=f,
                      plausibility=f / total)
        for key, u, f in raw
    ]


def select_patterns(
    scored: list[ScoredPattern], threshold: float = DEFAULT_THRESHOLD
) -> list[ScoredPattern]:
    """Keep patterns with plausibility strictly above the threshold."""
    if not 0 <= threshold < 1:
        raise ValueError("threshold must be in [0, 1)")
    kept = [p for p in scored if p.plausibility > threshold]
    return sorted(kept, key=lambda p: (-p.plausibility, p.key))


def score_all(stats: PatternStats, threshold: float = DEFAULT_THRESHOLD) -> list[ScoredPattern]:
    """Score and select across every relation, relations in sorted order."""
    out: list[ScoredPattern] = []
    for relation in stats.relations():
        out.extend(select_patterns(plausibility(stats, relation), threshold))
    return out


def write_pattern_observations(path: str | Path, observations: list[tuple[str, str]]) -> None:
    """Write the unscored pattern TSV, one line per observation.

    Columns: relation<TAB>canonical-key<TAB>plausibility (blank here).
    Repeated lines encode C(P|r).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for relation, key in observations:
            fh.write(f"{relation}\t{key}\t\n")


def read_pattern_observations(path: str | Path) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields")
            out.append((fields[0], fields[1]))
    return out


def write_scored_patterns(path: str | Path, scored: list[ScoredPattern]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in scored:
            fh.write(f"{p.relation}\t{p.key}\t{p.plausibility:.9f}\n")


def read_scored_patterns(path: str | Path) -> list[ScoredPattern]:
    out: list[ScoredPattern] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields")
            relation, key, score = fields
            out.append(ScoredPattern(key=key, relation=relation, uniqueness=0.0,
                                     raw_score=0.0, plausibility=float(score)))
    return out
