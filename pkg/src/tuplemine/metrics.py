"""Quantity and novelty statistics, plus annotation-sample export."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import SeedKB
from .matching import SupportSet


@dataclass(frozen=True)
class NoveltyReport:
    novel_t: float
    novel_c: float
    tuple_count: int
    vocab_count: int
    concept_count: int

    def as_dict(self) -> dict:
        return {
            "novel_t": round(self.novel_t, 4),
            "novel_c": round(self.novel_c, 4),
            "tuple_count": self.tuple_count,
            "vocab_count": self.vocab_count,
            "concept_count": self.concept_count,
        }

    def as_text(self) -> str:
        d = self.as_dict()
        return "".join(f"{k}={d[k]:.4f}\n" if isinstance(d[k], float) else f"{k}={d[k]}\n"
                       for k in ("tuple_count", "vocab_count", "concept_count",
                                 "novel_t", "novel_c"))


def novelty(candidates: list[SupportSet], seed: SeedKB) -> NoveltyReport:
    """Fraction of candidate tuples / concepts absent from the seed KB.

    Tuple novelty is exact string match on the (head, relation, tail)
    triple.  Concept novelty is over distinct candidate concept strings,
    pooling head and tail phrases.
    """
    seed_triples = {(" ".join(t.head), t.relation, " ".join(t.tail)) for t in seed.tuples}
    seed_concepts = {" ".join(t.head) for t in seed.tuples} | {" ".join(t.tail) for t in seed.tuples}

    cand_triples = [c.identity for c in candidates]
    cand_concepts = {" ".join(c.head) for c in candidates} | {" ".join(c.tail) for c in candidates}
    vocab = {w for c in candidates for w in c.head} | {w for c in candidates for w in c.tail}

    novel_t = (sum(1 for t in cand_triples if t not in seed_triples) / len(cand_triples)
               if cand_triples else 0.0)
    novel_c = (sum(1 for c in cand_concepts if c not in seed_concepts) / len(cand_concepts)
               if cand_concepts else 0.0)
    return NoveltyReport(
        novel_t=novel_t,
        novel_c=novel_c,
        tuple_count=len(cand_triples),
        vocab_count=len(vocab),
        concept_count=len(cand_concepts),
    )


def sample_for_annotation(candidates: list[SupportSet], per_relation_n: int,
                          rng_seed: int) -> list[SupportSet]:
    """Uniform per-relation sample without replacement, deterministic per seed.

    Relations with fewer than n candidates are exported whole.  Sampling
    runs over the canonical sorted candidate order, so the result does not
    depend on input order.
    """
    if per_relation_n < 1:
        raise ValueError("per_relation_n must be >= 1")
    by_relation: dict[str, list[SupportSet]] = {}
    for c in sorted(candidates, key=lambda c: c.identity):
        by_relation.setdefault(c.relation, []).append(c)
    rng = random.Random(rng_seed)
    out: list[SupportSet] = []
    for relation in sorted(by_relation):
        group = by_relation[relation]
        if len(group) <= per_relation_n:
            chosen = group
        else:
            chosen = sorted(rng.sample(group, per_relation_n), key=lambda c: c.identity)
        out.extend(chosen)
    return out


def write_annotation_sample(path: str | Path, sample: list[SupportSet]) -> None:
    """Annotation TSV with the label column blank, grouped by relation."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in sample:
            fh.write("\t".join([
                " ".join(c.head), c.relation, " ".join(c.tail), "",
                ",".join(c.graph_ids),
            ]) + "\n")
