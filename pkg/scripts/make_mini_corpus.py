#!/usr/bin/env python3
"""Generate the bundled mini corpus under data/mini/.

Deterministic: reruns produce byte-identical files.  Writes corpus.jsonl
(100 graphs), seed.tsv (30 tuples over 3 relations), annotations.tsv
(labeled tuples derived by running the extraction stages in-process), and
mini.cfg (a ready-to-use config file).
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tuplemine import matching, patterns, scoring
from tuplemine.corpus import load_corpus, load_seed_kb

OUT = Path(__file__).resolve().parents[1] / "data" / "mini"

CAPABLE_OF = [
    ("human", "think"), ("dog", "bark"), ("bird", "fly"), ("fish", "swim"),
    ("baby", "cry"), ("singer", "sing"), ("teacher", "teach"), ("runner", "run"),
    ("chef", "cook"), ("writer", "compose"), ("painter", "draw"),
    ("dancer", "dance"), ("student", "learn"), ("farmer", "plow"),
    ("pilot", "navigate"),
]
CAPABLE_OBJECTS = [
    "idea", "bone", "sky", "river", "tear", "song", "lesson", "race", "meal",
    "poem", "portrait", "tango", "fact", "field", "route",
]
USED_FOR = [
    ("hammer", "pound"), ("saw", "cut"), ("pen", "scribble"), ("cup", "drink"),
    ("knife", "slice"), ("broom", "sweep"), ("brush", "paint"),
    ("spoon", "stir"), ("key", "unlock"), ("soap", "wash"),
    ("towel", "dry"), ("ladder", "climb"),
]
AT_LOCATION = [
    ("book", "shelf"), ("car", "garage"), ("milk", "fridge"),
    ("shoe", "closet"), ("plate", "cupboard"), ("coat", "wardrobe"),
    ("tent", "campsite"), ("boat", "harbor"), ("plane", "hangar"),
    ("bread", "pantry"),
]
FILLER_LABELS = ["amod", "advmod", "nmod", "xcomp", "obl"]


def graph_record(gid, gtype, freq, words, edges):
    return {
        "id": gid, "type": gtype, "freq": freq,
        "nodes": [{"i": i, "w": w} for i, w in enumerate(words)],
        "edges": [{"src": s, "dst": d, "label": l} for s, d, l in edges],
    }


def build_graphs():
    graphs = []
    for i, (subj, verb) in enumerate(CAPABLE_OF):
        graphs.append(graph_record(
            f"cap{i:02d}", "eventuality", 1 + i % 5,
            [subj, verb, CAPABLE_OBJECTS[i]],
            [(1, 0, "nsubj"), (1, 2, "dobj")],
        ))
    for i, (tool, act) in enumerate(USED_FOR):
        graphs.append(graph_record(
            f"use{i:02d}", "eventuality", 1 + i % 4,
            [f"worker{i}", "use", tool, act],
            [(1, 0, "nsubj"), (1, 2, "dobj"), (1, 3, "xcomp")],
        ))
    for i, (thing, place) in enumerate(AT_LOCATION):
        graphs.append(graph_record(
            f"loc{i:02d}", "eventuality", 1 + i % 3,
            [thing, "be", place],
            [(1, 0, "nsubj"), (1, 2, "nmod")],
        ))
    # discourse fillers: two clauses joined by a Result edge; both nsubj
    # edges are reachable by the CapableOf pattern and yield novel tuples
    for i in range(20):
        graphs.append(graph_record(
            f"dis{i:02d}", "discourse", 1 + i % 6,
            [f"agent{i}", f"act{i}", f"peer{i}", f"react{i}"],
            [(1, 0, "nsubj"), (3, 2, "nsubj"), (1, 3, "Result")],
        ))
    # plain eventuality fillers with no seed overlap
    for i in range(100 - len(graphs)):
        label = FILLER_LABELS[i % len(FILLER_LABELS)]
        graphs.append(graph_record(
            f"fil{i:02d}", "eventuality", 1 + i % 7,
            [f"alpha{i}", f"beta{i}", f"gamma{i}"],
            [(1, 0, label), (1, 2, "obj")],
        ))
    assert len(graphs) == 100
    return graphs


def build_seeds():
    rows = []
    for subj, verb in CAPABLE_OF[:10]:
        rows.append((subj, "CapableOf", verb))
    for tool, act in USED_FOR[:10]:
        rows.append((tool, "UsedFor", act))
    for thing, place in AT_LOCATION:
        rows.append((thing, "AtLocation", place))
    assert len(rows) == 30
    return rows


def build_annotations(corpus_path, seed_path):
    corpus = load_corpus(corpus_path)
    kb = load_seed_kb(seed_path)
    stats = scoring.PatternStats(relation_sizes=kb.relation_sizes())
    for graph in corpus:
        for tup in kb.tuples:
            p = patterns.extract_pattern(tup, graph)
            if p is not None:
                stats.accumulate(p)
    selected = scoring.score_all(stats)
    compiled = [(patterns.parse_key(p.key, p.relation), p.key) for p in selected]
    supports = matching.aggregate_support(matching.extract_knowledge(compiled, corpus))

    seed_triples = {(" ".join(t.head), t.relation, " ".join(t.tail)) for t in kb.tuples}
    rows = []
    per_bucket = {}
    for s in supports:
        label = "1" if s.identity in seed_triples else "0"
        taken = per_bucket.setdefault((s.relation, label), 0)
        if taken >= 4:
            continue
        per_bucket[(s.relation, label)] = taken + 1
        rows.append((" ".join(s.head), s.relation, " ".join(s.tail), label,
                     ",".join(s.graph_ids)))
    return rows


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    corpus_path = OUT / "corpus.jsonl"
    seed_path = OUT / "seed.tsv"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in build_graphs():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(seed_path, "w", encoding="utf-8") as fh:
        for h, r, t in build_seeds():
            fh.write(f"{h}\t{r}\t{t}\n")
    rows = build_annotations(corpus_path, seed_path)
    with open(OUT / "annotations.tsv", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")
    with open(OUT / "mini.cfg", "w", encoding="utf-8") as fh:
        fh.write("corpus=data/mini/corpus.jsonl\nseed-kb=data/mini/seed.tsv\n"
                 "threshold=0.05\ntop-percent=10\nepochs=30\ndim=16\n"
                 "lr=0.1\nseed=7\nworkers=1\n")
    print(f"wrote mini corpus to {OUT} ({len(rows)} annotations)")


if __name__ == "__main__":
    main()
