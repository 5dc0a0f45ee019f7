"""Pipeline orchestration: one subcommand per mining stage.

Stages: extract-patterns -> select-patterns -> extract-knowledge ->
train-ranker -> rank -> stats.  Every command reads a flat key=value config
file (each key overridable by the flag of the same name), validates its
inputs up front, and writes deterministic outputs so reruns are
byte-identical.  Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import json
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import matching, metrics, patterns, ranker, report, scoring
from .corpus import GraphCorpus, InputError, SeedKB, load_corpus, load_seed_kb

DEFAULTS = {
    "threshold": scoring.DEFAULT_THRESHOLD,
    "top-percent": 10.0,
    "epochs": 50,
    "dim": 32,
    "encoder-layers": 1,
    "lr": 0.1,
    "seed": 0,
    "workers": 1,
}


class Settings:
    """Merged view of defaults, config-file values, and CLI flags."""

    def __init__(self, config_path: str | None, overrides: dict):
        values = dict(DEFAULTS)
        if config_path:
            values.update(_parse_config(config_path))
        for key, val in overrides.items():
            if val is not None:
                values[key.replace("_", "-")] = val
        self.values = values

    def path(self, key: str) -> Path:
        if key not in self.values:
            raise InputError(f"missing required setting {key!r} (flag or config file)")
        return Path(str(self.values[key]))

    def out_dir(self) -> Path:
        out = self.path("out")
        out.mkdir(parents=True, exist_ok=True)
        return out

    def ranker_config(self) -> ranker.RankerConfig:
        return ranker.RankerConfig(
            embed_dim=int(self.values["dim"]),
            encoder_layers=int(self.values["encoder-layers"]),
            learning_rate=float(self.values["lr"]),
            epochs=int(self.values["epochs"]),
            rng_seed=int(self.values["seed"]),
        )

    @property
    def threshold(self) -> float:
        return float(self.values["threshold"])

    @property
    def top_percent(self) -> float:
        return float(self.values["top-percent"])

    @property
    def workers(self) -> int:
        return max(1, int(self.values["workers"]))


def _parse_config(path: str) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _chunks(items, n_chunks):
    size = max(1, -(-len(items) // n_chunks))
    return [items[i:i + size] for i in range(0, len(items), size)]


def _parallel_map(fn, chunks, workers):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


_common = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="Flat key=value config file."),
    click.option("--corpus", default=None, help="Graph corpus (JSON Lines)."),
    click.option("--seed-kb", default=None, help="Seed tuple TSV."),
    click.option("--out", default=None, help="Output directory."),
    click.option("--threshold", type=float, default=None,
                 help="Pattern plausibility threshold (strict >)."),
    click.option("--top-percent", type=float, default=None,
                 help="Top slice size for rank, in percent."),
    click.option("--epochs", type=int, default=None),
    click.option("--dim", type=int, default=None, help="Ranker embedding dim."),
    click.option("--lr", type=float, default=None, help="Ranker learning rate."),
    click.option("--seed", type=int, default=None, help="RNG seed."),
    click.option("--workers", type=int, default=None, help="Worker pool size."),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


def _settings(kwargs) -> Settings:
    config_path = kwargs.pop("config_path")
    return Settings(config_path, kwargs)


@click.group()
def cli():
    """Mine relation-typed knowledge tuples from linguistic graph corpora."""


def _guarded(fn):
    try:
        fn()
    except (InputError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(2)


@cli.command("extract-patterns")
@common_options
def cmd_extract_patterns(**kwargs):
    """Mine patterns from every (seed tuple, graph) pair."""
    settings = _settings(kwargs)

    def run():
        corpus = load_corpus(settings.path("corpus"))
        kb = load_seed_kb(settings.path("seed-kb"))
        out = settings.out_dir()

        def work(graph_chunk):
            observations = []
            causes: Counter = Counter()
            for graph in graph_chunk:
                for tup in kb.tuples:
                    pattern, cause = patterns.extract_pattern_detail(tup, graph)
                    if pattern is not None:
                        observations.append((tup.relation, patterns.canonicalize(pattern)))
                    elif cause in ("ambiguous", "overlap", "disconnected"):
                        causes[cause] += 1
                    elif cause == "missing":
                        causes["missing"] += 1
            return observations, causes

        results = _parallel_map(work, _chunks(list(corpus.graphs), settings.workers * 4),
                                settings.workers)
        observations: list[tuple[str, str]] = []
        causes: Counter = Counter()
        for obs, c in results:
            observations.extend(obs)
            causes.update(c)

        scoring.write_pattern_observations(out / "patterns.tsv", observations)
        per_relation = Counter(rel for rel, _ in observations)
        with open(out / "extract_summary.txt", "w", encoding="utf-8") as fh:
            fh.write(f"graphs={len(corpus)}\nseed_tuples={len(kb.tuples)}\n")
            fh.write(f"observations={len(observations)}\n")
            for rel in sorted(per_relation):
                fh.write(f"patterns[{rel}]={per_relation[rel]}\n")
            for cause in patterns.DISCARD_CAUSES:
                fh.write(f"discard[{cause}]={causes.get(cause, 0)}\n")
        click.echo(f"wrote {len(observations)} pattern observations to {out / 'patterns.tsv'}")

    _guarded(run)


@cli.command("select-patterns")
@common_options
def cmd_select_patterns(**kwargs):
    """Score observed patterns and keep those above the threshold."""
    settings = _settings(kwargs)

    def run():
        out = settings.out_dir()
        kb = load_seed_kb(settings.path("seed-kb"))
        observations = scoring.read_pattern_observations(out / "patterns.tsv")
        stats = scoring.PatternStats(relation_sizes=kb.relation_sizes())
        for relation, key in observations:
            if relation not in stats.relation_sizes:
                raise InputError(f"pattern relation {relation!r} not in seed KB")
            stats.accumulate_key(key, relation, patterns.parse_key(key, relation).length)
        selected = scoring.score_all(stats, settings.threshold)
        scoring.write_scored_patterns(out / "patterns_scored.tsv", selected)
        report.pattern_plausibility_figure(selected, out / "patterns_plausibility.png")
        click.echo(f"kept {len(selected)} patterns above {settings.threshold}")

    _guarded(run)


@cli.command("extract-knowledge")
@common_options
def cmd_extract_knowledge(**kwargs):
    """Apply selected patterns corpus-wide and aggregate candidate tuples."""
    settings = _settings(kwargs)

    def run():
        out = settings.out_dir()
        corpus = load_corpus(settings.path("corpus"))
        selected = scoring.read_scored_patterns(out / "patterns_scored.tsv")
        compiled = [(patterns.parse_key(p.key, p.relation), p.key) for p in selected]

        def work(graph_chunk):
            raw = []
            for graph in graph_chunk:
                raw.extend(matching.extract_from_graph(compiled, graph))
            return raw

        results = _parallel_map(work, _chunks(list(corpus.graphs), settings.workers * 4),
                                settings.workers)
        raw = [item for chunk in results for item in chunk]
        supports = matching.aggregate_support(raw)
        matching.write_knowledge(out / "knowledge.tsv", supports)
        matching.write_supports(out / "knowledge_supports.tsv", supports)
        click.echo(f"extracted {len(supports)} candidate tuples")

    _guarded(run)


@cli.command("train-ranker")
@click.option("--annotations", required=True, help="Annotation TSV with 0/1 labels.")
@common_options
def cmd_train_ranker(annotations, **kwargs):
    """Train the per-relation plausibility classifier."""
    settings = _settings(kwargs)

    def run():
        out = settings.out_dir()
        corpus = load_corpus(settings.path("corpus"))
        dataset = ranker.read_annotations(annotations)
        config = settings.ranker_config()
        models = ranker.train(dataset, corpus, config, progress=True)
        ranker.save_checkpoint(out / "checkpoint.json", models, config)
        click.echo(f"trained {len(models)} relation models -> {out / 'checkpoint.json'}")

    _guarded(run)


@cli.command("rank")
@click.option("--checkpoint", default=None, help="Checkpoint JSON (default: <out>/checkpoint.json).")
@common_options
def cmd_rank(checkpoint, **kwargs):
    """Score extracted knowledge and write the ranked file plus a top slice."""
    settings = _settings(kwargs)

    def run():
        out = settings.out_dir()
        corpus = load_corpus(settings.path("corpus"))
        supports = matching.read_supports(out / "knowledge_supports.tsv")
        ckpt = Path(checkpoint) if checkpoint else out / "checkpoint.json"
        models, config = ranker.load_checkpoint(ckpt)
        ranked = ranker.rank_knowledge(supports, corpus, models, config)
        scores = {s.identity: score for s, score in ranked}
        ordered = [s for s, _ in ranked]
        matching.write_knowledge(out / "knowledge_ranked.tsv", ordered, scores)
        top = ranker.top_slice(ordered, settings.top_percent)
        matching.write_knowledge(out / "knowledge_top.tsv", top, scores)
        report.score_histogram([score for _, score in ranked], out / "score_histogram.png")
        click.echo(f"ranked {len(ranked)} tuples; top {settings.top_percent}% -> "
                   f"{len(top)} tuples")

    _guarded(run)


@cli.command("stats")
@common_options
def cmd_stats(**kwargs):
    """Novelty and quantity report over the extracted knowledge."""
    settings = _settings(kwargs)

    def run():
        out = settings.out_dir()
        kb = load_seed_kb(settings.path("seed-kb"))
        candidates = matching.read_knowledge(out / "knowledge.tsv")
        rep = metrics.novelty(candidates, kb)
        (out / "novelty.txt").write_text(rep.as_text(), encoding="utf-8")
        with open(out / "novelty.json", "w", encoding="utf-8") as fh:
            json.dump(rep.as_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        report.novelty_figure(rep, out / "novelty.png")
        report.relation_counts_figure(
            Counter(c.relation for c in candidates), out / "relation_counts.png")
        click.echo(rep.as_text().rstrip())

    _guarded(run)


def main():
    cli(standalone_mode=True)


if __name__ == "__main__":
    main()
