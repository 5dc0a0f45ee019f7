"""Trainable plausibility classifier over (tuple, supporting graph) instances.

The model scores a knowledge tuple against one supporting graph:

    token embeddings -> self-attention encoder blocks -> graph attention
    over word neighborhoods -> mean pooling of [e, e_hat] over head / tail
    words -> linear head with log-frequency and graph-type features ->
    logistic output f in (0, 1).

A tuple's score is the mean of f over its supporting graphs (multi-instance
averaging), trained with binary cross-entropy and plain SGD.  One model is
trained per relation.  Everything is plain numpy with hand-written
backpropagation; ``gradient_check`` verifies the gradients against central
finite differences.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .corpus import GraphCorpus, LinguisticGraph
from .matching import SupportSet

log = logging.getLogger(__name__)

UNK = "<UNK>"


@dataclass
class RankerConfig:
    embed_dim: int = 32
    encoder_layers: int = 1
    learning_rate: float = 0.1
    epochs: int = 50
    rng_seed: int = 0
    use_positions: bool = False

    def validate(self) -> None:
        if self.embed_dim < 2:
            raise ValueError("embed_dim must be >= 2")
        if self.encoder_layers < 0:
            raise ValueError("encoder_layers must be >= 0")
        if self.learning_rate <= 0 or self.epochs < 1:
            raise ValueError("learning_rate must be > 0 and epochs >= 1")


@dataclass(frozen=True)
class AnnotatedExample:
    head: tuple[str, ...]
    relation: str
    tail: tuple[str, ...]
    label: int
    graph_ids: tuple[str, ...]


@dataclass
class EncoderLayer:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


@dataclass
class RelationModel:
    """Parameters for one relation's classifier."""

    vocab: dict[str, int]
    emb: np.ndarray                      # (V, d)
    layers: list[EncoderLayer] = field(default_factory=list)
    wa: np.ndarray = None                # (2d,) attention net weights
    ba: np.ndarray = None                # () attention net bias
    wp: np.ndarray = None                # (4d+2,) prediction head weights
    bp: np.ndarray = None                # () prediction head bias

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        items = [("emb", self.emb)]
        for i, layer in enumerate(self.layers):
            for name in ("wq", "wk", "wv", "w1", "b1", "w2", "b2"):
                items.append((f"layer{i}.{name}", getattr(layer, name)))
        items += [("wa", self.wa), ("ba", self.ba), ("wp", self.wp), ("bp", self.bp)]
        return items

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.param_items()}

    def apply_grads(self, grads: dict[str, np.ndarray], lr: float) -> None:
        for name, arr in self.param_items():
            arr -= lr * grads[name]


def build_vocab(graphs: list[LinguisticGraph]) -> dict[str, int]:
    words = sorted({n.word for g in graphs for n in g.nodes})
    vocab = {UNK: 0}
    for w in words:
        vocab[w] = len(vocab)
    return vocab


def init_model(vocab: dict[str, int], config: RankerConfig, rng: np.random.Generator) -> RelationModel:
    d = config.embed_dim
    layers = []
    for _ in range(config.encoder_layers):
        layers.append(EncoderLayer(
            wq=rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)),
            wk=rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)),
            wv=rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)),
            w1=rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)),
            b1=np.zeros(d),
            w2=rng.normal(0.0, 1.0 / math.sqrt(d), (d, d)),
            b2=np.zeros(d),
        ))
    return RelationModel(
        vocab=vocab,
        emb=rng.normal(0.0, 0.1, (len(vocab), d)),
        layers=layers,
        wa=rng.normal(0.0, 0.1, (2 * d,)),
        ba=np.array(0.0),
        wp=rng.normal(0.0, 0.1, (4 * d + 2,)),
        bp=np.array(0.0),
    )


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _softmax(v: np.ndarray) -> np.ndarray:
    s = v - v.max()
    e = np.exp(s)
    return e / e.sum()


def _positional(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angles = pos / np.power(10000.0, (2 * (i // 2)) / d)
    enc = np.zeros((n, d))
    enc[:, 0::2] = np.sin(angles[:, 0::2])
    enc[:, 1::2] = np.cos(angles[:, 1::2])
    return enc


def encode_tokens(graph: LinguisticGraph, model: RelationModel, config: RankerConfig):
    """Contextual embeddings for every graph word, with backward cache."""
    ids = [model.vocab.get(n.word, model.vocab[UNK]) for n in graph.nodes]
    x = model.emb[ids].copy()
    if config.use_positions:
        x = x + _positional(len(ids), config.embed_dim)
    layer_caches = []
    d = config.embed_dim
    for layer in model.layers:
        q = x @ layer.wq
        k = x @ layer.wk
        v = x @ layer.wv
        scores = (q @ k.T) / math.sqrt(d)
        att = np.apply_along_axis(_softmax, 1, scores)
        z = att @ v
        h = x + z
        # tanh feed-forward: smooth everywhere, so finite-difference
        # gradient checks are well-posed
        u_pre = h @ layer.w1 + layer.b1
        u = np.tanh(u_pre)
        y = h + u @ layer.w2 + layer.b2
        layer_caches.append({"x": x, "q": q, "k": k, "v": v, "att": att,
                             "h": h, "u_pre": u_pre, "u": u})
        x = y
    return x, {"ids": ids, "layers": layer_caches}


def _encoder_backward(model: RelationModel, cache: dict, d_out: np.ndarray,
                      grads: dict[str, np.ndarray], config: RankerConfig) -> None:
    d = config.embed_dim
    dy = d_out
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        c = cache["layers"][i]
        du = dy @ layer.w2.T
        grads[f"layer{i}.w2"] += c["u"].T @ dy
        grads[f"layer{i}.b2"] += dy.sum(axis=0)
        du_pre = du * (1.0 - c["u"] ** 2)
        grads[f"layer{i}.w1"] += c["h"].T @ du_pre
        grads[f"layer{i}.b1"] += du_pre.sum(axis=0)
        dh = dy + du_pre @ layer.w1.T
        dx = dh.copy()
        dz = dh
        datt = dz @ c["v"].T
        dv = c["att"].T @ dz
        # row-wise softmax backward
        a = c["att"]
        dscores = a * (datt - (a * datt).sum(axis=1, keepdims=True))
        dq = dscores @ c["k"] / math.sqrt(d)
        dk = dscores.T @ c["q"] / math.sqrt(d)
        dx += dq @ layer.wq.T + dk @ layer.wk.T + dv @ layer.wv.T
        grads[f"layer{i}.wq"] += c["x"].T @ dq
        grads[f"layer{i}.wk"] += c["x"].T @ dk
        grads[f"layer{i}.wv"] += c["x"].T @ dv
        dy = dx
    for row, idx in enumerate(cache["ids"]):
        grads["emb"][idx] += dy[row]


def graph_attention(e: np.ndarray, graph: LinguisticGraph, model: RelationModel):
    """Recombine embeddings over graph neighborhoods (self included)."""
    d = e.shape[1]
    n = e.shape[0]
    e_hat = np.zeros_like(e)
    att_cache = []
    for i in range(n):
        nbrs = sorted(set(graph.neighbors(i)) | {i})
        logits = np.array([
            float(model.wa[:d] @ e[i] + model.wa[d:] @ e[j] + model.ba) for j in nbrs
        ])
        a = _softmax(logits)
        e_hat[i] = sum(a[idx] * e[j] for idx, j in enumerate(nbrs))
        att_cache.append({"nbrs": nbrs, "a": a})
    return e_hat, att_cache


def _graph_attention_backward(e: np.ndarray, att_cache: list, de_hat: np.ndarray,
                              model: RelationModel, grads: dict[str, np.ndarray]) -> np.ndarray:
    d = e.shape[1]
    de = np.zeros_like(e)
    for i, c in enumerate(att_cache):
        nbrs, a = c["nbrs"], c["a"]
        da = np.array([float(de_hat[i] @ e[j]) for j in nbrs])
        for idx, j in enumerate(nbrs):
            de[j] += a[idx] * de_hat[i]
        ds = a * (da - float(a @ da))
        for idx, j in enumerate(nbrs):
            grads["wa"][:d] += ds[idx] * e[i]
            grads["wa"][d:] += ds[idx] * e[j]
            grads["ba"] += ds[idx]
            de[i] += ds[idx] * model.wa[:d]
            de[j] += ds[idx] * model.wa[d:]
    return de


def _pool_indices(graph: LinguisticGraph, words: tuple[str, ...]) -> list[int]:
    wanted = set(words)
    return [n.index for n in graph.nodes if n.word in wanted]


def instance_forward(model: RelationModel, config: RankerConfig,
                     graph: LinguisticGraph, head: tuple[str, ...],
                     tail: tuple[str, ...]):
    """Forward pass for one (tuple, graph) instance; None when pooling is empty."""
    head_idx = _pool_indices(graph, head)
    tail_idx = _pool_indices(graph, tail)
    if not head_idx or not tail_idx:
        return None
    e, enc_cache = encode_tokens(graph, model, config)
    e_hat, att_cache = graph_attention(e, graph, model)
    d = config.embed_dim
    cat = np.concatenate([e, e_hat], axis=1)  # (n, 2d)
    o_head = cat[head_idx].mean(axis=0)
    o_tail = cat[tail_idx].mean(axis=0)
    o_fre = math.log1p(graph.freq)
    o_type = 1.0 if graph.gtype == "eventuality" else 0.0
    x = np.concatenate([o_head, o_tail, [o_fre, o_type]])
    z = float(model.wp @ x + model.bp)
    f = _sigmoid(z)
    return {
        "f": f, "z": z, "x": x, "e": e, "e_hat": e_hat,
        "enc_cache": enc_cache, "att_cache": att_cache,
        "head_idx": head_idx, "tail_idx": tail_idx, "d": d,
    }


def instance_backward(model: RelationModel, config: RankerConfig,
                      cache: dict, df: float, grads: dict[str, np.ndarray]) -> None:
    f = cache["f"]
    d = cache["d"]
    dz = df * f * (1.0 - f)
    grads["wp"] += dz * cache["x"]
    grads["bp"] += dz
    dx = dz * model.wp
    do_head, do_tail = dx[: 2 * d], dx[2 * d: 4 * d]
    de = np.zeros_like(cache["e"])
    de_hat = np.zeros_like(cache["e_hat"])
    m = len(cache["head_idx"])
    for i in cache["head_idx"]:
        de[i] += do_head[:d] / m
        de_hat[i] += do_head[d:] / m
    m = len(cache["tail_idx"])
    for i in cache["tail_idx"]:
        de[i] += do_tail[:d] / m
        de_hat[i] += do_tail[d:] / m
    de += _graph_attention_backward(cache["e"], cache["att_cache"], de_hat, model, grads)
    _encoder_backward(model, cache["enc_cache"], de, grads, config)


def predict_plausibility(model: RelationModel, config: RankerConfig,
                         graph: LinguisticGraph, head: tuple[str, ...],
                         tail: tuple[str, ...]) -> float | None:
    """Instance plausibility f in (0,1); None when the instance is skipped."""
    cache = instance_forward(model, config, graph, head, tail)
    if cache is None:
        log.warning("skipping instance: head/tail words not in graph %s", graph.id)
        return None
    return cache["f"]


def tuple_score(model: RelationModel, config: RankerConfig,
                graphs: list[LinguisticGraph], head: tuple[str, ...],
                tail: tuple[str, ...]) -> float:
    """Multi-instance score: mean instance plausibility over the support set."""
    vals = []
    for g in graphs:
        f = predict_plausibility(model, config, g, head, tail)
        if f is not None:
            vals.append(f)
    if not vals:
        log.warning("all instances skipped for tuple (%s, %s); scoring 0",
                    " ".join(head), " ".join(tail))
        return 0.0
    return sum(vals) / len(vals)


def _tuple_loss_and_grads(model: RelationModel, config: RankerConfig,
                          graphs: list[LinguisticGraph], example: AnnotatedExample,
                          grads: dict[str, np.ndarray]) -> float | None:
    caches = []
    for g in graphs:
        cache = instance_forward(model, config, g, example.head, example.tail)
        if cache is not None:
            caches.append(cache)
    if not caches:
        return None
    big_f = sum(c["f"] for c in caches) / len(caches)
    eps = 1e-12
    y = float(example.label)
    loss = -(y * math.log(max(big_f, eps)) + (1 - y) * math.log(max(1 - big_f, eps)))
    d_big_f = (big_f - y) / max(big_f * (1 - big_f), eps)
    df = d_big_f / len(caches)
    for cache in caches:
        instance_backward(model, config, cache, df, grads)
    return loss


def train(dataset: list[AnnotatedExample], corpus: GraphCorpus,
          config: RankerConfig,
          progress: bool = False) -> dict[str, RelationModel]:
    """Train one classifier per relation with per-tuple SGD updates.

    Deterministic given the config seed: relations are trained in sorted
    order, each with its own derived RNG stream, and the example order is a
    seeded shuffle per epoch.
    """
    config.validate()
    if not dataset:
        raise ValueError("dataset must be non-empty")
    missing = sorted({gid for ex in dataset for gid in ex.graph_ids if gid not in corpus})
    if missing:
        raise ValueError(f"annotation graph ids not in corpus: {', '.join(missing)}")

    by_relation: dict[str, list[AnnotatedExample]] = {}
    for ex in dataset:
        by_relation.setdefault(ex.relation, []).append(ex)

    models: dict[str, RelationModel] = {}
    for rel_idx, relation in enumerate(sorted(by_relation)):
        examples = by_relation[relation]
        rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, rel_idx]))
        graphs = [corpus.by_id(gid) for ex in examples for gid in ex.graph_ids]
        model = init_model(build_vocab(graphs), config, rng)
        for epoch in range(config.epochs):
            order = rng.permutation(len(examples))
            total = 0.0
            seen = 0
            for j in order:
                ex = examples[j]
                grads = model.zero_grads()
                loss = _tuple_loss_and_grads(
                    model, config, [corpus.by_id(gid) for gid in ex.graph_ids], ex, grads)
                if loss is None:
                    continue
                if not math.isfinite(loss):
                    raise FloatingPointError(
                        f"non-finite loss at relation={relation} epoch={epoch} "
                        f"example=({' '.join(ex.head)}, {' '.join(ex.tail)})")
                model.apply_grads(grads, config.learning_rate)
                total += loss
                seen += 1
            if progress and seen:
                print(f"[{relation}] epoch {epoch + 1}/{config.epochs} "
                      f"loss {total / seen:.6f}")
        models[relation] = model
    return models


def gradient_check(model: RelationModel, config: RankerConfig,
                   graphs: list[LinguisticGraph], example: AnnotatedExample,
                   step: float = 1e-4) -> float:
    """Max relative error of analytic vs central finite-difference gradients."""
    grads = model.zero_grads()
    loss = _tuple_loss_and_grads(model, config, graphs, example, grads)
    if loss is None:
        raise ValueError("example has no usable instances")

    def loss_only() -> float:
        tmp = model.zero_grads()
        val = _tuple_loss_and_grads(model, config, graphs, example, tmp)
        assert val is not None
        return val

    worst = 0.0
    for name, arr in model.param_items():
        flat = arr.reshape(-1) if arr.ndim else arr.reshape(1)
        gflat = grads[name].reshape(-1) if grads[name].ndim else grads[name].reshape(1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_only()
            flat[idx] = orig - step
            down = loss_only()
            flat[idx] = orig
            numeric = (up - down) / (2 * step)
            analytic = gflat[idx]
            scale = max(abs(numeric) + abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


def rank_knowledge(candidates: list[SupportSet], corpus: GraphCorpus,
                   models: dict[str, RelationModel], config: RankerConfig
                   ) -> list[tuple[SupportSet, float]]:
    """Score and sort candidates (score desc, then head, relation, tail)."""
    warned: set[str] = set()
    scored: list[tuple[SupportSet, float]] = []
    for cand in candidates:
        model = models.get(cand.relation)
        if model is None:
            if cand.relation not in warned:
                log.warning("no trained model for relation %r; scoring 0", cand.relation)
                warned.add(cand.relation)
            scored.append((cand, 0.0))
            continue
        graphs = [corpus.by_id(gid) for gid in cand.graph_ids]
        scored.append((cand, tuple_score(model, config, graphs, cand.head, cand.tail)))
    scored.sort(key=lambda item: (-item[1],) + item[0].identity)
    return scored


def top_slice(ranked: list, percent: float) -> list:
    if not 0 < percent <= 100:
        raise ValueError("percent must be in (0, 100]")
    if not ranked:
        return []
    return ranked[: math.ceil(len(ranked) * percent / 100.0)]


# ---------------------------------------------------------------------------
# Serialization


def read_annotations(path: str | Path) -> list[AnnotatedExample]:
    """Annotation TSV: head, relation, tail, label(0|1), graph_ids (comma-joined)."""
    out: list[AnnotatedExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            head, relation, tail, label, gids = fields
            if label not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            graph_ids = tuple(g for g in gids.split(",") if g)
            if not graph_ids:
                raise ValueError(f"{path}:{lineno}: empty graph id list")
            out.append(AnnotatedExample(
                head=tuple(head.split()), relation=relation, tail=tuple(tail.split()),
                label=int(label), graph_ids=graph_ids,
            ))
    return out


def save_checkpoint(path: str | Path, models: dict[str, RelationModel],
                    config: RankerConfig) -> None:
    doc = {
        "version": 1,
        "config": asdict(config),
        "relations": {
            relation: {
                "vocab": model.vocab,
                "embeddings": model.emb.tolist(),
                "encoder": [
                    {name: getattr(layer, name).tolist()
                     for name in ("wq", "wk", "wv", "w1", "b1", "w2", "b2")}
                    for layer in model.layers
                ],
                "nn_a": {"w": model.wa.tolist(), "b": float(model.ba)},
                "nn_p": {"w": model.wp.tolist(), "b": float(model.bp)},
            }
            for relation, model in models.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path: str | Path) -> tuple[dict[str, RelationModel], RankerConfig]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version: {doc.get('version')!r}")
    config = RankerConfig(**doc["config"])
    models: dict[str, RelationModel] = {}
    for relation, rec in doc["relations"].items():
        layers = [
            EncoderLayer(**{name: np.array(layer[name]) for name in
                            ("wq", "wk", "wv", "w1", "b1", "w2", "b2")})
            for layer in rec["encoder"]
        ]
        models[relation] = RelationModel(
            vocab=rec["vocab"],
            emb=np.array(rec["embeddings"]),
            layers=layers,
            wa=np.array(rec["nn_a"]["w"]),
            ba=np.array(rec["nn_a"]["b"]),
            wp=np.array(rec["nn_p"]["w"]),
            bp=np.array(rec["nn_p"]["b"]),
        )
    return models, config
