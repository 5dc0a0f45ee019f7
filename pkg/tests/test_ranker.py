import json
import math
import random

import numpy as np
import pytest

from tuplemine.corpus import GraphCorpus, GraphEdge, GraphNode, LinguisticGraph
from tuplemine.matching import SupportSet
from tuplemine.ranker import (
    AnnotatedExample, RankerConfig, build_vocab, encode_tokens,
    gradient_check, graph_attention, init_model, load_checkpoint,
    predict_plausibility, rank_knowledge, save_checkpoint, top_slice,
    train, tuple_score,
)

import oracles
from conftest import build_graph, random_connected_graph


def tiny_model(graphs, d=4, layers=1, seed=0):
    cfg = RankerConfig(embed_dim=d, encoder_layers=layers, epochs=1, rng_seed=seed)
    rng = np.random.default_rng(seed)
    return init_model(build_vocab(graphs), cfg, rng), cfg


class TestEncodeTokens:
    def test_zero_layers_returns_embedding_rows(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph], layers=0)
        e, _ = encode_tokens(case_study_graph, model, cfg)
        ids = [model.vocab[w] for w in case_study_graph.words]
        assert np.allclose(e, model.emb[ids])

    def test_unknown_words_share_row(self):
        g = build_graph(["a", "b", "c"], [(1, 0, "x"), (1, 2, "y")])
        other = build_graph(["p", "q", "r"], [(1, 0, "x"), (1, 2, "y")])
        model, cfg = tiny_model([g], layers=0)
        e, _ = encode_tokens(other, model, cfg)
        assert np.allclose(e[0], e[1]) and np.allclose(e[1], e[2])

    def test_matches_independent_reimplementation(self):
        g = build_graph(["a", "b"], [(0, 1, "x")])
        model, cfg = tiny_model([g], d=2, layers=1, seed=3)
        e, _ = encode_tokens(g, model, cfg)
        ids = [model.vocab[w] for w in g.words]
        expected = oracles.encoder_forward(model.emb[ids].copy(), model.layers, 2)
        assert np.allclose(e, expected, atol=1e-12)


class TestGraphAttention:
    def test_zero_params_uniform_attention(self):
        g = build_graph(["a", "b", "c"], [(1, 0, "x"), (1, 2, "y")])
        model, cfg = tiny_model([g], layers=0)
        model.wa[:] = 0.0
        e, _ = encode_tokens(g, model, cfg)
        e_hat, _ = graph_attention(e, g, model)
        # node 0 neighborhood = {0, 1}: plain mean
        assert np.allclose(e_hat[0], (e[0] + e[1]) / 2)
        assert np.allclose(e_hat[1], e.mean(axis=0))

    def test_rows_sum_to_one(self):
        rng = random.Random(17)
        for trial in range(20):
            g = random_connected_graph(rng, gid=f"a{trial}")
            model, cfg = tiny_model([g], seed=trial)
            e, _ = encode_tokens(g, model, cfg)
            _, att_cache = graph_attention(e, g, model)
            for c in att_cache:
                assert c["a"].sum() == pytest.approx(1.0, abs=1e-6)

    def test_hand_computed_path_graph(self):
        g = build_graph(["a", "b", "c"], [(0, 1, "x"), (1, 2, "y")])
        model, cfg = tiny_model([g], d=2, layers=0, seed=5)
        e, _ = encode_tokens(g, model, cfg)
        e_hat, _ = graph_attention(e, g, model)
        expected = oracles.graph_attention_forward(e, g, model.wa, model.ba)
        assert np.allclose(e_hat, expected, atol=1e-12)


class TestPredict:
    def test_zero_head_gives_half(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph])
        model.wp[:] = 0.0
        model.bp *= 0.0
        f = predict_plausibility(model, cfg, case_study_graph, ("human",), ("have",))
        assert f == pytest.approx(0.5)

    def test_frequency_feature(self):
        g = build_graph(["a", "b"], [(0, 1, "x")], freq=1)
        assert math.log1p(g.freq) == pytest.approx(math.log(2))

    def test_matches_forward_oracle(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph], d=4, layers=1, seed=11)
        f = predict_plausibility(model, cfg, case_study_graph, ("human",), ("have",))
        expected = oracles.instance_forward(model, cfg, case_study_graph,
                                            ("human",), ("have",))
        assert f == pytest.approx(expected, abs=1e-12)

    def test_skip_when_words_absent(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph])
        assert predict_plausibility(model, cfg, case_study_graph,
                                    ("zebra",), ("have",)) is None

    def test_output_in_open_interval(self):
        rng = random.Random(23)
        for trial in range(10):
            g = random_connected_graph(rng, gid=f"p{trial}")
            model, cfg = tiny_model([g], seed=trial)
            f = predict_plausibility(model, cfg, g, (g.nodes[0].word,),
                                     (g.nodes[-1].word,))
            assert 0.0 < f < 1.0

    def test_permutation_equivariance(self):
        g = build_graph(["a", "b", "c", "d"],
                        [(1, 0, "x"), (1, 2, "y"), (2, 3, "z")], freq=4)
        perm = [2, 0, 3, 1]  # new index of old node i
        g2 = LinguisticGraph(
            id="perm",
            nodes=tuple(sorted(
                (GraphNode(perm[n.index], n.word) for n in g.nodes),
                key=lambda n: n.index)),
            edges=tuple(GraphEdge(perm[e.src], perm[e.dst], e.label) for e in g.edges),
            freq=4,
        )
        g2.validate()
        model, cfg = tiny_model([g], d=4, layers=1, seed=2)
        f1 = predict_plausibility(model, cfg, g, ("a",), ("c", "d"))
        f2 = predict_plausibility(model, cfg, g2, ("a",), ("c", "d"))
        assert f1 == pytest.approx(f2, abs=1e-12)


class TestTupleScore:
    def test_single_support(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph])
        f = predict_plausibility(model, cfg, case_study_graph, ("human",), ("have",))
        big_f = tuple_score(model, cfg, [case_study_graph], ("human",), ("have",))
        assert big_f == pytest.approx(f)

    def test_duplication_invariance(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph])
        one = tuple_score(model, cfg, [case_study_graph], ("human",), ("have",))
        five = tuple_score(model, cfg, [case_study_graph] * 5, ("human",), ("have",))
        assert abs(one - five) < 1e-9

    def test_all_skipped_scores_zero(self, case_study_graph):
        model, cfg = tiny_model([case_study_graph])
        assert tuple_score(model, cfg, [case_study_graph], ("zebra",), ("lion",)) == 0.0


class TestGradients:
    def test_random_small_instances(self):
        rng = random.Random(41)
        for trial in range(20):
            g = random_connected_graph(rng, n_nodes=rng.randint(2, 4), gid=f"gc{trial}")
            d = rng.choice([2, 4, 8])
            layers = rng.choice([0, 1])
            cfg = RankerConfig(embed_dim=d, encoder_layers=layers, epochs=1,
                               rng_seed=trial)
            model = init_model(build_vocab([g]),
                               cfg, np.random.default_rng(trial))
            ex = AnnotatedExample(
                head=(g.nodes[0].word,), relation="R",
                tail=(g.nodes[len(g.nodes) - 1].word,),
                label=trial % 2, graph_ids=(g.id,))
            err = gradient_check(model, cfg, [g], ex)
            assert err < 1e-3, f"trial {trial}: {err}"

    def test_zero_head_bias_gradient_is_f_minus_y(self, case_study_graph):
        # with the chain rule through BCE, dL/d(bp) = f - y
        model, cfg = tiny_model([case_study_graph], d=4, layers=0, seed=1)
        model.wp[:] = 0.0
        model.bp *= 0.0
        from tuplemine.ranker import _tuple_loss_and_grads
        grads = model.zero_grads()
        ex = AnnotatedExample(("human",), "R", ("have",), 1, ("cs",))
        _tuple_loss_and_grads(model, cfg, [case_study_graph], ex, grads)
        assert float(grads["bp"]) == pytest.approx(0.5 - 1.0, abs=1e-6)


class TestTrain:
    def _separable_dataset(self, n=200, supports_per=1):
        graphs = []
        examples = []
        for i in range(n):
            label = i % 2
            marker = "zz" if label == 1 else "qq"
            gid = f"sep{i}"
            graphs.append(build_graph(
                [f"h{i}", f"t{i}", marker],
                [(1, 0, "nsubj"), (1, 2, "dobj")],
                gid=gid, freq=1 + i % 3,
            ))
            examples.append(AnnotatedExample(
                head=(f"h{i}",), relation="rel", tail=(f"t{i}",),
                label=label, graph_ids=(gid,)))
        return GraphCorpus(tuple(graphs)), examples

    def test_single_positive_fits(self, case_study_graph):
        corpus = GraphCorpus((case_study_graph,))
        cfg = RankerConfig(embed_dim=4, encoder_layers=0, epochs=100, rng_seed=0)
        ex = AnnotatedExample(("human",), "R", ("have",), 1, ("cs",))
        models = train([ex], corpus, cfg)
        f = tuple_score(models["R"], cfg, [case_study_graph], ("human",), ("have",))
        assert f > 0.5

    def test_separable_fixture_reaches_95_percent(self):
        corpus, examples = self._separable_dataset()
        cfg = RankerConfig(embed_dim=16, encoder_layers=1, epochs=20,
                           learning_rate=0.5, rng_seed=3)
        models = train(examples, corpus, cfg)
        model = models["rel"]
        correct = 0
        for ex in examples:
            f = tuple_score(model, cfg, [corpus.by_id(g) for g in ex.graph_ids],
                            ex.head, ex.tail)
            correct += int((f > 0.5) == bool(ex.label))
        assert correct / len(examples) >= 0.95

    def test_seeded_determinism(self, case_study_graph):
        corpus = GraphCorpus((case_study_graph,))
        cfg = RankerConfig(embed_dim=4, encoder_layers=1, epochs=5, rng_seed=9)
        ex = AnnotatedExample(("human",), "R", ("have",), 1, ("cs",))
        m1 = train([ex], corpus, cfg)
        m2 = train([ex], corpus, cfg)
        for (n1, a1), (n2, a2) in zip(m1["R"].param_items(), m2["R"].param_items()):
            assert n1 == n2
            assert np.array_equal(a1, a2)

    def test_unresolvable_graph_id_aborts(self, case_study_graph):
        corpus = GraphCorpus((case_study_graph,))
        cfg = RankerConfig(embed_dim=4, epochs=1)
        ex = AnnotatedExample(("human",), "R", ("have",), 1, ("nope",))
        with pytest.raises(ValueError, match="nope"):
            train([ex], corpus, cfg)


class TestRankKnowledge:
    def _supports(self, corpus, items):
        return [
            SupportSet(head=h, relation=r, tail=t,
                       supports={(gid, "k") for gid in gids})
            for h, r, t, gids in items
        ]

    def test_top_slice_arithmetic(self):
        assert len(top_slice(list(range(10)), 10.0)) == 1
        assert len(top_slice(list(range(10)), 100.0)) == 10
        assert len(top_slice(list(range(3)), 1.0)) == 1

    def test_tie_break_order(self, case_study_graph):
        corpus = GraphCorpus((case_study_graph,))
        models = {}  # untrained -> all score 0
        cfg = RankerConfig(embed_dim=4)
        supports = self._supports(corpus, [
            (("b",), "R", ("x",), ["cs"]),
            (("a",), "R", ("x",), ["cs"]),
        ])
        ranked = rank_knowledge(supports, corpus, models, cfg)
        assert [s.head for s, _ in ranked] == [("a",), ("b",)]
        assert all(score == 0.0 for _, score in ranked)

    def test_marker_tuple_ranks_first(self):
        trainer = TestTrain()
        corpus, examples = trainer._separable_dataset()
        cfg = RankerConfig(embed_dim=16, encoder_layers=1, epochs=20,
                           learning_rate=0.5, rng_seed=3)
        models = train(examples, corpus, cfg)
        supports = self._supports(corpus, [
            (("h0",), "rel", ("t0",), ["sep0"]),    # qq graph
            (("h1",), "rel", ("t1",), ["sep1"]),    # zz graph
        ])
        ranked = rank_knowledge(supports, corpus, models, cfg)
        assert ranked[0][0].head == ("h1",)


class TestCheckpoint:
    def test_round_trip(self, case_study_graph, tmp_path):
        corpus = GraphCorpus((case_study_graph,))
        cfg = RankerConfig(embed_dim=4, encoder_layers=1, epochs=2, rng_seed=5)
        ex = AnnotatedExample(("human",), "R", ("have",), 1, ("cs",))
        models = train([ex], corpus, cfg)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, models, cfg)
        loaded, cfg2 = load_checkpoint(path)
        assert cfg2 == cfg
        f1 = tuple_score(models["R"], cfg, [case_study_graph], ("human",), ("have",))
        f2 = tuple_score(loaded["R"], cfg2, [case_study_graph], ("human",), ("have",))
        assert f1 == pytest.approx(f2, abs=1e-15)

    def test_byte_identical_given_seed(self, case_study_graph, tmp_path):
        corpus = GraphCorpus((case_study_graph,))
        cfg = RankerConfig(embed_dim=4, encoder_layers=1, epochs=3, rng_seed=5)
        ex = AnnotatedExample(("human",), "R", ("have",), 1, ("cs",))
        paths = []
        for i in range(2):
            p = tmp_path / f"ckpt{i}.json"
            save_checkpoint(p, train([ex], corpus, cfg), cfg)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_version_check(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"version": 99}))
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(p)
