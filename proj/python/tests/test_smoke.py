# python/tests/test_smoke.py

# Copyright 2026  gvec authors

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the python module: every bound operation is driven
once end to end; the numerical depth lives in the C++ suites."""

import numpy as np
import pytest

import gvec


def small_set(count=6, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((count, dim)).astype(np.float32)
    ids = [f"utt{i}" for i in range(count)]
    labels = {f"utt{i}": f"spk{i % 2}" for i in range(count)}
    return gvec.EmbeddingSet(ids, vectors, labels)


def test_embedding_container_and_formats(tmp_path):
    s = small_set()
    assert len(s) == 6 and s.dim == 4
    assert s.ids[0] == "utt0" and s.labels["utt3"] == "spk1"

    binary = tmp_path / "s.gvec"
    gvec.write_embeddings(str(binary), s)
    r = gvec.read_embeddings(str(binary))
    assert r.ids == s.ids
    np.testing.assert_array_equal(np.asarray(r.vectors), np.asarray(s.vectors))

    text = tmp_path / "s.txt"
    gvec.write_embeddings(str(text), s, text=True)
    assert gvec.read_embeddings(str(text), text=True).ids == s.ids

    labels_path = tmp_path / "s.labels"
    gvec.write_labels(str(labels_path), s.labels)
    assert gvec.read_labels(str(labels_path)) == s.labels

    with pytest.raises(RuntimeError):
        gvec.EmbeddingSet(["a"], np.zeros((2, 3), dtype=np.float32))


def test_preprocessing_and_plda(tmp_path):
    dev, _, _ = gvec.generate_synth(
        n_speakers=8, per_speaker=8, dim=10, within_std=0.5, seed=4
    )
    centered = gvec.center(dev)
    assert np.abs(gvec.mean_vector(centered)).max() < 1e-6
    normed = gvec.length_normalize(centered)
    norms = np.linalg.norm(np.asarray(normed.vectors), axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    lda = gvec.fit_lda(dev, 5)
    assert (lda.dim_in, lda.dim_out) == (10, 5)
    projected = gvec.apply_lda(lda, dev)
    assert projected.dim == 5 and projected.labels == dev.labels
    lda.save(str(tmp_path / "t.glda"))
    reloaded = gvec.LdaTransform.load(str(tmp_path / "t.glda"))
    np.testing.assert_array_equal(
        np.asarray(reloaded.projection), np.asarray(lda.projection)
    )

    plda = gvec.fit_plda(dev, 4, n_iters=10)
    history = list(plda.loglik_history)
    assert len(history) == 11
    assert all(b >= a - 1e-8 for a, b in zip(history, history[1:]))
    plda.save(str(tmp_path / "m.gpld"))
    reloaded = gvec.PldaModel.load(str(tmp_path / "m.gpld"))
    x = np.asarray(dev.vectors[0], dtype=np.float64)
    y = np.asarray(dev.vectors[1], dtype=np.float64)
    assert gvec.plda_llr(reloaded, x, y) == pytest.approx(
        gvec.plda_llr(plda, x, y)
    )
    # same-speaker pairs should out-score cross-speaker pairs on average
    sim = gvec.plda_similarity(plda, dev)
    same = [
        sim[i, j]
        for i in range(len(dev))
        for j in range(i + 1, len(dev))
        if dev.labels[dev.ids[i]] == dev.labels[dev.ids[j]]
    ]
    diff = [
        sim[i, j]
        for i in range(len(dev))
        for j in range(i + 1, len(dev))
        if dev.labels[dev.ids[i]] != dev.labels[dev.ids[j]]
    ]
    assert np.mean(same) > np.mean(diff)


def test_graph_construction(tmp_path):
    s = small_set(count=10, dim=6, seed=1)
    sim = gvec.cosine_similarity(s)
    assert sim.shape == (10, 10)
    np.testing.assert_allclose(np.diag(sim), 1.0, atol=1e-6)

    g = gvec.build_graph_threshold(sim, 0.1)
    assert g.num_nodes == 10
    assert all(i < j for i, j in g.edges)
    assert all(sim[i, j] > 0.1 for i, j in g.edges)

    k = gvec.build_graph_top_k(sim, 3)
    assert k.num_nodes == 10 and len(k.edges) >= 1

    path = tmp_path / "g.txt"
    gvec.write_graph(str(path), g)
    r = gvec.read_graph(str(path))
    assert r.num_nodes == g.num_nodes and r.edges == g.edges

    with pytest.raises(RuntimeError):
        gvec.Graph(3, [(2, 1)])  # edges must satisfy i < j


def test_training_and_extraction(tmp_path):
    dev, enroll, test = gvec.generate_synth(
        n_speakers=6, per_speaker=10, dim=12, within_std=0.4, seed=9
    )
    nodes_ids = dev.ids + enroll.ids + test.ids
    nodes_vecs = np.vstack(
        [np.asarray(x.vectors) for x in (dev, enroll, test)]
    )
    nodes = gvec.EmbeddingSet(nodes_ids, nodes_vecs.astype(np.float32))

    speakers = sorted({dev.labels[i] for i in dev.ids})
    class_of = {s: c for c, s in enumerate(speakers)}
    labels = [class_of.get(dev.labels.get(i, ""), -1) for i in nodes_ids]
    mask = [i for i, c in enumerate(labels) if c >= 0]

    graph = gvec.build_graph_threshold(gvec.cosine_similarity(nodes), 0.3)
    model, history = gvec.train_gnn(
        graph,
        nodes,
        labels,
        mask,
        variant="gat",
        hidden_dim=16,
        gvec_dim=8,
        heads=2,
        epochs=40,
        learning_rate=0.01,
        seed=3,
    )
    assert model.variant == "gat" and model.gvec_dim == 8
    assert len(history) == 40
    assert history[-1] < history[0]  # training moves the masked loss

    gvectors = model.extract(graph, nodes)
    assert gvectors.dim == 8 and gvectors.ids == nodes_ids

    path = tmp_path / "model.gnnm"
    model.save(str(path))
    reloaded = gvec.load_gnn_model(str(path))
    again = reloaded.extract(graph, nodes)
    np.testing.assert_array_equal(
        np.asarray(again.vectors), np.asarray(gvectors.vectors)
    )

    with pytest.raises(ValueError):
        gvec.train_gnn(graph, nodes, labels, mask, variant="no_such_gnn")


def test_metrics():
    # perfectly separated scores
    assert gvec.compute_eer([0.9, 0.8], [0.1, 0.2]) == 0.0
    # fully swapped scores
    assert gvec.compute_eer([0.1, 0.2], [0.9, 0.8]) == 100.0
    # the tie witness where the two conventions differ
    targets, nontargets = [0.5, 0.9], [0.1, 0.5]
    assert gvec.compute_eer(targets, nontargets) == pytest.approx(25.0)
    assert gvec.compute_eer(
        targets, nontargets, convention="max_rate"
    ) == pytest.approx(50.0)

    dcf = gvec.compute_min_dcf([0.9, 0.8], [0.1, 0.2])
    assert dcf == 0.0
    raw = gvec.compute_min_dcf(targets, nontargets, normalize=False)
    norm = gvec.compute_min_dcf(targets, nontargets, normalize=True)
    assert norm == pytest.approx(100.0 * raw)

    p_fa, p_miss = gvec.det_curve(targets, nontargets)
    assert (p_fa[0], p_miss[0]) == (1.0, 0.0)
    assert (p_fa[-1], p_miss[-1]) == (0.0, 1.0)

    with pytest.raises(ValueError):
        gvec.compute_eer(targets, nontargets, convention="median")
    with pytest.raises(RuntimeError):
        gvec.compute_eer([], [0.1])


def test_end_to_end_verification():
    dev, enroll, test = gvec.generate_synth(
        n_speakers=10, per_speaker=12, dim=16, within_std=2.0, seed=11
    )
    nodes_ids = dev.ids + enroll.ids + test.ids
    nodes_vecs = np.vstack(
        [np.asarray(x.vectors) for x in (dev, enroll, test)]
    ).astype(np.float32)
    nodes = gvec.EmbeddingSet(nodes_ids, nodes_vecs)

    speakers = sorted({dev.labels[i] for i in dev.ids})
    class_of = {s: c for c, s in enumerate(speakers)}
    labels = [class_of.get(dev.labels.get(i, ""), -1) for i in nodes_ids]
    mask = [i for i, c in enumerate(labels) if c >= 0]

    graph = gvec.build_graph_threshold(gvec.cosine_similarity(nodes), 0.2)
    model, _ = gvec.train_gnn(
        graph,
        nodes,
        labels,
        mask,
        hidden_dim=32,
        gvec_dim=16,
        heads=2,
        epochs=60,
        learning_rate=0.01,
        seed=5,
    )
    gv = model.extract(graph, nodes)
    by_id = {i: np.asarray(gv.vectors)[k] for k, i in enumerate(gv.ids)}

    models = gvec.enroll_average(
        gvec.EmbeddingSet(
            enroll.ids,
            np.stack([by_id[i] for i in enroll.ids]).astype(np.float32),
            enroll.labels,
        )
    )
    model_vec = {i: np.asarray(models.vectors)[k] for k, i in enumerate(models.ids)}

    def cosine(a, b):
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    target_scores, nontarget_scores = [], []
    for test_id in test.ids:
        for model_id in models.ids:
            score = cosine(model_vec[model_id], by_id[test_id])
            if test.labels[test_id] == model_id:
                target_scores.append(score)
            else:
                nontarget_scores.append(score)

    eer = gvec.compute_eer(target_scores, nontarget_scores)
    assert 0.0 <= eer < 50.0  # far better than chance on a noisy regime
