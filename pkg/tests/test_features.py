import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gdlink.errors import CorruptEmbedding, DimensionMismatch, MissingEmbedding
from gdlink.features import (
    RawEmbedding,
    align_features,
    load_embeddings,
    synth_embeddings,
    write_embeddings,
)
from gdlink.graph import HeteroGraph, NodeKind, RelationKind
from gdlink.synth import make_planted_dataset
from helpers import random_hetero_graph


def small_graph():
    g = HeteroGraph()
    g.add_node("g0", NodeKind.GENE)
    g.add_node("d0", NodeKind.DISEASE)
    g.add_node("g1", NodeKind.GENE)
    return g.finalize()


def raw(gid, kind, values):
    return RawEmbedding(gid, kind, np.asarray(values, dtype=np.float64))


class TestLoading:
    def test_reads_rows(self, tmp_path):
        path = tmp_path / "genes.tsv"
        path.write_text("g0\t1.0,2.0\ng1\t3.0,4.0\n")
        raws = load_embeddings(path, NodeKind.GENE, expected=2)
        assert len(raws) == 2
        assert raws[0].external_id == "g0"
        assert np.array_equal(raws[1].values, [3.0, 4.0])

    def test_wrong_width(self, tmp_path):
        path = tmp_path / "genes.tsv"
        path.write_text("g0\t1.0,2.0,3.0\n")
        with pytest.raises(DimensionMismatch) as err:
            load_embeddings(path, NodeKind.GENE, expected=2)
        assert err.value.expected == 2 and err.value.got == 3

    def test_non_numeric_token(self, tmp_path):
        path = tmp_path / "genes.tsv"
        path.write_text("g0\t1.0,oops\n")
        with pytest.raises(CorruptEmbedding):
            load_embeddings(path, NodeKind.GENE, expected=2)

    def test_non_finite_value(self, tmp_path):
        path = tmp_path / "genes.tsv"
        path.write_text("g0\t1.0,nan\n")
        with pytest.raises(CorruptEmbedding):
            load_embeddings(path, NodeKind.GENE, expected=2)

    def test_whitespace_separated_values(self, tmp_path):
        path = tmp_path / "genes.tsv"
        path.write_text("g0\t1.0 2.0\n")
        raws = load_embeddings(path, NodeKind.GENE, expected=2, whitespace_values=True)
        assert np.array_equal(raws[0].values, [1.0, 2.0])

    def test_write_read_roundtrip(self, tmp_path):
        raws = [raw("g0", NodeKind.GENE, [0.125, -3.5, 1e-8])]
        path = tmp_path / "out.tsv"
        write_embeddings(path, raws)
        back = load_embeddings(path, NodeKind.GENE, expected=3)
        assert np.array_equal(back[0].values, raws[0].values)


class TestAlignment:
    def test_default_mode_gene_suffix_padding(self):
        g = small_graph()
        gvec = np.arange(1.0, 5.0)
        fm = align_features(
            g,
            [raw("g0", NodeKind.GENE, gvec), raw("d0", NodeKind.DISEASE, [9.0, 8.0, 7.0]),
             raw("g1", NodeKind.GENE, gvec * 2)],
            gene_dim=4,
            disease_dim=3,
        )
        assert fm.width == 7
        assert np.array_equal(fm.matrix[0], [1, 2, 3, 4, 0, 0, 0])

    def test_default_mode_disease_prefix_padding(self):
        g = small_graph()
        fm = align_features(
            g,
            [raw("g0", NodeKind.GENE, np.ones(4)), raw("d0", NodeKind.DISEASE, [9.0, 8.0, 7.0]),
             raw("g1", NodeKind.GENE, np.ones(4))],
            gene_dim=4,
            disease_dim=3,
        )
        assert np.array_equal(fm.matrix[1], [0, 0, 0, 0, 9, 8, 7])

    def test_ablation_mode_disease_suffix_padding(self):
        g = small_graph()
        fm = align_features(
            g,
            [raw("g0", NodeKind.GENE, np.ones(4)), raw("d0", NodeKind.DISEASE, [9.0, 8.0, 7.0]),
             raw("g1", NodeKind.GENE, np.full(4, 2.0))],
            mode="ablation",
            gene_dim=4,
            disease_dim=3,
        )
        assert fm.width == 4
        assert np.array_equal(fm.matrix[1], [9, 8, 7, 0])
        assert np.array_equal(fm.matrix[0], np.ones(4))

    def test_missing_error_policy(self):
        g = small_graph()
        with pytest.raises(MissingEmbedding):
            align_features(
                g, [raw("g0", NodeKind.GENE, np.ones(4))], gene_dim=4, disease_dim=3
            )

    def test_missing_zero_fill_policy(self):
        g = small_graph()
        fm = align_features(
            g,
            [raw("g0", NodeKind.GENE, np.ones(4))],
            missing_policy="zero_fill",
            gene_dim=4,
            disease_dim=3,
        )
        assert fm.missing_count == 2
        assert np.array_equal(fm.matrix[1], np.zeros(7))

    def test_unknown_embedding_id_skipped(self):
        g = small_graph()
        fm = align_features(
            g,
            [
                raw("g0", NodeKind.GENE, np.ones(4)),
                raw("d0", NodeKind.DISEASE, np.ones(3)),
                raw("g1", NodeKind.GENE, np.ones(4)),
                raw("nope", NodeKind.GENE, np.ones(4)),
            ],
            gene_dim=4,
            disease_dim=3,
        )
        assert fm.matrix.shape == (3, 7)

    def test_row_order_follows_node_index_not_file_order(self):
        g = small_graph()
        fm = align_features(
            g,
            [
                raw("g1", NodeKind.GENE, np.full(4, 5.0)),
                raw("d0", NodeKind.DISEASE, np.ones(3)),
                raw("g0", NodeKind.GENE, np.full(4, 3.0)),
            ],
            gene_dim=4,
            disease_dim=3,
        )
        assert fm.matrix[0, 0] == 3.0
        assert fm.matrix[2, 0] == 5.0

    def test_idempotent_content(self):
        g = small_graph()
        raws = [
            raw("g0", NodeKind.GENE, np.random.default_rng(0).random(4)),
            raw("d0", NodeKind.DISEASE, np.random.default_rng(1).random(3)),
            raw("g1", NodeKind.GENE, np.random.default_rng(2).random(4)),
        ]
        a = align_features(g, raws, gene_dim=4, disease_dim=3)
        b = align_features(g, raws, gene_dim=4, disease_dim=3)
        assert np.array_equal(a.matrix, b.matrix)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**16), gene_dim=st.integers(1, 8), disease_dim=st.integers(1, 8))
    def test_gene_disease_raw_dot_product_is_exactly_zero(self, seed, gene_dim, disease_dim):
        rng = np.random.default_rng(seed)
        g = random_hetero_graph(rng, 3, 3, edge_prob=0.2)
        raws = [
            RawEmbedding(
                g.id_of(i),
                g.kind_of(i),
                rng.standard_normal(gene_dim if g.kind_of(i) is NodeKind.GENE else disease_dim),
            )
            for i in range(g.node_count)
        ]
        fm = align_features(g, raws, gene_dim=gene_dim, disease_dim=disease_dim)
        genes = g.indices_of_kind(NodeKind.GENE)
        diseases = g.indices_of_kind(NodeKind.DISEASE)
        dots = fm.matrix[genes] @ fm.matrix[diseases].T
        assert np.all(dots == 0.0)


class TestSynthEmbeddings:
    def test_same_seed_bit_identical(self):
        g = random_hetero_graph(np.random.default_rng(0), 4, 4)
        a = synth_embeddings(g, seed=42, gene_dim=16, disease_dim=12)
        b = synth_embeddings(g, seed=42, gene_dim=16, disease_dim=12)
        for x, y in zip(a, b):
            assert x.external_id == y.external_id
            assert np.array_equal(x.values, y.values)

    def test_widths_match_kind(self):
        g = small_graph()
        raws = synth_embeddings(g, seed=1, gene_dim=10, disease_dim=6)
        for r in raws:
            assert r.values.shape[0] == (10 if r.kind is NodeKind.GENE else 6)

    def test_unit_norm(self):
        g = small_graph()
        for r in synth_embeddings(g, seed=1, gene_dim=10, disease_dim=6):
            assert np.linalg.norm(r.values) == pytest.approx(1.0, abs=1e-12)

    def test_planted_community_cosine_similarity(self):
        ds = make_planted_dataset(n_genes=60, n_diseases=60, n_gd=200, n_gg=100, n_dd=100, seed=3)
        raws = synth_embeddings(ds.graph, seed=4, planted=ds.communities)
        vectors = {r.external_id: r.values for r in raws}
        rng = np.random.default_rng(5)
        genes = ds.graph.indices_of_kind(NodeKind.GENE)
        by_comm = {}
        for g_idx in genes:
            by_comm.setdefault(int(ds.communities[g_idx]), []).append(int(g_idx))
        sims = []
        while len(sims) < 100:
            comm = int(rng.choice([c for c, members in by_comm.items() if len(members) >= 2]))
            i, j = rng.choice(by_comm[comm], size=2, replace=False)
            sims.append(
                float(vectors[ds.graph.id_of(i)] @ vectors[ds.graph.id_of(j)])
            )
        assert np.mean(sims) > 0.5
        assert np.min(sims) > 0.2
