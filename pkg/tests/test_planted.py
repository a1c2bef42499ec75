import math
import warnings

import numpy as np
import pytest

from strongtie.planted import (
    DOUBLE,
    InvalidConfigError,
    PlantedConfig,
    _pairs_from_index,
    brute_force_edge_motifs,
    community_sizes,
    edge_motif_arrays,
    edge_motif_counts,
    gen_double,
    gen_single,
    generate,
    max_cross_intersection,
    prob_square_within,
    prob_triangle_within,
    square_gap,
    verify_expectations,
)
from strongtie.graph import from_edges

from conftest import random_layered


def test_defaults():
    cfg = PlantedConfig(n=4000, c=30, p=0.85, q=1.0)
    assert cfg.r == pytest.approx(math.log(4000) / 4000)
    assert cfg.communities == 134
    assert square_gap(cfg) == pytest.approx(3.3636, abs=1e-3)


@pytest.mark.parametrize(
    "changes",
    [dict(p=1.5), dict(q=-1.0), dict(r=2.0), dict(model="triple"), dict(c=1.0, q=2.0, p=1.0), dict(n=0)],
)
def test_invalid_configs(changes):
    with pytest.raises(InvalidConfigError):
        PlantedConfig(n=100, c=10, p=0.5, q=1.0).with_(**changes).validate()


def test_pairs_from_index_enumerates_upper_triangle():
    n = 7
    k = np.arange(n * (n - 1) // 2)
    i, j = _pairs_from_index(k, n)
    iu, ju = np.triu_indices(n, 1)
    assert np.array_equal(i, iu) and np.array_equal(j, ju)


def test_generation_is_deterministic():
    cfg = PlantedConfig(n=500, c=20, p=0.8, q=1.0, seed=3)
    a, b = gen_single(cfg), gen_single(cfg)
    assert np.array_equal(a.graph.indices, b.graph.indices)
    assert np.array_equal(a.graph.strong, b.graph.strong)
    c = gen_single(cfg.with_(seed=4))
    assert not np.array_equal(a.graph.indices, c.graph.indices) or not np.array_equal(
        a.memberships, c.memberships
    )


def test_strong_edges_are_exactly_within_community_edges():
    pg = gen_single(PlantedConfig(n=600, c=20, p=0.9, q=1.2, seed=1))
    edges, flags = pg.graph.edge_table()
    shared = pg.shared_types(edges[:, 0], edges[:, 1])
    assert np.array_equal(flags, shared >= 1)


def test_double_model_memberships():
    pg = gen_double(PlantedConfig(n=600, c=20, p=0.9, q=1.0, model=DOUBLE, seed=2))
    assert pg.memberships.shape == (600, 2)
    assert community_sizes(pg).sum() == 1200
    assert max_cross_intersection(pg) >= 1
    with pytest.raises(ValueError):
        max_cross_intersection(gen_single(PlantedConfig(n=100, c=10, p=0.5, q=1.0)))


def test_q_zero_gives_noise_only():
    pg = generate(PlantedConfig(n=400, c=20, p=0.8, q=0.0, seed=0))
    assert pg.graph.strong_edge_count == 0


def test_within_edge_density_matches_probability():
    cfg = PlantedConfig(n=3000, c=30, p=0.85, q=1.0, r=0.0, seed=9)
    pg = gen_single(cfg)
    sizes = community_sizes(pg)
    pairs = float((sizes * (sizes - 1) // 2).sum())
    rate = pg.graph.strong_edge_count / pairs
    se = math.sqrt(cfg.within_prob * (1 - cfg.within_prob) / pairs)
    assert abs(rate - cfg.within_prob) < 4 * se


def test_edge_motifs_match_brute_force(rng):
    for _ in range(60):
        g = random_layered(rng, int(rng.integers(2, 20)), p_weak=float(rng.uniform(0.05, 0.7)))
        brute = brute_force_edge_motifs(g)
        for em in edge_motif_counts(g):
            assert brute[em.edge] == (em.triangles, em.squares)


def test_edge_motifs_on_k4():
    k4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    edges, tri, sq = edge_motif_arrays(from_edges(4, k4))
    # every K4 edge lies in 2 triangles and 2 four-cycles
    assert tri.tolist() == [2] * 6 and sq.tolist() == [2] * 6


def test_closed_form_probabilities():
    cfg = PlantedConfig(n=30, c=30, p=0.85, q=1.0, r=0.0)
    assert prob_triangle_within(cfg) == pytest.approx(0.4947, abs=5e-4)
    assert prob_square_within(cfg) == pytest.approx(0.9410, abs=5e-4)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert prob_square_within(cfg.with_(c=3.0, n=3)) == 0.0
        assert len(w) == 1


def test_verify_expectations_small_run():
    rep = verify_expectations(PlantedConfig(n=1500, c=30, p=0.85, q=1.0, seed=11), trials=3)
    assert set(rep.strata) == {"within", "cross"}
    assert rep.strata["within"].edges > 0
    assert [c.name for c in rep.checks] == ["within triangles", "within squares", "cross triangles", "cross squares"]
    with pytest.raises(ValueError):
        verify_expectations(PlantedConfig(n=100, c=10, p=0.5, q=1.0), trials=0)
