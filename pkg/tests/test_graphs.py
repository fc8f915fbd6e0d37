import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rgglab.errors import BudgetExhaustedError, DomainError, InsufficientAcceptanceError
from rgglab.graphs import (
    GraphSample,
    conditional_cap_fraction,
    coupled_triple_sample,
    coupling_epsilon,
    geometric_graph,
    pair_arrays,
    pair_count,
    pair_index,
    reduced_sphere_vectors,
    rejection_sample_region,
    sample_er,
    sample_er_batch,
    sample_geo,
    sample_geo_batch,
    sample_region_pool,
)
from rgglab.rng import RngStream
from rgglab.sphere import CapSpec, Orientation, cap_measure, sample_uniform_sphere, tau_of_p

from conftest import binomial_se, within_sigmas


# --- GraphSample ------------------------------------------------------------

def test_pair_order_is_lexicographic():
    n = 5
    expected = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rows, cols = pair_arrays(n)
    assert list(zip(rows.tolist(), cols.tolist())) == expected
    assert [pair_index(i, j, n) for i, j in expected] == list(range(pair_count(n)))
    assert pair_index(3, 1, n) == pair_index(1, 3, n)
    with pytest.raises(DomainError):
        pair_index(2, 2, n)


def test_serialization_known_bytes():
    g = GraphSample.from_edge_list(4, [(0, 1), (2, 3)])  # pairs 0 and 5
    assert g.serialize() == "4\n84\n"
    assert GraphSample.deserialize("4\n84\n") == g
    k5 = GraphSample(5, np.ones(10, dtype=bool))
    assert k5.serialize() == "5\nffc0\n"
    assert GraphSample(1, []).serialize() == "1\n\n"
    assert GraphSample.deserialize("1\n\n") == GraphSample(1, [])


def test_deserialize_rejects_bad_input():
    with pytest.raises(DomainError):
        GraphSample.deserialize("4\n8400\n")
    with pytest.raises(DomainError):
        GraphSample.deserialize("4\n85\n")  # padding bit set


@given(st.integers(1, 12), st.data())
@settings(max_examples=80, deadline=None)
def test_serialization_round_trip(n, data):
    edges = data.draw(st.lists(st.booleans(), min_size=pair_count(n), max_size=pair_count(n)))
    g = GraphSample(n, edges)
    assert GraphSample.deserialize(g.serialize()) == g
    assert GraphSample.from_code(n, g.code) == g
    assert GraphSample.from_adjacency(g.adjacency()) == g


def test_adjacency_symmetric_no_loops(gen):
    g = sample_er(9, 0.4, gen)
    adj = g.adjacency()
    assert np.array_equal(adj, adj.T)
    assert not adj.diagonal().any()


def test_relabel_preserves_edge_count(gen):
    g = sample_er(7, 0.5, gen)
    perm = gen.permutation(7)
    h = g.relabel(perm)
    assert h.edge_count == g.edge_count
    adj, new = g.adjacency(), h.adjacency()
    assert all(adj[i, j] == new[perm[i], perm[j]] for i in range(7) for j in range(7))


# --- Erdős–Rényi ------------------------------------------------------------

def test_er_extremes(gen):
    assert sample_er(5, 0.0, gen).edge_count == 0
    assert sample_er(5, 1.0, gen).edge_count == 10


def test_er_single_edge_frequency(gen):
    x = sample_er_batch(2, 0.5, 1_000_000, gen)
    assert within_sigmas(x.mean(), 0.5, binomial_se(0.5, x.size))


def test_er_domain(gen):
    with pytest.raises(DomainError):
        sample_er(4, 1.2, gen)


# --- geometric graphs -------------------------------------------------------

def full_dim_pair_edges(p, d, trials, gen, chunk=100_000):
    tau = tau_of_p(d, p)
    hits = 0
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        a = sample_uniform_sphere(d, gen, size=size)
        b = sample_uniform_sphere(d, gen, size=size)
        hits += int(np.count_nonzero(np.einsum("ij,ij->i", a, b) >= tau))
    return hits / trials


def test_geo_edge_marginal_full_dimension(gen):
    freq = full_dim_pair_edges(0.3, 50, 1_000_000, gen)
    assert within_sigmas(freq, 0.3, binomial_se(0.3, 1_000_000))


def test_geo_edge_marginal_reduced(gen):
    x = sample_geo_batch(2, 0.3, 50, 1_000_000, gen)
    assert within_sigmas(x.mean(), 0.3, binomial_se(0.3, x.shape[0]))


def test_geo_circle_triangles_match_arc_oracle(gen):
    # on the circle at p = 1/2 a triangle means all three points fit in an arc of
    # length pi/2, which has probability 3 * (1/4)^2 = 3/16
    trials = 1_000_000
    v = sample_uniform_sphere(2, gen, size=3 * trials).reshape(trials, 3, 2)
    gram = np.einsum("tik,tjk->tij", v, v)
    tri = np.mean((gram[:, 0, 1] >= 0) & (gram[:, 0, 2] >= 0) & (gram[:, 1, 2] >= 0))
    se = binomial_se(tri, trials)
    assert within_sigmas(tri, 3 / 16, se)
    assert tri - 0.125 >= 5 * se
    batch = sample_geo_batch(3, 0.5, 2, trials, gen).all(axis=1).mean()
    assert within_sigmas(batch, 3 / 16, se)


def test_geo_high_dimension_triangles_near_independent(gen):
    # Edgeworth: excess ~ (2 pi)^(-3/2) / sqrt(d) = 6.3e-4, about 2 standard errors here
    trials = 1_000_000
    tri = sample_geo_batch(3, 0.5, 10_000, trials, gen).all(axis=1).mean()
    assert within_sigmas(tri, 0.125, binomial_se(0.125, trials))


def test_geo_embedding_consistency(gen):
    for n, p, d in [(6, 0.3, 4), (10, 0.1, 50), (3, 0.5, 2)]:
        g, v = sample_geo(n, p, d, gen)
        assert v.shape == (n, d)
        assert geometric_graph(v, p=p) == g
        tau = tau_of_p(d, p)
        for (i, j), e in zip(itertools.combinations(range(n), 2), g.edges):
            assert e == (v[i] @ v[j] >= tau)


def test_reduced_vectors_are_unit_and_lower_triangular(gen):
    v = reduced_sphere_vectors(6, 40, 100, gen)
    assert v.shape == (100, 6, 6)
    assert np.allclose(np.linalg.norm(v, axis=2), 1.0, atol=1e-12)
    assert np.all(np.triu(v, 1) == 0)
    w = reduced_sphere_vectors(6, 3, 100, gen)
    assert w.shape == (100, 6, 3)
    assert np.allclose(np.linalg.norm(w, axis=2), 1.0, atol=1e-12)


@pytest.mark.parametrize("n,p,d", [(4, 0.3, 5), (4, 0.5, 3), (4, 0.2, 2)])
def test_reduced_route_matches_full_route(gen, n, p, d):
    # dual route: the Bartlett representation against plain full-dimensional sampling
    trials = 100_000
    m = pair_count(n)
    weights = 1 << np.arange(m)
    reduced = sample_geo_batch(n, p, d, trials, gen) @ weights
    v = sample_uniform_sphere(d, gen, size=n * trials).reshape(trials, n, d)
    rows, cols = pair_arrays(n)
    full = (np.einsum("tik,tjk->tij", v, v)[:, rows, cols] >= tau_of_p(d, p)) @ weights
    table = np.array([np.bincount(reduced, minlength=2**m), np.bincount(full, minlength=2**m)])
    table = table[:, table.sum(axis=0) > 0]
    assert stats.chi2_contingency(table).pvalue > 1e-3


@pytest.mark.parametrize("sampler", ["er", "geo"])
def test_degree_law_is_binomial(gen, sampler):
    n, p, d, trials = 10, 0.3, 20, 100_000
    edges = sample_er_batch(n, p, trials, gen) if sampler == "er" else sample_geo_batch(n, p, d, trials, gen)
    deg = edges[:, : n - 1].sum(axis=1)  # pairs (0, j) come first
    observed = np.bincount(deg, minlength=n)
    expected = stats.binom.pmf(np.arange(n), n - 1, p) * trials
    # pool the sparse upper tail so every expected count is >= 5
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_geo_domain(gen):
    with pytest.raises(DomainError):
        sample_geo(4, 0.0, 10, gen)
    with pytest.raises(DomainError):
        sample_geo_batch(4, 1.0, 10, 5, gen)
    with pytest.raises(DomainError):
        sample_geo(4, 0.2, 1, gen)


# --- rejection sampling -----------------------------------------------------

def test_rejection_full_sphere_first_draw(gen):
    x = rejection_sample_region([], 1, gen, d=5)
    assert x.shape == (5,)


def test_rejection_hemisphere_acceptance(gen):
    d = 30
    c = sample_uniform_sphere(d, gen)
    pool = sample_region_pool([CapSpec(c, tau_of_p(d, 0.5))], 100_000, gen)
    assert within_sigmas(pool.shape[0] / 100_000, 0.5, binomial_se(0.5, 100_000))


def test_rejection_two_random_caps_average_p_squared(gen):
    d, p, pairs, draws = 100, 0.3, 50, 20_000
    tau = tau_of_p(d, p)
    rates = []
    for _ in range(pairs):
        caps = [CapSpec(sample_uniform_sphere(d, gen), tau) for _ in range(2)]
        rates.append(sample_region_pool(caps, draws, gen).shape[0] / draws)
    se = np.std(rates, ddof=1) / np.sqrt(pairs)
    assert within_sigmas(np.mean(rates), p * p, se, k=5)


def test_rejection_budget_exhausted(gen):
    c = sample_uniform_sphere(4, gen)
    impossible = [CapSpec(c, 0.2), CapSpec(-c, 0.2)]
    with pytest.raises(BudgetExhaustedError) as info:
        rejection_sample_region(impossible, 3000, gen)
    assert info.value.attempts == 3000


def test_rejection_sample_lies_in_region(gen):
    d = 8
    caps = [CapSpec(sample_uniform_sphere(d, gen), 0.1, o) for o in (Orientation.CAP, Orientation.ANTICAP)]
    x = rejection_sample_region(caps, 10_000, gen)
    assert all((x @ cap.center >= cap.threshold) == cap.is_cap for cap in caps)


def test_conditional_fraction_full_sphere(gen):
    d = 20
    tau = tau_of_p(d, 0.2)
    f, se = conditional_cap_fraction([], sample_uniform_sphere(d, gen), tau, 200_000, gen)
    assert within_sigmas(f, cap_measure(d, tau), se)


def test_conditional_fraction_containment_and_disjointness(gen):
    d = 3
    c = sample_uniform_sphere(d, gen)
    f, se = conditional_cap_fraction([CapSpec(c, 0.3)], c, 0.3, 20_000, gen)
    assert f == 1.0 and se == 0.0
    f, se = conditional_cap_fraction([CapSpec(c, 0.0, Orientation.ANTICAP)], c, 0.0, 20_000, gen)
    assert f == 0.0


def test_conditional_fraction_insufficient(gen):
    c = sample_uniform_sphere(50, gen)
    with pytest.raises(InsufficientAcceptanceError) as info:
        conditional_cap_fraction([CapSpec(c, 0.6)], c, 0.1, 1000, gen)
    assert info.value.accepted < info.value.required


# --- coupled triple ---------------------------------------------------------

def test_coupling_extreme_eps(gen):
    n, p, d = 6, 0.25, 200
    big = coupled_triple_sample(n, p, d, 1 / p - 1, 20_000, gen)
    assert big.g_plus.edge_count == pair_count(n)
    assert big.g_minus.edge_count == 0
    assert big.sandwich_ok


def test_coupling_structure(gen):
    n, p, d = 7, 0.3, 500
    c = coupled_triple_sample(n, p, d, 0.2, 20_000, gen)
    assert c.mc_budget_used == (n - 1) * 20_000
    assert [e[0] for e in c.fraction_estimates] == [
        pair_index(k, i, n) for i in range(1, n) for k in range(i)
    ]
    assert c.g_minus.is_subgraph_of(c.g_plus)
    assert c.sandwich_ok == (c.g_minus.is_subgraph_of(c.g) and c.g.is_subgraph_of(c.g_plus))
    # g is the geometric graph of the returned embedding
    assert geometric_graph(c.vectors, tau=tau_of_p(d, p)) == c.g
    assert np.allclose(np.linalg.norm(c.vectors, axis=1), 1.0, atol=1e-12)


def test_coupling_domain(gen):
    with pytest.raises(DomainError):
        coupled_triple_sample(5, 0.7, 100, 0.1, 1000, gen)
    with pytest.raises(DomainError):
        coupled_triple_sample(5, 0.2, 100, 0.0, 1000, gen)


def test_coupling_reports_pair_on_insufficient_acceptance(gen):
    with pytest.raises(InsufficientAcceptanceError) as info:
        for t in range(50):
            coupled_triple_sample(8, 0.25, 4000, 0.1, 120, gen, min_accept=50)
    assert info.value.pair_index is not None


def test_coupling_outer_marginals_exact():
    n, p, d, eps, trials = 5, 0.25, 100, 0.4, 3000
    minus = np.zeros(pair_count(n))
    plus = np.zeros(pair_count(n))
    for t in range(trials):
        c = coupled_triple_sample(n, p, d, eps, 2_000, RngStream(3, t), min_accept=1)
        minus += c.g_minus.edges
        plus += c.g_plus.edges
        assert c.g_minus.is_subgraph_of(c.g_plus)
    for freq, q in [(minus / trials, (1 - eps) * p), (plus / trials, (1 + eps) * p)]:
        assert np.all(np.abs(freq - q) <= 4 * binomial_se(q, trials))


@pytest.mark.parametrize("budget", [1_000, 10_000, 100_000])
def test_coupling_edge_marginal_d3_every_budget(budget):
    # the shared-pool construction makes g exactly Geo_d, so there is no budget bias to shrink
    n, p, d = 4, 0.25, 3
    trials = 3000 if budget < 100_000 else 600
    total = 0
    for t in range(trials):
        c = coupled_triple_sample(n, p, d, 0.5, budget, RngStream(4, budget + t), min_accept=1)
        total += c.g.edge_count
    freq = total / (trials * pair_count(n))
    # pairs within one graph are correlated in d = 3; widen by the worst case factor sqrt(#pairs)
    se = binomial_se(p, trials * pair_count(n)) * math.sqrt(pair_count(n))
    assert within_sigmas(freq, p, se)


def test_coupling_epsilon_formula():
    n, p, d = 8, 0.25, 4000
    ln = math.log(n)
    assert coupling_epsilon(n, p, d, 2.0) == pytest.approx(2.0 * math.sqrt((n * p + ln) * ln**4 / d))
