"""Sparsification pipelines: warm start, sparse-plus-small phase loop,
linear-sized reweighting, graph sparsifiers, and ultrasparsifiers.

Desk-scale note: the per-phase discrepancy radius scales like
sqrt(trace_budget / m), so tiny instances run with O(1) radii and the
telescoped accuracy is a multiple of eps rather than eps itself.  Tests on
the phase machinery therefore assert the mechanical invariants (sparsity
target, small-component norm, non-negativity, drift guard, determinism)
plus the accuracy audit recorded in the phase ledger, while the
(1 +/- eps) certificate is asserted on the composed graph pipelines.
"""

import numpy as np
import pytest

from colorsparse.graphs import WeightedGraph, isotropize
from colorsparse.operators import GaussianSource, OperatorFamily, SpectralObjective
from colorsparse.sparsify import (PhaseError, SparsifyConfig, graph_sparsify,
                                  leverage_warm_start, linear_sized_sparsify,
                                  sparse_plus_small, ultrasparsify)

from oracles import dense_pinv
from util import er_graph, grid_graph, path_graph

SMALL_CFG = SparsifyConfig(c_sparse=4.0, c_final=4.0)


def rep_identity(n, copies):
    """n*copies atoms summing to the identity: copies scaled copies of each
    e_i e_i^T.  The natural sparsifier keeps ~1 copy per diagonal slot."""
    atoms = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0 / copies
        atoms.extend([E] * copies)
    return SpectralObjective(family=OperatorFamily.from_dense(atoms))


def test_warm_start_single_atom():
    F = OperatorFamily.from_dense([np.eye(3)])
    w = leverage_warm_start(F, 0.5, 0.1, GaussianSource(0))
    assert np.array_equal(w, [1.0])


def test_warm_start_weighted_mean_exact():
    # sum_i p_i * counts_i/(K p_i) = sum_i counts_i / K = 1 identically
    G = er_graph(10, 0.5, seed=1)
    fam = isotropize(G, eps_iso=1e-3)
    w = leverage_warm_start(fam, 0.4, 0.2, GaussianSource(5))
    tr = fam.traces()
    assert float((tr / tr.sum()) @ w) == pytest.approx(1.0, abs=1e-12)


def test_warm_start_zero_traces_raises():
    F = OperatorFamily.from_dense([np.zeros((2, 2))])
    with pytest.raises(ValueError):
        leverage_warm_start(F, 0.5, 0.1, GaussianSource(0))


def test_warm_start_deviation_rate():
    G = er_graph(12, 0.5, seed=3)
    fam = isotropize(G, eps_iso=1e-3)
    obj = SpectralObjective.from_family(fam)
    delta = 0.2
    fails = sum(obj.opnorm(leverage_warm_start(fam, 0.5, delta,
                                               GaussianSource(s)) - 1.0) > 0.5
                for s in range(30))
    assert fails <= 2 * delta * 30


def test_sparse_plus_small_trivial_guard():
    obj = rep_identity(3, 2)
    v, w, phases = sparse_plus_small(obj, 0.5, 0.1, GaussianSource(0))
    assert np.array_equal(v, np.zeros(6))
    assert np.array_equal(w, np.ones(6))
    assert phases == []


def test_sparse_plus_small_phase_loop():
    obj = rep_identity(4, 64)
    cfg = SparsifyConfig(c_sparse=4.0)
    v, w, phases = sparse_plus_small(obj, 0.5, 0.1, GaussianSource(0),
                                     config=cfg)
    target = 4.0 * 4 / 0.25
    assert np.count_nonzero(w) <= target
    assert np.min(v) >= 0.0 and np.min(w) >= 0.0
    assert obj.opnorm(v) <= 0.1 + 1e-6
    assert len(phases) >= 1
    rho_sum = sum(p.rho for p in phases)
    assert obj.opnorm(v + w - 1.0) <= rho_sum + 1e-6
    for i, p in enumerate(phases):
        assert p.k == i + 1
        assert p.tight_count >= 1
        assert p.rho > 0.0
        assert p.u_norm <= 2.0 + 1e-6
    supports = [p.m_support for p in phases]
    assert supports == sorted(supports, reverse=True)


def test_sparse_plus_small_deterministic():
    obj = rep_identity(4, 64)
    cfg = SparsifyConfig(c_sparse=4.0)
    out = [sparse_plus_small(obj, 0.5, 0.1, GaussianSource(7), config=cfg)
           for _ in range(2)]
    assert np.array_equal(out[0][0], out[1][0])
    assert np.array_equal(out[0][1], out[1][1])


def test_sparse_plus_small_phase_budget_error():
    obj = rep_identity(4, 64)
    cfg = SparsifyConfig(c_sparse=4.0, extra_phase_cap=0, beta=1e-3)
    with pytest.raises(PhaseError) as info:
        sparse_plus_small(obj, 0.5, 0.1, GaussianSource(0), config=cfg)
    assert isinstance(info.value.state, list)


def test_linear_sized_trivial_guard():
    obj = rep_identity(3, 2)
    w, phases = linear_sized_sparsify(obj, 0.5, 0.1, GaussianSource(0))
    assert np.array_equal(w, np.ones(6))
    assert phases == 0


@pytest.mark.parametrize("seed", [1, 2])
def test_linear_sized_nontrivial(seed):
    obj = rep_identity(4, 64)
    eps = 0.29
    w, phases = linear_sized_sparsify(obj, eps, 0.1, GaussianSource(seed),
                                      config=SMALL_CFG)
    assert phases >= 1
    assert np.min(w) >= 0.0
    assert np.count_nonzero(w) <= SMALL_CFG.c_final * 4 / (eps * eps)
    assert obj.opnorm(w - 1.0) <= 1.5       # telescoped O(1)-radius budget


def test_graph_sparsify_trivial_grid():
    G = grid_graph(10, 10)
    res = graph_sparsify(G, 0.4, seed=0)
    assert np.array_equal(res.weights, np.ones(G.m))
    assert res.ok and res.phases == 0
    assert res.lambda_min == pytest.approx(1.0, abs=1e-9)
    assert res.lambda_max == pytest.approx(1.0, abs=1e-9)
    assert res.nnz <= 96.0 * G.n / 0.16


def test_graph_sparsify_tree_keeps_everything():
    G = path_graph(20)
    res = graph_sparsify(G, 0.3, seed=1)
    assert res.nnz == G.m == G.n - 1
    assert np.array_equal(res.weights, np.ones(G.m))
    assert res.ok


def test_graph_sparsify_eps_validation():
    G = path_graph(3)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            graph_sparsify(G, bad)


def test_graph_sparsify_result_fields():
    G = er_graph(15, 0.4, seed=4)
    res = graph_sparsify(G, 0.5, seed=9)
    assert res.seed == 9
    assert res.runtime_ms >= 0.0
    assert res.eps_target == 0.5
    assert res.nnz == int(np.count_nonzero(res.weights))


def _pencil_eigs(A, B):
    """Eigenvalues of B^{+/2} A B^{+/2} on the common range."""
    lam, U = np.linalg.eigh(B)
    keep = lam > 1e-10 * max(lam.max(), 1.0)
    S = U[:, keep] / np.sqrt(lam[keep])
    return np.linalg.eigvalsh(S.T @ A @ S)


def test_ultrasparsify_ell_one_is_plain_sparsifier():
    G = er_graph(20, 0.4, seed=5)
    res = ultrasparsify(G, 1.0, seed=0)
    assert res.extra["sigma"] is None
    assert np.isfinite(res.extra["kappa_measured"])
    assert res.extra["edge_count"] == res.nnz


def test_ultrasparsify_tree_input():
    G = path_graph(15)
    res = ultrasparsify(G, 4.0, seed=0)
    assert res.nnz == G.n - 1
    assert res.extra["kappa_measured"] == pytest.approx(1.0, abs=1e-6)


def test_ultrasparsify_validation():
    with pytest.raises(ValueError):
        ultrasparsify(path_graph(4), 0.5)
    H = WeightedGraph(4, [(0, 1), (2, 3)], np.ones(2))
    with pytest.raises(ValueError):
        ultrasparsify(H, 2.0)


def test_ultrasparsify_default_budget_and_sandwich():
    G = er_graph(40, 0.3, seed=2)
    res = ultrasparsify(G, 4.0, seed=0)
    assert res.ok
    assert res.nnz <= res.extra["edge_budget"]
    Lg = G.laplacian().toarray()
    Lhp = G.laplacian(res.weights * G.weights).toarray()
    ev = _pencil_eigs(Lhp, Lg)
    kappa = res.extra["kappa_measured"]
    assert np.isfinite(kappa) and kappa >= 1.0 - 1e-9
    # L_H' <= L_G <= kappa * L_H'
    assert np.max(ev) <= 1.0 + 1e-6
    assert np.min(ev) >= 1.0 / kappa - 1e-6


def test_ultrasparsify_nontrivial_core():
    G = er_graph(40, 0.3, seed=2)
    res = ultrasparsify(G, 4.0, seed=1, config=SMALL_CFG)
    assert res.phases >= 1
    assert res.ok
    assert res.nnz <= res.extra["edge_budget"]
    Lg = G.laplacian().toarray()
    Lhp = G.laplacian(res.weights * G.weights).toarray()
    ev = _pencil_eigs(Lhp, Lg)
    assert np.max(ev) <= 1.0 + 1e-6
    assert np.min(ev) >= 1.0 / res.extra["kappa_measured"] - 1e-6
