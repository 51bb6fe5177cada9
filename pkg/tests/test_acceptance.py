"""Acceptance gate: one test per shipped guarantee, each printing a single
PASS/FAIL line with its measured quantities.

Every criterion is checked at its stated tolerance against an independent
oracle (convex projection, dense eigensolves, exhaustive enumeration,
exact-arithmetic replay, or Monte Carlo baselines computed in-suite)."""

import math
import sys
import time

import numpy as np
import pytest

from colorsparse.boxspec import FWConfig, make_spectral_solver, solve_flam
from colorsparse.coloring import (DiscrepancyBody, binary_search_partial_color,
                                  draw_anchor)
from colorsparse.degree import (DegreeConfig, degree_preserving_sparsify,
                                degree_round)
from colorsparse.graphs import WeightedGraph, isotropize
from colorsparse.operators import (GaussianSource, OperatorFamily,
                                   SpectralObjective)
from colorsparse.sparsify import (graph_sparsify, leverage_warm_start,
                                  ultrasparsify)
from colorsparse.spencer import (SetSystem, l2l1_game_solve, make_linf_solver,
                                 spencer_color)

from oracles import (exact_nearest_point, exhaustive_discrepancy,
                     flam_subgrad_linf, flam_subgrad_opnorm,
                     projected_subgradient, rational_cancel_replay, BUDGET)
from util import (complete_bipartite, cycle_graph, er_graph, grid_graph,
                  path_graph, random_bipartite)

BETA = 0.2
C_TIGHT = 0.02


def _report(num, ok, detail):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line, flush=True)
    assert ok, line


def _normalized_atoms(gen, n, k):
    atoms = [(lambda B: B @ B.T)(gen.normal(size=(n, n))) for _ in range(k)]
    s = max(float(np.max(np.abs(np.linalg.eigvalsh(a)))) for a in atoms)
    return [a / s for a in atoms]


def test_criterion_01_framework_oracle_equivalence():
    t0 = time.time()
    viol = 0
    for seed in range(25):          # Spencer-style set-system bodies, m = 10
        m = 10
        A = np.random.default_rng(100 + seed).uniform(-1, 1, size=(m, m))
        rho = 0.6 * math.sqrt(m)
        system = SetSystem.from_dense(A)
        theta = max(system.row_l1_max(), rho * (1 + 1e-9))
        body = DiscrepancyBody(m=m, rho=rho, theta=theta, value=system.disc)
        rng = GaussianSource(seed)
        g = draw_anchor(m, rng)
        x = binary_search_partial_color(body, g, BETA,
                                        make_linf_solver(system), rng=rng)
        _, r_star = exact_nearest_point(g, rho, A=A)
        tau = C_TIGHT * m * BETA * BETA / 4.0
        viol += float(np.sum((x - g) ** 2)) > r_star ** 2 + tau + 1e-6
    for seed in range(25):          # two-atom operator-norm bodies, m = 2
        gen = np.random.default_rng(200 + seed)
        atoms = _normalized_atoms(gen, 6, 2)
        obj = SpectralObjective(family=OperatorFamily.from_dense(atoms))
        theta = obj.opnorm(np.ones(2))
        rho = 0.5 * theta
        body = DiscrepancyBody(m=2, rho=rho, theta=max(theta, rho * (1 + 1e-9)),
                               value=obj.opnorm)
        rng = GaussianSource(seed)
        g = draw_anchor(2, rng)
        x = binary_search_partial_color(body, g, BETA,
                                        make_spectral_solver(obj), rng=rng)
        _, r_star = exact_nearest_point(g, rho, atoms=atoms)
        tau = C_TIGHT * 2 * BETA * BETA / 4.0
        viol += float(np.sum((x - g) ** 2)) > r_star ** 2 + tau + 1e-6
    dt = time.time() - t0
    _report(1, viol == 0 and dt < 60.0,
            f"50 instances, {viol} violations of ||x-g||^2 <= r*^2 + tau, "
            f"{dt:.1f}s (< 60s)")


def test_criterion_02_linear_sized_graph_sparsification():
    worst = []
    ok = True
    for G, name in ((grid_graph(10, 10), "grid10x10"),
                    (cycle_graph(200), "C200"),
                    (er_graph(200, 0.1, seed=0), "G(200,0.1)")):
        for eps in (0.25, 0.4):
            t0 = time.time()
            res = graph_sparsify(G, eps, seed=0)
            dt = time.time() - t0
            good = (res.ok and res.nnz <= 96.0 * G.n / (eps * eps)
                    and dt < 600.0)
            ok = ok and good
            worst.append(f"{name}@{eps}:{'ok' if good else 'FAIL'}")
    _report(2, ok, "certified with nnz <= 96n/eps^2: " + " ".join(worst))


def test_criterion_03_tree_incompressibility():
    gen = np.random.default_rng(0)
    trees = [path_graph(50),
             WeightedGraph(9, [(0, i) for i in range(1, 9)],
                           gen.uniform(0.5, 2.0, size=8))]
    ok = True
    for T in trees:
        for eps in (0.25, 0.5):
            res = graph_sparsify(T, eps, seed=0)
            ok = ok and res.nnz == T.n - 1 \
                and bool(np.all(np.abs(res.weights - 1.0) <= eps)) \
                and np.array_equal(res.weights, np.ones(T.m))
    _report(3, ok, "tree inputs keep all n-1 edges with unit multipliers")


def test_criterion_04_ultrasparsifier():
    ell = 4.0
    ok = True
    kappas = []
    for seed in range(5):
        G = er_graph(300, 0.05, seed=seed)
        res = ultrasparsify(G, ell, seed=seed)
        budget = G.n - 1 + 96.0 * G.n / ell
        kappa = res.extra["kappa_measured"]
        kappas.append(kappa)
        Lg = G.laplacian().toarray()
        Lhp = G.laplacian(res.weights * G.weights).toarray()
        lam, U = np.linalg.eigh(Lg)
        keep = lam > 1e-10 * lam.max()
        S = U[:, keep] / np.sqrt(lam[keep])
        ev = np.linalg.eigvalsh(S.T @ Lhp @ S)
        sandwich = ev.max() <= 1.0 + 1e-6 and ev.min() >= 1.0 / kappa - 1e-6
        ok = ok and res.nnz <= budget and np.isfinite(kappa) and sandwich
    _report(4, ok, f"5 seeds, edge budget n-1+96n/l, measured kappas "
            f"{[round(k, 1) for k in kappas]}")


def test_criterion_05_degree_preservation():
    eps = 0.5
    ok = True
    details = []
    gen = np.random.default_rng(1)
    for G, name in ((complete_bipartite(4, 4), "K44"),
                    (grid_graph(12, 12), "grid12x12"),
                    (random_bipartite(10, 10, 60, seed=2), "bip(10,10,60)")):
        res = degree_preserving_sparsify(G, eps, seed=0)
        good = (res.extra["degree_residual"] <= 1e-8 and res.ok
                and res.nnz <= 96.0 * G.n / (eps * eps))
        ok = ok and good
        details.append(f"{name}:{res.extra['degree_residual']:.1e}")
    # exact-arithmetic replay of the cancellation ledger at m <= 64
    H = random_bipartite(8, 12, 64, seed=5)
    H = WeightedGraph(H.n, H.edges, gen.integers(1, 16, size=H.m) / 8.0)
    rr = degree_round(H)
    exact = rational_cancel_replay(H, rr, BUDGET)
    replay = all(float(q) == w for q, w in zip(exact, rr.weights))
    ok = ok and replay
    _report(5, ok, f"residuals {' '.join(details)}, rational replay "
            f"bit-exact={replay}")


def test_criterion_06_degree_round_zero_count():
    gen = np.random.default_rng(0)
    viol = 0
    for trial in range(100):
        a = int(gen.integers(4, 9))
        b = int(gen.integers(4, 9))
        mmax = a * b
        m = int(gen.integers(a + b, mmax + 1))
        H = random_bipartite(a, b, m, seed=int(gen.integers(0, 10 ** 6)))
        rr = degree_round(H)
        need = math.ceil((H.m - H.n + 1) / 2)
        bad = (rr.zero_count < need
               or np.any(rr.weights < 0.0)
               or np.any(rr.weights > 2.0 * H.weights + 1e-12)
               or np.max(np.abs(H.degrees(rr.weights) - H.degrees())) > 1e-9)
        viol += bad
    _report(6, viol == 0,
            f"100 random bipartite instances, {viol} violations of "
            f"zeros >= ceil((m-n+1)/2) with degrees preserved")


def test_criterion_07_spencer_quality():
    t0 = time.time()
    n = 256
    discs = []
    for seed in range(50):
        gen = np.random.default_rng(10 * seed)
        A = (gen.uniform(size=(n, n)) < 0.5).astype(float)
        discs.append(spencer_color(SetSystem.from_dense(A), seed=seed).disc_inf)
    med = float(np.median(discs))
    # Monte Carlo random-coloring baseline, computed in-suite
    base = []
    gen = np.random.default_rng(999)
    for _ in range(5):
        A = (gen.uniform(size=(n, n)) < 0.5).astype(float)
        for _ in range(40):
            x = np.where(gen.uniform(size=n) < 0.5, 1.0, -1.0)
            base.append(float(np.max(np.abs(A @ x))))
    baseline = float(np.median(base))

    small_ok = True
    worst_ratio = 0.0
    for seed in range(20):
        gen = np.random.default_rng(50 + seed)
        A = (gen.uniform(size=(12, 12)) < 0.5).astype(float)
        res = spencer_color(SetSystem.from_dense(A), seed=seed)
        _, best = exhaustive_discrepancy(A)
        worst_ratio = max(worst_ratio, res.disc_inf / max(best, 1e-12))
        small_ok = small_ok and res.disc_inf <= 4.0 * best
    dt = time.time() - t0
    ok = med <= 12.0 * math.sqrt(n) and med < baseline and small_ok \
        and dt < 300.0
    _report(7, ok, f"median disc {med:.0f} <= {12 * math.sqrt(n):.0f} and "
            f"< random baseline {baseline:.0f}; n=12 worst ratio "
            f"{worst_ratio:.1f}x (<= 4x); {dt:.0f}s (< 300s)")


def test_criterion_08_solver_contracts():
    succ_fw = 0
    target = 0.05
    for seed in range(30):
        gen = np.random.default_rng(300 + seed)
        atoms = [2.0 * a for a in _normalized_atoms(gen, 4, 6)]
        obj = SpectralObjective(family=OperatorFamily.from_dense(atoms))
        g = gen.uniform(-1.5, 1.5, size=6)
        lam = 0.5
        x = solve_flam(obj, g, lam, target, config=FWConfig(iters=30000))
        vs = flam_subgrad_opnorm(atoms, g, lam)
        _, ref = projected_subgradient(vs, np.clip(g, -1, 1), iters=5000)
        d = x - g
        val = obj.opnorm(x) + lam * float(d @ d)
        succ_fw += val <= ref + target + 0.02
    succ_game = 0
    eps, delta = 0.6, 0.02
    for seed in range(30):
        gen = np.random.default_rng(400 + seed)
        A = (gen.uniform(size=(12, 12)) < 0.5).astype(float)
        system = SetSystem.from_dense(A)
        v = gen.uniform(-1, 1, size=12)
        lam = 0.3
        r = l2l1_game_solve(system, v, lam, eps, delta, GaussianSource(seed))
        vs = flam_subgrad_linf(A, v, lam)
        _, ref = projected_subgradient(vs, np.clip(v, -1, 1), iters=4000)
        succ_game += r.value <= ref + eps + 0.05
    ok = succ_fw >= 29 and succ_game >= 29
    _report(8, ok, f"solve_flam {succ_fw}/30, l2l1_game_solve "
            f"{succ_game}/30 within target of the subgradient oracle "
            f"(>= 95% each)")


def test_criterion_09_numerical_calculus():
    worst = 0.0
    sandwich_ok = True
    h = 1e-6
    for seed in range(20):
        gen = np.random.default_rng(500 + seed)
        atoms = _normalized_atoms(gen, 4, 5)
        obj = SpectralObjective(family=OperatorFamily.from_dense(atoms))
        x = gen.uniform(-1, 1, size=5)
        mu = 0.05
        val, grad = obj.value_grad(x, mu)
        for i in range(5):
            e = np.zeros(5)
            e[i] = h
            vp, _ = obj.value_grad(x + e, mu)
            vm, _ = obj.value_grad(x - e, mu)
            worst = max(worst, abs((vp - vm) / (2 * h) - grad[i]))
        op = obj.opnorm(x)
        sandwich_ok = sandwich_ok and op - 1e-9 <= val \
            <= op + mu * math.log(2 * obj.dim) + 1e-9
    ok = worst <= 1e-5 and sandwich_ok
    _report(9, ok, f"20 instances, max gradient error {worst:.2e} (<= 1e-5), "
            f"smoothing sandwich held on every audit")


def test_criterion_10_leverage_warm_start():
    delta, eps = 0.1, 0.5
    G = er_graph(16, 0.4, seed=2)
    fam = isotropize(G, eps_iso=1e-3)
    obj = SpectralObjective.from_family(fam)
    fails = sum(
        obj.opnorm(leverage_warm_start(fam, eps, delta,
                                       GaussianSource(s)) - 1.0) > eps
        for s in range(200))
    ok = fails <= 2 * delta * 200
    _report(10, ok, f"warm start deviation > eps in {fails}/200 trials "
            f"(<= {int(2 * delta * 200)})")


def test_criterion_11_determinism():
    pairs = []
    G = er_graph(30, 0.3, seed=4)
    pairs.append([graph_sparsify(G, 0.3, seed=5).weights.tobytes()
                  for _ in range(2)])
    G2 = er_graph(40, 0.3, seed=2)
    pairs.append([ultrasparsify(G2, 4.0, seed=0).weights.tobytes()
                  for _ in range(2)])
    K = complete_bipartite(4, 4)
    pairs.append([degree_preserving_sparsify(K, 0.5, seed=1).weights.tobytes()
                  for _ in range(2)])
    gen = np.random.default_rng(8)
    A = (gen.uniform(size=(32, 32)) < 0.5).astype(float)
    S = SetSystem.from_dense(A)
    pairs.append([spencer_color(S, seed=3).x.tobytes() for _ in range(2)])
    ok = all(a == b for a, b in pairs)
    _report(11, ok, f"{sum(a == b for a, b in pairs)}/4 pipelines "
            f"byte-identical across repeated seeded runs")
