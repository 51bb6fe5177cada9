"""Degree-preserving sparsification.

The pipeline mirrors the spectral one but keeps the weighted degree vector
|B|^T w exactly fixed: every partial coloring is constrained to the
circulation space ker(B^T W) of a bipartite-signed incidence matrix (on a
bipartite edge set, signed circulations are unsigned-degree neutral), and the
near-tight set of each phase is rounded to exact zeros by cycle canceling
instead of truncation.

Pieces: oblivious routings (electric / spanning tree), a Delta-approximate
linear optimization oracle over the circulation-cube intersection, the
four-channel link/cut cycle canceler, and the phase loop itself.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .boxspec import FWConfig, solve_flam
from .coloring import (C_SET_DEFAULT, C_TIGHT_DEFAULT, DiscrepancyBody,
                       FrameworkError, two_sided_partial_color)
from .graphs import LapSolver, WeightedGraph, certify_sandwich, isotropize
from .linkcut import LO_FWD, LO_REV, UP_FWD, UP_REV, LinkCutForest
from .operators import GaussianSource, SpectralObjective
from .sparsify import (C_FINAL_DEFAULT, C_SPARSE_DEFAULT, PhaseError,
                       PhaseState, SparsifierResult)

log = logging.getLogger(__name__)

LIN_ITER_CAP = 20000
ROUTING_DENSE_LIMIT = 20000     # electric routing below, tree routing above


# ---- oblivious routings ----------------------------------------------


@dataclass
class ObliviousRouting:
    """Linear map R from (component-wise zero-sum) vertex demands to edge
    flows with B^T R d = d; quality alpha bounds the edge-space gain
    ||W^{-1} R B^T W y||_inf / ||y||_inf."""

    kind: str
    alpha: float
    graph: WeightedGraph
    B: np.ndarray                # signed incidence actually routed against
    R: np.ndarray                # dense m x n routing matrix
    solver: LapSolver | None = None

    def route(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind == "electric" and self.solver is not None:
            return self.graph.weights * (self.B @ self.solver.solve(d))
        return self.R @ d

    def edge_gain(self, y) -> np.ndarray:
        """W^{-1} R B^T W y, the part of y the routing can see."""
        y = np.asarray(y, dtype=float)
        w = self.graph.weights
        return (self.R @ (self.B.T @ (w * y))) / w


def _spanning_forest_parents(G: WeightedGraph):
    adj = [[] for _ in range(G.n)]
    for i, (u, v) in enumerate(G.edges):
        adj[u].append((v, i))
        adj[v].append((u, i))
    parent = np.full(G.n, -1, dtype=int)
    parent_edge = np.full(G.n, -1, dtype=int)
    seen = np.zeros(G.n, dtype=bool)
    for root in range(G.n):
        if seen[root]:
            continue
        seen[root] = True
        stack = [root]
        while stack:
            a = stack.pop()
            for b, i in adj[a]:
                if not seen[b]:
                    seen[b] = True
                    parent[b] = a
                    parent_edge[b] = i
                    stack.append(b)
    return parent, parent_edge


def build_routing(G: WeightedGraph, kind: str = "electric",
                  B: np.ndarray | None = None,
                  rng: GaussianSource | None = None,
                  samples: int = 100) -> ObliviousRouting:
    """Electric routing R = W B L^+ or fixed spanning-forest routing, with
    the quality alpha measured on random edge vectors (iteration counts
    downstream scale with alpha^2, so we log it)."""
    if B is None:
        B = G.incidence().toarray()
    B = np.asarray(B, dtype=float)
    m, n = B.shape
    solver = None
    if kind == "electric":
        L = G.laplacian().toarray()
        Lp = np.linalg.pinv(L, hermitian=True)
        R = (G.weights[:, None] * B) @ Lp
        solver = LapSolver(G, eps_solve=1e-10)
    elif kind == "tree":
        parent, parent_edge = _spanning_forest_parents(G)
        R = np.zeros((m, n))
        for v in range(n):
            a = v
            while parent[a] >= 0:
                t = parent_edge[a]
                R[t, v] += 1.0 if B[t, a] > 0 else -1.0
                a = parent[a]
    else:
        raise ValueError(f"unknown routing kind {kind!r}")

    if rng is None:
        rng = GaussianSource(0, stream=17)
    alpha = 1.0
    for _ in range(samples):
        y = rng.standard(m)
        gain = (R @ (B.T @ (G.weights * y))) / G.weights
        alpha = max(alpha, float(np.max(np.abs(gain)) / np.max(np.abs(y))))
    routing = ObliviousRouting(kind=kind, alpha=alpha, graph=G, B=B, R=R,
                               solver=solver)
    log.debug("routing kind=%s alpha=%.3f (m=%d n=%d)", kind, alpha, m, n)
    return routing


# ---- circulation-space linear optimization ---------------------------


@dataclass
class CirculationOracle:
    """Operator A = W^{-1}(I - R B^T)W projecting edge space onto the
    circulation cube's affine hull: A is idempotent and B^T W A = 0."""

    routing: ObliviousRouting
    delta: float
    p: int = field(init=False)
    A: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0,1)")
        G = self.routing.graph
        m = G.m
        self.p = max(int(math.ceil(5.0 * math.log(max(m, 2)) / self.delta)), 3)
        w = G.weights
        C = np.eye(m) - self.routing.R @ self.routing.B.T
        # conjugating by W keeps the image inside ker(B^T W)
        self.A = C * (w[None, :] / w[:, None])

    def apply(self, z) -> np.ndarray:
        return self.A @ np.asarray(z, dtype=float)


@dataclass
class CirculationResult:
    x: np.ndarray
    value: float
    degenerate: bool
    iters: int
    p: int


def _pnorm_and_grad(y: np.ndarray, p: int):
    """(||y||_p, grad of 1/2 ||y||_p^2), computed through |y|/||y||_inf so
    large p never overflows."""
    a = float(np.max(np.abs(y)))
    if a == 0.0:
        return 0.0, np.zeros_like(y)
    q = np.abs(y) / a
    with np.errstate(under="ignore"):
        s = float(np.sum(q ** p))
        r = a * s ** (1.0 / p)
        grad = r * (np.abs(y) / r) ** (p - 1) * np.sign(y)
    return r, grad


def circulation_linopt(oracle: CirculationOracle, c,
                       iters: int | None = None) -> CirculationResult:
    """x with ||x||_inf <= 1, B^T W x = 0 and <c, x> within a (1 - delta)
    factor of the constrained minimum.

    ell_inf gradient descent on <c, Az> + 1/2 ||Az||_p^2 (smoothness
    4 alpha^2 p in the ell_inf norm), every iterate multiplied through the
    idempotent A, then the stationarity rescale x = y / ||y||_p.
    """
    c = np.asarray(c, dtype=float)
    m = c.shape[0]
    if m != oracle.A.shape[0]:
        raise ValueError("cost dimension mismatch")
    alpha, p = oracle.routing.alpha, oracle.p
    L = 4.0 * alpha * alpha * p
    if iters is None:
        iters = int(math.ceil(8.0 * alpha * alpha * math.log(max(m, 2))
                              / (oracle.delta ** 2)))
    iters = min(max(iters, 1), LIN_ITER_CAP)

    y = np.zeros(m)
    best_y, best_val = y, 0.0
    for t in range(iters):
        r, q = _pnorm_and_grad(y, p)
        grad = oracle.A.T @ (c + q)
        g1 = float(np.sum(np.abs(grad)))
        if g1 == 0.0:
            break
        step = oracle.A @ (-(g1 / L) * np.sign(grad))
        y = y + step
        r, _ = _pnorm_and_grad(y, p)
        val = float(c @ y) + 0.5 * r * r
        if val < best_val:
            best_val, best_y = val, y
    r, _ = _pnorm_and_grad(best_y, p)
    tol = 1e-12 * (1.0 + float(np.linalg.norm(c)))
    if r == 0.0 or best_val >= -tol or float(c @ best_y) >= 0.0:
        return CirculationResult(x=np.zeros(m), value=0.0, degenerate=True,
                                 iters=iters, p=p)
    x = best_y / r
    return CirculationResult(x=x, value=float(c @ x), degenerate=False,
                             iters=iters, p=p)


# ---- cycle-canceling rounding ----------------------------------------


@dataclass
class CancelStep:
    """One cycle cancellation: the closing edge, the tree path (edge ids in
    order from the closing edge's first endpoint to its second), the applied
    wave and its magnitude, and which edge saturated at which bound."""

    edge: int
    path: list
    delta: float
    wave: int                    # +1 forward (path direction), -1 reverse
    saturated: int               # edge id; may equal the closing edge
    bound: str                   # "zero" | "cap"


@dataclass
class RoundResult:
    weights: np.ndarray
    steps: list
    flipped: bool
    zero_count: int
    side: np.ndarray


def degree_round(H: WeightedGraph) -> RoundResult:
    """Cycle-cancel w away from w_H inside prod_e [0, 2 w_e] keeping
    |B|^T w = |B|^T w_H, with >= ceil((m - n + 1)/2) weights exactly zero.

    Processes edges sequentially against a link/cut forest whose four value
    channels track each tree edge's distance to saturation under the two
    alternating-sign waves; wrong-sign channels carry the 2m||w||_inf
    sentinel, which never reaches a path minimum (margin ||w||_inf,
    asserted).  Requires bipartite input: on an odd cycle no alternating
    wave is degree-neutral.
    """
    side = H.bipartition()
    if side is None:
        raise ValueError("degree_round needs a bipartite graph")
    m, n = H.m, H.n
    caps = 2.0 * H.weights
    wmax = float(np.max(H.weights)) if m else 0.0
    sent = max(2.0 * m * wmax, 1.0)

    forest = LinkCutForest()
    vnodes = [forest.vertex() for _ in range(n)]
    enodes: dict[int, object] = {}
    final_w = np.array(H.weights, dtype=float)
    dead_bounds: dict[int, str] = {}
    steps: list[CancelStep] = []

    def insert(e: int, w_now: float) -> None:
        a, b = H.edges[e]
        x, y = (a, b) if side[a] == 0 else (b, a)
        en = forest.edge(e, [0.0, 0.0, sent, sent])
        forest.link(vnodes[x], en)
        forest.link(en, vnodes[y])
        forest.expose(vnodes[x], vnodes[y])
        # in the exposure just built the forward wave traverses e from its
        # side-0 endpoint, so e takes +Delta forward: channels (up, lo)
        forest.set_values(en, [caps[e] - w_now, w_now, sent, sent])
        enodes[e] = en

    for e in range(m):
        a, b = H.edges[e]
        va, vb = vnodes[a], vnodes[b]
        if not forest.connected(va, vb):
            insert(e, H.weights[e])
            continue

        nodes = forest.path_nodes(va, vb)
        path_ids = [nd.key for nd in nodes if nd.key is not None]
        root = forest.expose(va, vb)
        w_e = float(H.weights[e])
        # closing the cycle traverses e from b back to a; its forward-wave
        # sign is + exactly when b is on side 0
        close_fwd = 1 if side[b] == 0 else -1
        cands = [
            (w_e, 1, None, "cap" if close_fwd > 0 else "zero"),
            (root.mins[UP_FWD], 1, root.amin[UP_FWD], "cap"),
            (root.mins[LO_FWD], 1, root.amin[LO_FWD], "zero"),
            (w_e, -1, None, "zero" if close_fwd > 0 else "cap"),
            (root.mins[LO_REV], -1, root.amin[LO_REV], "zero"),
            (root.mins[UP_REV], -1, root.amin[UP_REV], "cap"),
        ]
        delta, wave, sat_node, bound = min(cands, key=lambda t: t[0])
        if not delta < sent / 2.0:
            raise AssertionError("sentinel channel reached a path minimum")
        delta = max(float(delta), 0.0)

        sign = 1.0 if wave > 0 else -1.0
        forest.path_add(root, (-sign * delta, sign * delta,
                               sign * delta, -sign * delta))
        w_new = w_e + close_fwd * sign * delta

        if sat_node is None:
            sat = e
            final_w[e] = caps[e] if bound == "cap" else 0.0
            dead_bounds[e] = bound
        else:
            sat = sat_node.key
            final_w[sat] = caps[sat] if bound == "cap" else 0.0
            dead_bounds[sat] = bound
            i = nodes.index(sat_node)
            forest.excise(sat_node, nodes[i - 1], nodes[i + 1])
            del enodes[sat]
            insert(e, w_new)
        steps.append(CancelStep(edge=e, path=path_ids, delta=delta,
                                wave=wave, saturated=sat, bound=bound))

    margin = 0.5 * sent
    for e, en in enodes.items():
        vals = forest.values(en)
        if vals[UP_FWD] < margin:
            if min(vals[UP_REV], vals[LO_FWD]) < margin:
                raise AssertionError("sentinel margin violated")
            w = vals[LO_REV]
        else:
            if min(vals[UP_FWD], vals[LO_REV]) < margin:
                raise AssertionError("sentinel margin violated")
            w = vals[LO_FWD]
        final_w[e] = min(max(float(w), 0.0), caps[e])

    zeros = sum(1 for b in dead_bounds.values() if b == "zero")
    flipped = (len(dead_bounds) - zeros) > zeros
    if flipped:
        final_w = caps - final_w
    zero_count = int(np.sum(final_w == 0.0))
    return RoundResult(weights=final_w, steps=steps, flipped=flipped,
                       zero_count=zero_count, side=side)


# ---- constrained regularized solvers ---------------------------------


def kernel_projector(Cmat: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto ker(Cmat)."""
    Cmat = np.atleast_2d(np.asarray(Cmat, dtype=float))
    m = Cmat.shape[1]
    return np.eye(m) - np.linalg.pinv(Cmat) @ Cmat


def minimize_flam_constrained(obj: SpectralObjective, g, lam: float, tol: float,
                              Cmat: np.ndarray, proj: np.ndarray,
                              x0: np.ndarray | None = None,
                              mu_floor: float = 1e-9) -> np.ndarray:
    """Smoothed objective + mu-continuation as in the box case, but under the
    linear constraint Cmat x = 0 (SLSQP); the result is re-projected onto the
    kernel exactly and shrunk back into the cube."""
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    dim = max(obj.dim, 2)
    mu_final = min(max(tol / (2.0 * math.log(2 * dim)), mu_floor), 1.0)
    rn = np.linalg.norm(Cmat, axis=1)
    Cn = Cmat / np.where(rn > 0, rn, 1.0)[:, None]

    if x0 is None:
        x = proj @ np.clip(g, -1.0, 1.0)
        x /= max(1.0, float(np.max(np.abs(x))))
    else:
        x = np.asarray(x0, dtype=float).copy()
    bounds = [(-1.0, 1.0)] * m
    cons = [{"type": "eq", "fun": lambda xv: Cn @ xv, "jac": lambda xv: Cn}]

    mus = []
    mu = max(mu_final, 0.05)
    while mu > mu_final * 1.0001:
        mus.append(mu)
        mu = max(mu / 5.0, mu_final)
    mus.append(mu_final)

    for mu in mus:
        def fun(xv, mu=mu):
            v, gr = obj.value_grad(xv, mu)
            d = xv - g
            return v + lam * float(d @ d), gr + 2.0 * lam * d

        res = scipy.optimize.minimize(
            fun, x, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
            options={"maxiter": 250, "ftol": 1e-14})
        x = res.x
    x = proj @ x
    x /= max(1.0, float(np.max(np.abs(x))))
    return x


def make_constrained_solver(obj: SpectralObjective, Cmat: np.ndarray,
                            backend: str = "slsqp",
                            oracle: CirculationOracle | None = None,
                            fw_config: FWConfig | None = None,
                            lin_iters: int | None = None):
    """(lam, g, tol) -> x closures over the circulation-cube intersection."""
    if backend == "slsqp":
        proj = kernel_projector(Cmat)
        state = {}

        def solver(lam, g, tol):
            x = minimize_flam_constrained(obj, g, lam, tol, Cmat, proj,
                                          x0=state.get("x"))
            state["x"] = x.copy()
            return x
        return solver
    if backend == "frank-wolfe":
        if oracle is None:
            raise ValueError("frank-wolfe backend needs a circulation oracle")

        def linopt(c):
            return circulation_linopt(oracle, c, iters=lin_iters).x

        def solver(lam, g, tol):
            return solve_flam(obj, g, lam, tol, linopt=linopt,
                              config=fw_config, constraint=Cmat)
        return solver
    raise ValueError(f"unknown backend {backend!r}")


# ---- the phase loop --------------------------------------------------


@dataclass
class DegreeConfig:
    c_tight: float = C_TIGHT_DEFAULT
    c_set: float = C_SET_DEFAULT
    c_sparse: float = C_SPARSE_DEFAULT
    c_final: float = C_FINAL_DEFAULT
    routing: str = "electric"
    delta_lin: float = 0.25
    fw_iters: int = 250
    lin_iters: int | None = None
    solver_backend: str = "slsqp"
    retries: int = 4
    phase_cap: int = 60
    eps_iso: float = 1e-3
    eps_slack: float = 6.0       # run the rho schedule at eps / eps_slack


def _signed_bipartite_incidence(edges: np.ndarray, sides: np.ndarray,
                                n: int) -> np.ndarray:
    """Dense incidence with +1 on the side-0 endpoint, -1 on the side-1 one."""
    m = edges.shape[0]
    B = np.zeros((m, n))
    for j, (u, v) in enumerate(edges):
        if sides[u] == 0:
            B[j, u], B[j, v] = 1.0, -1.0
        else:
            B[j, v], B[j, u] = 1.0, -1.0
    return B


def degree_preserving_sparsify(G: WeightedGraph, eps: float, delta: float = 0.1,
                               routing: str | None = None,
                               rng: GaussianSource | None = None,
                               seed: int | None = None,
                               config: DegreeConfig | None = None
                               ) -> SparsifierResult:
    """Sparsifier whose weighted degrees match the input's exactly.

    Each phase bipartitions the support (natural 2-coloring when the support
    is bipartite, otherwise random until >= m/3 edges cross), runs the
    two-sided partial coloring constrained to the crossing circulation space,
    and replaces the near-tight set by a cycle-canceled reweighting with
    exact zeros.  Terminates once nnz <= c_sparse * n / eps^2.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0,1)")
    if config is None:
        config = DegreeConfig()
    if routing is not None:
        config.routing = routing
    if rng is None:
        rng = GaussianSource(seed if seed is not None else 0)
    t0 = time.perf_counter()
    n, m = G.n, G.m
    wG = G.weights
    target = config.c_sparse * n / (eps * eps)
    d0 = G.degrees()

    w_cur = np.ones(m)
    phases: list[PhaseState] = []
    if m > target:
        fam = isotropize(G, eps_iso=config.eps_iso)
        obj0 = SpectralObjective.from_family(fam)
        eps_run = eps / config.eps_slack
        K_plan = max(1, int(math.ceil(math.log2(max(m / target, 2.0))))) + 4
        k = 0
        while np.count_nonzero(w_cur) > target:
            k += 1
            if k > config.phase_cap:
                raise PhaseError(f"phase budget exhausted at "
                                 f"nnz={np.count_nonzero(w_cur)}", state=phases)
            support = np.flatnonzero(w_cur)
            mk_all = support.size

            # bipartition of the current support
            sub_graph = WeightedGraph(n, G.edges[support],
                                      (w_cur * wG)[support])
            sides = sub_graph.bipartition()
            if sides is None:
                attempts_cap = max(8, 4 * int(math.ceil(math.log2(n + 2))))
                sides = None
                for _ in range(attempts_cap):
                    cand = np.asarray(rng.integers(0, 2, size=n))
                    u, v = G.edges[support, 0], G.edges[support, 1]
                    if np.sum(cand[u] != cand[v]) * 3 >= mk_all:
                        sides = cand
                        break
                if sides is None:
                    raise PhaseError(f"phase {k}: no bipartition with enough "
                                     f"crossing edges", state=phases)
            u, v = G.edges[support, 0], G.edges[support, 1]
            Ek = support[sides[u] != sides[v]]
            mk = Ek.size

            sub = obj0.subset(Ek).scaled(w_cur[Ek])
            theta = max(sub.opnorm(np.ones(mk)), 1e-12)
            if theta > 2.5:
                raise PhaseError(f"working norm {theta:.3f} exceeds bound",
                                 state=phases)
            j = max(K_plan - k, 0)
            rho_k = max(2.0 * config.c_set * math.sqrt(n / mk),
                        eps_run / ((j + 1) * math.log2(j + 2) ** 2))
            beta = min(rho_k, 0.5)
            state = PhaseState(k=k, m_support=mk, rho=rho_k, beta=beta)
            required = max(1, int(math.floor(config.c_tight * mk / 12.0)))

            Bk = _signed_bipartite_incidence(G.edges[Ek], sides, n)
            Wk = (w_cur * wG)[Ek]
            Cmat = Bk.T * Wk[None, :]
            oracle = None
            if config.solver_backend == "frank-wolfe":
                Gk = WeightedGraph(n, G.edges[Ek], Wk)
                routing_obj = build_routing(Gk, config.routing, B=Bk,
                                            rng=rng.spawn(1000 + k))
                oracle = CirculationOracle(routing_obj, config.delta_lin)

            pc = None
            for attempt in range(config.retries):
                state.attempts += 1
                body = DiscrepancyBody(m=mk, rho=rho_k,
                                       theta=max(theta, rho_k),
                                       value=sub.opnorm, constraint=Cmat)
                solver = make_constrained_solver(
                    sub, Cmat, backend=config.solver_backend, oracle=oracle,
                    fw_config=FWConfig(iters=config.fw_iters),
                    lin_iters=config.lin_iters)
                try:
                    cand = two_sided_partial_color(body, beta, solver, rng=rng,
                                                   c_tight=config.c_tight)
                except FrameworkError as e:
                    log.debug("phase %d attempt failed: %s", k, e)
                    continue
                if int(np.sum(cand.neg_tight)) >= required:
                    pc, state.tight_count = cand, int(np.sum(cand.neg_tight))
                    break
            if pc is None:
                raise PhaseError(f"phase {k}: no constrained coloring reached "
                                 f"{required} near-tight coordinates",
                                 state=phases)

            x_tilde = pc.x
            S = np.flatnonzero(pc.neg_tight)
            x_full = x_tilde.copy()
            eff = Wk * (1.0 + x_tilde)          # proposed absolute weights
            floor = 1e-14 * max(float(np.max(Wk)), 1.0)
            S_pos = S[eff[S] > floor]
            x_full[S[eff[S] <= floor]] = -1.0
            if S_pos.size:
                Hs = WeightedGraph(n, G.edges[Ek[S_pos]], eff[S_pos])
                rr = degree_round(Hs)
                x_full[S_pos] = rr.weights / Wk[S_pos] - 1.0
                x_full[S_pos[rr.weights == 0.0]] = -1.0
                diff = np.zeros(mk)
                diff[S_pos] = x_full[S_pos] - x_tilde[S_pos]
                drift = sub.opnorm(diff)
                if drift > rho_k * theta * (1.0 + 1e-6):
                    log.warning("phase %d rounding drift %.3g exceeds "
                                "rho*||A(1)|| = %.3g", k, drift, rho_k * theta)

            neww = w_cur[Ek] * (1.0 + x_full)
            neww[x_full <= -1.0] = 0.0
            w_cur[Ek] = np.clip(neww, 0.0, None)
            state.u_norm = obj0.opnorm(w_cur)
            phases.append(state)
            if state.u_norm > 2.0 + 1e-6:
                raise PhaseError(f"phase {k}: ||M(w)|| = {state.u_norm:.3f} > 2",
                                 state=phases)

    ok, lam_min, lam_max = certify_sandwich(G, w_cur, eps)
    d1 = G.degrees(w_cur * wG)
    residuals = (d1 - d0) / np.maximum(d0, 1e-300)
    res = float(np.max(np.abs(residuals))) if n else 0.0
    ms = (time.perf_counter() - t0) * 1000.0
    return SparsifierResult(
        weights=w_cur, nnz=int(np.count_nonzero(w_cur)), eps_target=eps,
        lambda_min=lam_min, lambda_max=lam_max,
        ok=bool(ok and res <= 1e-8), phases=len(phases), runtime_ms=ms,
        seed=seed,
        extra={"degree_residual": res,
               "degree_residuals": residuals.tolist(),
               "routing": config.routing,
               "solver_backend": config.solver_backend})
