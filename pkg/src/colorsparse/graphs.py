"""Weighted graphs, incidence algebra, Laplacian pseudo-solves, and
isotropization of edge families.

The Laplacian solver is preconditioned conjugate gradient with a Jacobi
preconditioner; it satisfies the relative pseudoinverse-norm accuracy
contract used by the sparsification pipelines, with the kernel handled by
per-component mean projection.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .operators import OperatorFamily


class SolverError(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


class WeightedGraph:
    """Undirected graph with strictly positive edge weights.

    Edges are stored as an m x 2 integer array plus a weight vector.  The
    signed incidence matrix B has row b_e with +1 at the first endpoint and
    -1 at the second.
    """

    def __init__(self, n: int, edges, weights):
        self.n = int(n)
        self.edges = np.asarray(edges, dtype=int).reshape(-1, 2)
        self.weights = np.asarray(weights, dtype=float)
        if self.edges.shape[0] != self.weights.shape[0]:
            raise ValueError("edge/weight count mismatch")
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            raise ValueError("self-loops not allowed")
        if np.any((self.edges < 0) | (self.edges >= self.n)):
            raise ValueError("vertex index out of range")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive")

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def incidence(self) -> sp.csr_matrix:
        """Signed incidence B, m x n."""
        m = self.m
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.ravel()
        vals = np.tile([1.0, -1.0], m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    def unsigned_incidence(self) -> sp.csr_matrix:
        m = self.m
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.ravel()
        vals = np.ones(2 * m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, self.n))

    def laplacian(self, weights=None) -> sp.csr_matrix:
        w = self.weights if weights is None else np.asarray(weights, dtype=float)
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v, u, v])
        cols = np.concatenate([v, u, u, v])
        vals = np.concatenate([-w, -w, w, w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def degrees(self, weights=None) -> np.ndarray:
        """Weighted degree vector |B|^T w."""
        w = self.weights if weights is None else np.asarray(weights, dtype=float)
        d = np.zeros(self.n)
        np.add.at(d, self.edges[:, 0], w)
        np.add.at(d, self.edges[:, 1], w)
        return d

    def components(self):
        L = self.laplacian()
        ncomp, labels = csgraph.connected_components(L != 0, directed=False)
        # vertices with no incident edges still get labels from the structure
        if L.nnz == 0:
            labels = np.arange(self.n)
            ncomp = self.n
        return ncomp, labels

    def is_connected(self) -> bool:
        ncomp, labels = self.components()
        return ncomp == 1

    def reweighted(self, weights) -> "WeightedGraph":
        return WeightedGraph(self.n, self.edges, weights)

    def subgraph_edges(self, idx) -> "WeightedGraph":
        idx = np.asarray(idx, dtype=int)
        return WeightedGraph(self.n, self.edges[idx], self.weights[idx])

    def bipartition(self):
        """2-coloring side vector in {0,1}^n, or None if an odd cycle exists."""
        side = np.full(self.n, -1, dtype=int)
        adj = [[] for _ in range(self.n)]
        for (u, v) in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for s in range(self.n):
            if side[s] >= 0:
                continue
            side[s] = 0
            stack = [s]
            while stack:
                a = stack.pop()
                for b in adj[a]:
                    if side[b] < 0:
                        side[b] = 1 - side[a]
                        stack.append(b)
                    elif side[b] == side[a]:
                        return None
        return side

    # ---- I/O ----------------------------------------------------------

    @classmethod
    def load(cls, path, fmt: str = "edges") -> "WeightedGraph":
        if fmt == "edges":
            return _load_edges(path)
        if fmt == "coo":
            return _load_coo(path)
        raise ValueError(f"unknown format {fmt!r}")

    def save(self, path, fmt: str = "edges") -> None:
        with open(path, "w") as f:
            if fmt == "edges":
                for (u, v), w in zip(self.edges, self.weights):
                    f.write(f"{u} {v} {w:.17g}\n")
            elif fmt == "coo":
                f.write(f"{self.n} {self.n} {2 * self.m}\n")
                for (u, v), w in zip(self.edges, self.weights):
                    f.write(f"{u} {v} {w:.17g}\n")
                    f.write(f"{v} {u} {w:.17g}\n")
            else:
                raise ValueError(f"unknown format {fmt!r}")


def _load_edges(path) -> WeightedGraph:
    edges, weights = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"line {lineno}: expected 'u v [w]'")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ValueError(f"line {lineno}: malformed edge {line!r}")
            edges.append((u, v))
            weights.append(w)
    if not edges:
        raise ValueError("empty edge list")
    n = int(np.max(edges)) + 1
    return WeightedGraph(n, edges, weights)


def _load_coo(path) -> WeightedGraph:
    """Symmetric coordinate text format: header 'n n nnz' then 'i j v' rows;
    both triangle halves may be present and are deduplicated."""
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 3:
            raise ValueError("line 1: expected 'n n nnz' header")
        n = int(header[0])
        seen = {}
        for lineno, line in enumerate(f, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'i j v'")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed entry {line!r}")
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key in seen and abs(seen[key] - v) > 1e-12 * max(1.0, abs(v)):
                raise ValueError(f"line {lineno}: asymmetric duplicate entry")
            seen[key] = v
    edges = np.array(sorted(seen), dtype=int)
    weights = np.array([seen[tuple(e)] for e in edges])
    return WeightedGraph(n, edges, weights)


# ---- Laplacian solves -------------------------------------------------


class LapSolver:
    """PCG Laplacian pseudo-solver with per-component kernel projection."""

    def __init__(self, G: WeightedGraph, eps_solve: float = 1e-8,
                 preconditioner: str = "jacobi", iter_cap: int | None = None):
        self.G = G
        self.eps_solve = float(eps_solve)
        self.preconditioner = preconditioner
        self.iter_cap = iter_cap if iter_cap is not None else 20 * G.n + 200
        self.L = G.laplacian().tocsr()
        ncomp, labels = G.components()
        self.ncomp = ncomp
        self.labels = labels
        self._comp_masks = [labels == c for c in range(ncomp)]
        d = self.L.diagonal()
        inv = np.where(d > 0, 1.0 / np.maximum(d, 1e-300), 0.0)
        if preconditioner == "jacobi":
            self._M = spla.LinearOperator((G.n, G.n), matvec=lambda v: inv * v)
        elif preconditioner == "none":
            self._M = None
        else:
            raise ValueError(f"unknown preconditioner {preconditioner!r}")

    def project(self, b: np.ndarray) -> np.ndarray:
        """Remove the per-component mean (projection onto range(L))."""
        out = np.array(b, dtype=float)
        for mask in self._comp_masks:
            out[mask] -= np.mean(out[mask])
        return out

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = self.project(np.asarray(b, dtype=float))
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros(self.G.n)
        rtol = max(self.eps_solve * 1e-3, 1e-13)
        residuals = []

        def cb(xk):
            residuals.append(float(np.linalg.norm(self.L @ xk - b)))

        x, info = spla.cg(self.L, b, rtol=rtol, atol=0.0, maxiter=self.iter_cap,
                          M=self._M, callback=cb)
        if info != 0:
            # retry once unpreconditioned with a larger budget before giving up
            x, info = spla.cg(self.L, b, rtol=rtol, atol=0.0,
                              maxiter=4 * self.iter_cap, callback=cb)
            if info != 0:
                raise SolverError(
                    f"PCG did not converge within {5 * self.iter_cap} iterations",
                    residuals=residuals)
        return self.project(x)


def lap_solve(S: LapSolver, b) -> np.ndarray:
    return S.solve(b)


def pinv_dense_columns(S: LapSolver) -> np.ndarray:
    """Dense n x n matrix of pseudoinverse applications, one solve per
    vertex (column v = L^+ (e_v - mean))."""
    n = S.G.n
    out = np.empty((n, n))
    for v in range(n):
        e = np.zeros(n)
        e[v] = 1.0
        out[:, v] = S.solve(e)
    return 0.5 * (out + out.T)


# ---- isotropization ---------------------------------------------------


def isotropize(G: WeightedGraph, eps_iso: float = 1e-3,
               per_component: bool = False) -> OperatorFamily:
    """Edge family in near-isotropic position.

    Returns the rank-one family with atoms M_e = z_e z_e^T where
    z_e = sqrt(w_e) W^{1/2} B Ltil b_e and Ltil is an eps_iso-accurate
    pseudoinverse application.  The sum over edges is within (1 +/- eps_iso)^2
    of the projection onto range(L), and traces recover leverage scores.
    """
    if not G.is_connected():
        if not per_component:
            raise ValueError("graph is disconnected; pass per_component=True")
    S = LapSolver(G, eps_solve=eps_iso)
    Ltil = pinv_dense_columns(S)
    u, v = G.edges[:, 0], G.edges[:, 1]
    D = Ltil[:, u] - Ltil[:, v]            # n x m, columns Ltil b_e
    sw = np.sqrt(G.weights)
    Z = (D[u, :] - D[v, :]) * sw[:, None] * sw[None, :]
    return OperatorFamily.from_rank_one(G.m, np.ones(G.m), Z)


def certify_sandwich(G: WeightedGraph, w, eps: float, tol: float = 1e-6):
    """Check (1-eps) L_G <= L_H <= (1+eps) L_G for L_H = sum_e w_e b_e b_e^T.

    Returns (ok, lambda_min, lambda_max), the extreme generalized eigenvalues
    of (L_H, L_G) on range(L_G).
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("reweighting must be nonnegative")
    lam_min, lam_max = generalized_extremes(G.laplacian(w * G.weights).toarray(),
                                            G.laplacian().toarray())
    ok = (lam_min >= 1.0 - eps - tol) and (lam_max <= 1.0 + eps + tol)
    return bool(ok), float(lam_min), float(lam_max)


def generalized_extremes(A: np.ndarray, Lg: np.ndarray):
    """Extreme generalized eigenvalues of (A, Lg) restricted to range(Lg)."""
    lam, U = np.linalg.eigh(0.5 * (Lg + Lg.T))
    tol = 1e-10 * max(np.max(np.abs(lam)), 1.0)
    keep = lam > tol
    Ur = U[:, keep]
    lr = lam[keep]
    scale = Ur / np.sqrt(lr)
    T = scale.T @ A @ scale
    ev = np.linalg.eigvalsh(0.5 * (T + T.T))
    return float(np.min(ev)), float(np.max(ev))


def effective_resistances(G: WeightedGraph, solver: LapSolver | None = None,
                          edges=None) -> np.ndarray:
    """R_eff(u, v) = b_e^T L^+ b_e for each requested edge."""
    if solver is None:
        solver = LapSolver(G)
    if edges is None:
        edges = G.edges
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    out = np.empty(len(edges))
    for i, (u, v) in enumerate(edges):
        b = np.zeros(G.n)
        b[u] = 1.0
        b[v] = -1.0
        out[i] = float(b @ solver.solve(b))
    return out


def tree_distortion(T: WeightedGraph, G: WeightedGraph) -> float:
    """sigma = Tr(L_T^+ L_G) by effective-resistance summation over G's edges.

    For a spanning tree T the resistance between u and v is the sum of 1/w
    along the unique tree path; computed with rooted prefix sums and
    parent-climbing LCA.
    """
    n = T.n
    adj = [[] for _ in range(n)]
    for (u, v), w in zip(T.edges, T.weights):
        adj[u].append((v, 1.0 / w))
        adj[v].append((u, 1.0 / w))
    parent = np.full(n, -1, dtype=int)
    depth = np.zeros(n, dtype=int)
    res_to_root = np.zeros(n)
    visited = np.zeros(n, dtype=bool)
    stack = [0]
    visited[0] = True
    order = []
    while stack:
        a = stack.pop()
        order.append(a)
        for b, r in adj[a]:
            if not visited[b]:
                visited[b] = True
                parent[b] = a
                depth[b] = depth[a] + 1
                res_to_root[b] = res_to_root[a] + r
                stack.append(b)
    if not visited.all():
        raise ValueError("subgraph is not spanning/connected")

    def lca(a, b):
        while depth[a] > depth[b]:
            a = parent[a]
        while depth[b] > depth[a]:
            b = parent[b]
        while a != b:
            a = parent[a]
            b = parent[b]
        return a

    sigma = 0.0
    for (u, v), w in zip(G.edges, G.weights):
        c = lca(u, v)
        sigma += w * (res_to_root[u] + res_to_root[v] - 2.0 * res_to_root[c])
    return float(sigma)


def max_weight_spanning_tree(G: WeightedGraph) -> WeightedGraph:
    """Maximum-weight spanning tree (Kruskal with union-find)."""
    order = np.argsort(-G.weights, kind="stable")
    parent = list(range(G.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    keep = []
    for i in order:
        u, v = G.edges[i]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            keep.append(i)
    keep = np.array(sorted(keep), dtype=int)
    return G.subgraph_edges(keep)


def bfs_spanning_tree(G: WeightedGraph, root: int = 0) -> WeightedGraph:
    adj = [[] for _ in range(G.n)]
    for i, (u, v) in enumerate(G.edges):
        adj[u].append((v, i))
        adj[v].append((u, i))
    visited = np.zeros(G.n, dtype=bool)
    visited[root] = True
    keep = []
    frontier = [root]
    while frontier:
        nxt = []
        for a in frontier:
            for b, i in adj[a]:
                if not visited[b]:
                    visited[b] = True
                    keep.append(i)
                    nxt.append(b)
        frontier = nxt
    keep = np.array(sorted(keep), dtype=int)
    return G.subgraph_edges(keep)
