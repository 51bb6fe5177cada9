"""Symmetric PSD operator families and the smoothed operator-norm calculus.

An operator family holds m symmetric PSD atoms A_1..A_m of size n x n and
exposes the linear map x -> sum_i x_i A_i together with its adjoint
Y -> (<A_i, Y>)_i.  Atoms are stored either dense or in factored rank-one
form (a nonnegative scale times an outer product).  All solvers in this
package consume families through this interface only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

ABS_FLOOR = 1e-14


class DimensionError(ValueError):
    pass


class GaussianSource:
    """Deterministic stream of standard Gaussian draws.

    Identical (seed, stream) pairs yield identical draws; distinct streams
    are statistically independent.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.default_rng([self.seed, self.stream])

    def standard(self, size):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def choice(self, a, size=None, replace=True, p=None):
        return self._gen.choice(a, size=size, replace=replace, p=p)

    def spawn(self, stream: int) -> "GaussianSource":
        """Fresh source with the same seed on a different stream."""
        return GaussianSource(self.seed, stream)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


@dataclass
class RankOneAtom:
    """scale * (v v^T); v may be a dense vector or a signed incidence pattern."""

    scale: float
    vector: np.ndarray
    indices: np.ndarray | None = None  # set when v is a signed incidence vector
    signs: np.ndarray | None = None


class AppliedOperator:
    """Handle for A(x): supports matvec and (at desk scale) densification."""

    def __init__(self, family: "OperatorFamily", x: np.ndarray):
        self.family = family
        self.x = x
        self.n = family.n

    def matvec(self, v: np.ndarray) -> np.ndarray:
        self.family.matvec_count += 1
        F = self.family
        if F._factors is not None:
            # A(x) v = F diag(x) F^T v
            return F._factors @ (self.x * (F._factors.T @ v))
        out = np.zeros(self.n)
        for xi, A in zip(self.x, F._dense_atoms):
            if xi != 0.0:
                out += xi * (A @ v)
        return out

    def dense(self) -> np.ndarray:
        F = self.family
        if F._factors is not None:
            scaled = F._factors * self.x
            return scaled @ F._factors.T
        out = np.zeros((self.n, self.n))
        for xi, A in zip(self.x, F._dense_atoms):
            if xi != 0.0:
                out += xi * A
        return out


class OperatorFamily:
    """m symmetric PSD atoms over R^n with the maps A(.) and A*(.)."""

    def __init__(self, n: int, dense_atoms=None, factors=None, rank_one_meta=None):
        self.n = int(n)
        self._dense_atoms = dense_atoms
        self._factors = factors  # n x m matrix; atom_i = f_i f_i^T
        self._rank_one_meta = rank_one_meta  # parallel list of RankOneAtom or None
        self.matvec_count = 0
        if (dense_atoms is None) == (factors is None):
            raise ValueError("exactly one of dense_atoms / factors required")

    # ---- constructors -------------------------------------------------

    @classmethod
    def from_dense(cls, atoms) -> "OperatorFamily":
        atoms = [np.asarray(A, dtype=float) for A in atoms]
        n = atoms[0].shape[0]
        for A in atoms:
            if A.shape != (n, n):
                raise DimensionError("atom shape mismatch")
        return cls(n, dense_atoms=atoms)

    @classmethod
    def from_rank_one(cls, n: int, scales, vectors) -> "OperatorFamily":
        """Atoms scale_i * v_i v_i^T, with v_i dense columns of an n x m array."""
        scales = np.asarray(scales, dtype=float)
        V = np.asarray(vectors, dtype=float)
        if np.any(scales < 0):
            raise ValueError("rank-one scales must be nonnegative")
        if V.shape[0] != n:
            raise DimensionError("vector length != n")
        F = V * np.sqrt(scales)[None, :]
        meta = [RankOneAtom(float(s), V[:, i].copy()) for i, s in enumerate(scales)]
        return cls(n, factors=F, rank_one_meta=meta)

    @classmethod
    def from_incidence(cls, n: int, scales, index_lists, sign_lists) -> "OperatorFamily":
        """Rank-one atoms over signed 0/±1 incidence vectors."""
        m = len(scales)
        V = np.zeros((n, m))
        meta = []
        for i in range(m):
            idx = np.asarray(index_lists[i], dtype=int)
            sg = np.asarray(sign_lists[i], dtype=int)
            V[idx, i] = sg
            meta.append(RankOneAtom(float(scales[i]), V[:, i].copy(), idx, sg))
        F = V * np.sqrt(np.asarray(scales, dtype=float))[None, :]
        return cls(n, factors=F, rank_one_meta=meta)

    # ---- basic views --------------------------------------------------

    @property
    def m(self) -> int:
        if self._factors is not None:
            return self._factors.shape[1]
        return len(self._dense_atoms)

    @property
    def is_rank_one(self) -> bool:
        return self._factors is not None

    def apply(self, x) -> AppliedOperator:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise DimensionError(f"expected x of length {self.m}, got {x.shape}")
        return AppliedOperator(self, x)

    def adjoint(self, Y: np.ndarray) -> np.ndarray:
        """A*(Y) = (<A_i, Y>)_i."""
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (self.n, self.n):
            raise DimensionError("Y must be n x n")
        if self._factors is not None:
            return np.einsum("ij,ij->j", self._factors, Y @ self._factors)
        return np.array([float(np.sum(A * Y)) for A in self._dense_atoms])

    def traces(self) -> np.ndarray:
        if self._factors is not None:
            return np.einsum("ij,ij->j", self._factors, self._factors)
        return np.array([float(np.trace(A)) for A in self._dense_atoms])

    def atom_dense(self, i: int) -> np.ndarray:
        if self._factors is not None:
            f = self._factors[:, i]
            return np.outer(f, f)
        return self._dense_atoms[i]

    def scaled(self, s) -> "OperatorFamily":
        """Family with atoms s_i * A_i, s >= 0."""
        s = np.asarray(s, dtype=float)
        if np.any(s < -ABS_FLOOR):
            raise ValueError("scales must be nonnegative")
        s = np.clip(s, 0.0, None)
        if self._factors is not None:
            fam = OperatorFamily(self.n, factors=self._factors * np.sqrt(s)[None, :],
                                 rank_one_meta=self._rank_one_meta)
            return fam
        return OperatorFamily(self.n, dense_atoms=[si * A for si, A in zip(s, self._dense_atoms)])

    def subset(self, idx) -> "OperatorFamily":
        idx = np.asarray(idx, dtype=int)
        if self._factors is not None:
            meta = None
            if self._rank_one_meta is not None:
                meta = [self._rank_one_meta[i] for i in idx]
            return OperatorFamily(self.n, factors=self._factors[:, idx], rank_one_meta=meta)
        return OperatorFamily(self.n, dense_atoms=[self._dense_atoms[i] for i in idx])

    def sum_dense(self) -> np.ndarray:
        return self.apply(np.ones(self.m)).dense()


class BlockEmbedding:
    """View of the family as diag(A_i, -A_i) atoms over 2n dimensions."""

    def __init__(self, family: OperatorFamily):
        self.family = family
        self.n2 = 2 * family.n

    def apply_dense(self, x) -> np.ndarray:
        M = self.family.apply(x).dense()
        n = self.family.n
        out = np.zeros((self.n2, self.n2))
        out[:n, :n] = M
        out[n:, n:] = -M
        return out

    def adjoint(self, Y: np.ndarray) -> np.ndarray:
        n = self.family.n
        return self.family.adjoint(Y[:n, :n]) - self.family.adjoint(Y[n:, n:])


# ---- spectral estimation ---------------------------------------------


def opnorm_estimate(family: OperatorFamily, x, c: float, delta: float,
                    rng: GaussianSource, iter_cap: int | None = None,
                    block: int = 4):
    """Scalar A with ||A(x)||_op in [(1-c)A, A] with probability >= 1-delta.

    Randomized block power iteration on A(x)^2 (the squared operator has the
    same top singular value and a one-signed spectrum).  The lower inequality
    (1-c)A <= ||A(x)||_op holds deterministically since power iteration never
    overshoots; the upper one holds with the stated probability.
    """
    if not 0.0 < c < 1.0:
        raise ValueError("c must be in (0,1)")
    x = np.asarray(x, dtype=float)
    if np.all(x == 0.0):
        return 0.0
    handle = family.apply(x)
    n = family.n
    m = max(family.m, 2)
    if iter_cap is None:
        iter_cap = int(8 * np.ceil(np.log(m / delta) / np.sqrt(c)))
    iter_cap = max(iter_cap, 4)
    b = min(block, n)
    Q = rng.standard((n, b))
    Q, _ = np.linalg.qr(Q)
    prev = 0.0
    for _ in range(iter_cap):
        Z = np.column_stack([handle.matvec(handle.matvec(Q[:, j])) for j in range(Q.shape[1])])
        norms = np.linalg.norm(Z, axis=0)
        if np.max(norms) <= ABS_FLOOR:
            return 0.0
        Q, R = np.linalg.qr(Z)
        est_sq = np.max(np.abs(np.diag(R)))
        if prev > 0 and abs(est_sq - prev) <= 0.25 * c * prev:
            prev = est_sq
            break
        prev = est_sq
    est = np.sqrt(prev)
    return float(est / (1.0 - c))


def smoothed_value_grad(family: OperatorFamily, x, mu: float):
    """Value and gradient of the softmax smoothing of ||A(x)||_op.

    value = mu * log Tr exp(Atil(x)/mu) over the signed block embedding, so
    ||A(x)||_op <= value <= ||A(x)||_op + mu*log(2n).  Computed by dense
    eigendecomposition of A(x); the spectrum is shifted by its max before
    exponentiation to avoid overflow.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float)
    M = family.apply(x).dense()
    lam, U = np.linalg.eigh(M)
    s = np.max(np.abs(lam)) if lam.size else 0.0
    ep = np.exp((lam - s) / mu)
    em = np.exp((-lam - s) / mu)
    Z = np.sum(ep) + np.sum(em)
    value = s + mu * np.log(Z)
    p = (ep - em) / Z
    S = (U * p) @ U.T
    grad = family.adjoint(S)
    return float(value), grad


def smoothed_value_grad_compressed(C: np.ndarray, x, mu: float):
    """Same as smoothed_value_grad for a rank-one family A_i = c_i c_i^T
    given as columns of C (r x m), avoiding the ambient dimension.

    Returns (value, grad) where the smoothing log(2n) constant uses r' = r
    rows as the effective dimension (callers pass the compressed rank).
    """
    x = np.asarray(x, dtype=float)
    M = (C * x) @ C.T
    lam, U = np.linalg.eigh(M)
    s = np.max(np.abs(lam)) if lam.size else 0.0
    ep = np.exp((lam - s) / mu)
    em = np.exp((-lam - s) / mu)
    Z = np.sum(ep) + np.sum(em)
    value = s + mu * np.log(Z)
    p = (ep - em) / Z
    S = (U * p) @ U.T
    grad = np.einsum("ij,ij->j", C, S @ C)
    return float(value), grad


def dense_opnorm(family: OperatorFamily, x) -> float:
    """Exact operator norm via dense eigendecomposition (desk-scale audits)."""
    M = family.apply(x).dense()
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


class SpectralObjective:
    """f(x) = ||A(x)||_op with smoothed value/gradient queries.

    Rank-one families are compressed once via SVD of the factor matrix: with
    F = U S V^T, the atoms c_i c_i^T for c_i = columns of C = S V^T have the
    same nonzero spectrum as the originals for every x, so operator norms and
    softmax-smoothed values/gradients agree (dropped zero eigenvalues only
    shrink the smoothed value, keeping the sandwich valid).  Dense families
    fall back to the ambient computation.
    """

    def __init__(self, C: np.ndarray | None = None,
                 family: OperatorFamily | None = None):
        if (C is None) == (family is None):
            raise ValueError("exactly one of C / family required")
        self.C = C
        self.family = family

    @classmethod
    def from_family(cls, F: OperatorFamily, rank_tol: float = 1e-12):
        if not F.is_rank_one:
            return cls(family=F)
        Fm = F._factors
        if Fm.shape[1] == 0:
            return cls(C=np.zeros((0, 0)))
        U, s, Vt = np.linalg.svd(Fm, full_matrices=False)
        keep = s > rank_tol * max(s[0] if s.size else 0.0, 1.0)
        C = s[keep, None] * Vt[keep]
        return cls(C=C)

    @property
    def m(self) -> int:
        return self.C.shape[1] if self.C is not None else self.family.m

    @property
    def dim(self) -> int:
        """Effective matrix dimension seen by the smoothing (for mu wiring)."""
        return self.C.shape[0] if self.C is not None else self.family.n

    def value_grad(self, x, mu: float):
        if self.C is not None:
            return smoothed_value_grad_compressed(self.C, x, mu)
        return smoothed_value_grad(self.family, np.asarray(x, dtype=float), mu)

    def opnorm(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.C is not None:
            if self.C.shape[0] == 0:
                return 0.0
            M = (self.C * x) @ self.C.T
            return float(np.max(np.abs(np.linalg.eigvalsh(M)))) if M.size else 0.0
        return dense_opnorm(self.family, x)

    def subset(self, idx) -> "SpectralObjective":
        idx = np.asarray(idx, dtype=int)
        if self.C is not None:
            return SpectralObjective(C=self.C[:, idx])
        return SpectralObjective(family=self.family.subset(idx))

    def scaled(self, s) -> "SpectralObjective":
        s = np.clip(np.asarray(s, dtype=float), 0.0, None)
        if self.C is not None:
            return SpectralObjective(C=self.C * np.sqrt(s)[None, :])
        return SpectralObjective(family=self.family.scaled(s))

    def traces(self) -> np.ndarray:
        if self.C is not None:
            return np.einsum("ij,ij->j", self.C, self.C)
        return self.family.traces()


# ---- serialization ---------------------------------------------------


def save_family(family: OperatorFamily, f) -> None:
    """Text serialization: header 'n m', then per atom either a 'dense'
    block or a 'rank1 w k i1 s1 ... ik sk' line.  Floats use %.17g so the
    round trip is bit exact."""
    close = False
    if isinstance(f, str):
        f = open(f, "w")
        close = True
    try:
        f.write(f"{family.n} {family.m}\n")
        for i in range(family.m):
            meta = None
            if family._rank_one_meta is not None:
                meta = family._rank_one_meta[i]
            if meta is not None and meta.indices is not None:
                parts = [f"rank1 {meta.scale:.17g} {len(meta.indices)}"]
                for j, sg in zip(meta.indices, meta.signs):
                    parts.append(f"{j} {sg}")
                f.write(" ".join(parts) + "\n")
            else:
                A = family.atom_dense(i)
                f.write("dense\n")
                for row in A:
                    f.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if close:
            f.close()


def load_family(f) -> OperatorFamily:
    close = False
    if isinstance(f, str):
        f = open(f)
        close = True
    try:
        header = f.readline().split()
        n, m = int(header[0]), int(header[1])
        dense_atoms = []
        incidence = []  # (scale, idx, signs) or None placeholder
        kinds = []
        for _ in range(m):
            line = f.readline().split()
            if line[0] == "dense":
                rows = [list(map(float, f.readline().split())) for _ in range(n)]
                dense_atoms.append(np.array(rows))
                kinds.append("dense")
            elif line[0] == "rank1":
                w = float(line[1])
                k = int(line[2])
                vals = list(map(int, line[3:3 + 2 * k]))
                idx = np.array(vals[0::2], dtype=int)
                sg = np.array(vals[1::2], dtype=int)
                incidence.append((w, idx, sg))
                kinds.append("rank1")
            else:
                raise ValueError(f"unknown atom kind {line[0]!r}")
        if all(k == "dense" for k in kinds):
            return OperatorFamily.from_dense(dense_atoms)
        if all(k == "rank1" for k in kinds):
            return OperatorFamily.from_incidence(
                n, [w for w, _, _ in incidence],
                [i for _, i, _ in incidence], [s for _, _, s in incidence])
        # mixed: promote everything to dense
        atoms = []
        di = ii = 0
        for k in kinds:
            if k == "dense":
                atoms.append(dense_atoms[di]); di += 1
            else:
                w, idx, sg = incidence[ii]; ii += 1
                v = np.zeros(n); v[idx] = sg
                atoms.append(w * np.outer(v, v))
        return OperatorFamily.from_dense(atoms)
    finally:
        if close:
            f.close()


def dumps_family(family: OperatorFamily) -> str:
    buf = io.StringIO()
    save_family(family, buf)
    return buf.getvalue()


def loads_family(text: str) -> OperatorFamily:
    return load_family(io.StringIO(text))
