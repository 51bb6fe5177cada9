"""Full +/-1 colorings of set systems with sub-random discrepancy.

The coloring recursion runs the two-sided partial coloring engine on the
body {x : ||A x||_inf <= rho} with rho ~ sqrt(8 n log(m/n + 2)), rounds the
near-tight coordinates to exact signs unbiasedly, freezes them, and recurses
on the remainder; once at most a handful of coordinates are active the tail
is colored exhaustively against the accumulated residual.

Two lambda-subproblem solvers are provided: a stochastic l2-l1 mirror
descent game solver (sampling rows by the simplex variable and columns by
the squared box variable) and a smoothed log-sum-exp quasi-Newton solver,
the default at desk scale.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse as sp
from scipy.special import logsumexp

from .coloring import (C_SET_DEFAULT, C_TIGHT_DEFAULT, DiscrepancyBody,
                       FrameworkError, two_sided_partial_color)
from .operators import GaussianSource

log = logging.getLogger(__name__)

GAME_ITER_CAP = 200000
EXP_CLIP = 30.0


class RoundingError(RuntimeError):
    pass


class SetSystem:
    """Sparse set-system matrix A (m sets by n elements, entries in [-1,1])
    with cached max row 2-norm R and max column sparsity k."""

    def __init__(self, A):
        A = sp.csr_matrix(A, dtype=float)
        if A.nnz and float(np.max(np.abs(A.data))) > 1.0 + 1e-12:
            raise ValueError("entries must lie in [-1, 1]")
        self.A = A
        self.m, self.n = A.shape
        sq = A.multiply(A)
        self.R = float(np.sqrt(np.max(sq.sum(axis=1)))) if A.nnz else 0.0
        self.k = int(np.max((A != 0).sum(axis=0))) if A.nnz else 0

    @classmethod
    def from_dense(cls, M) -> "SetSystem":
        return cls(sp.csr_matrix(np.asarray(M, dtype=float)))

    def disc(self, x) -> float:
        """||A x||_inf."""
        if self.A.nnz == 0:
            return 0.0
        return float(np.max(np.abs(self.A @ np.asarray(x, dtype=float))))

    def columns(self, idx) -> "SetSystem":
        return SetSystem(self.A[:, np.asarray(idx, dtype=int)])

    def row_l1_max(self) -> float:
        if self.A.nnz == 0:
            return 0.0
        return float(np.max(np.abs(self.A).sum(axis=1)))

    # ---- I/O: 'm n nnz' header then 0-based 'i j v' triples ----------

    @classmethod
    def load(cls, path) -> "SetSystem":
        with open(path) as f:
            header = f.readline().split()
            if len(header) != 3:
                raise ValueError(f"{path}:1: expected 'm n nnz'")
            m, n, nnz = (int(t) for t in header)
            rows, cols, vals = [], [], []
            for ln, line in enumerate(f, start=2):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise ValueError(f"{path}:{ln}: expected 'i j v'")
                rows.append(int(parts[0]))
                cols.append(int(parts[1]))
                vals.append(float(parts[2]))
            if len(vals) != nnz:
                raise ValueError(f"{path}: header claims {nnz} entries, "
                                 f"found {len(vals)}")
        return cls(sp.csr_matrix((vals, (rows, cols)), shape=(m, n)))

    def save(self, path) -> None:
        coo = self.A.tocoo()
        with open(path, "w") as f:
            f.write(f"{self.m} {self.n} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                f.write(f"{i} {j} {v:.17g}\n")


def spencer_radius(m: int, n: int, c_set: float = C_SET_DEFAULT) -> float:
    """c_set * sqrt(8 n log(m/n + 2)), the partial-coloring radius at which
    the body keeps constant Gaussian measure."""
    if m < 1 or n < 1:
        raise ValueError("need m, n >= 1")
    return c_set * math.sqrt(8.0 * n * math.log(m / n + 2.0))


# ---- lambda-subproblem solvers ---------------------------------------


def _linf_smoothed(A: sp.csr_matrix, x: np.ndarray, mu: float):
    """(mu*log sum exp(+-Ax/mu), gradient), a uniform mu*log(2m) upper
    smoothing of ||Ax||_inf."""
    y = A @ x
    t = np.concatenate([y, -y]) / mu
    val = mu * float(logsumexp(t))
    p = np.exp(t - np.max(t))
    p /= np.sum(p)
    mrows = A.shape[0]
    return val, A.T @ (p[:mrows] - p[mrows:])


def make_linf_solver(system: SetSystem, mu_floor: float = 1e-9):
    """Smoothed (lam, g, tol) -> x closure for the coloring engine."""
    A = system.A
    n = system.n
    twom = max(2 * system.m, 2)
    state = {}

    def solver(lam, g, tol):
        g = np.asarray(g, dtype=float)
        mu_final = min(max(tol / (2.0 * math.log(twom)), mu_floor), 1.0)
        x = state.get("x")
        if x is None:
            x = np.clip(g, -1.0, 1.0)
        bounds = [(-1.0, 1.0)] * n

        mus = []
        mu = max(mu_final, 0.05 * max(system.R, 1.0))
        while mu > mu_final * 1.0001:
            mus.append(mu)
            mu = max(mu / 5.0, mu_final)
        mus.append(mu_final)
        for mu in mus:
            def fun(xv, mu=mu):
                v, gr = _linf_smoothed(A, xv, mu)
                d = xv - g
                return v + lam * float(d @ d), gr + 2.0 * lam * d

            res = scipy.optimize.minimize(
                fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
                options={"maxiter": 400, "ftol": 1e-16, "gtol": 1e-12,
                         "maxcor": 20})
            x = np.clip(res.x, -1.0, 1.0)
        state["x"] = x.copy()
        return x
    return solver


@dataclass
class GameResult:
    x: np.ndarray
    value: float
    rep_values: list
    iters: int
    p_distortion: float = 0.0


def l2l1_game_solve(system: SetSystem, v, lam: float, eps: float, delta: float,
                    rng: GaussianSource, c_T: float = 8.0,
                    iter_cap: int = GAME_ITER_CAP) -> GameResult:
    """x in [-1,1]^n with ||Ax||_inf + lam*||x - v||^2 within eps of optimal
    with probability >= 1 - delta.

    Stochastic mirror descent on the minimax form over the rescaled box
    [-1/sqrt(n), 1/sqrt(n)]^n and the simplex over the +-row concatenation:
    the simplex player samples a row by its own weight, the box player
    samples a column with probability x_j^2/||x||^2, giving the unbiased
    estimator (row_i, -col_j * x_j/p_j).  Independent repetitions keep the
    best audited objective value.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0,1)")
    v = np.asarray(v, dtype=float)
    A = system.A
    m, n = system.m, system.n
    if v.shape != (n,):
        raise ValueError("center dimension mismatch")
    Acsc = A.tocsc()
    sqrt_n = math.sqrt(n)
    R = system.R
    L = max(R * sqrt_n, 1e-9)
    theta = math.log(max(2 * m, 2))
    T = int(math.ceil(c_T * n * R * R * theta / (eps * eps))) if R > 0 else 64
    if T > iter_cap:
        log.warning("game solver iteration count %d capped at %d", T, iter_cap)
        T = min(T, iter_cap)
    T = max(T, 16)
    eta_x = 1.0 / (L * math.sqrt(T) + 4.0 * lam * n + 1e-12)
    eta_y = math.sqrt(theta / T) / L
    box = 1.0 / sqrt_n

    def objective(xf):
        d = xf - v
        return system.disc(xf) + lam * float(d @ d)

    reps = int(math.ceil(math.log2(1.0 / delta))) + 1
    rep_values = []
    best_x, best_val = None, math.inf
    for rep in range(reps):
        gen = rng.spawn(7000 + rep).generator
        x = np.zeros(n)
        y = np.full(2 * m, 1.0 / max(2 * m, 1))
        xbar = np.zeros(n)
        for _ in range(T):
            xbar += x
            # simplex player's sample: a signed row of sqrt(n)*A
            gx = 2.0 * lam * n * x - 2.0 * lam * sqrt_n * v
            if m > 0 and A.nnz:
                i = int(gen.choice(2 * m, p=y))
                sign = 1.0 if i < m else -1.0
                row = A.getrow(i % m)
                gx_row = np.zeros(n)
                gx_row[row.indices] = sign * sqrt_n * row.data
                gx = gx + gx_row
            x = np.clip(x - eta_x * gx, -box, box)
            # box player's sample: a column scaled by x_j / p_j
            nx2 = float(x @ x)
            if m > 0 and A.nnz and nx2 > 0:
                p = x * x / nx2
                j = int(gen.choice(n, p=p))
                if x[j] != 0.0:
                    col = Acsc.getcol(j)
                    upd = np.zeros(2 * m)
                    scale = sqrt_n * x[j] / p[j]
                    upd[col.indices] = scale * col.data
                    upd[m + col.indices] = -scale * col.data
                    y = y * np.exp(np.clip(eta_y * upd, -EXP_CLIP, EXP_CLIP))
                    y /= np.sum(y)
        xf = np.clip(sqrt_n * xbar / T, -1.0, 1.0)
        val = objective(xf)
        rep_values.append(val)
        if val < best_val:
            best_val, best_x = val, xf
    return GameResult(x=best_x, value=best_val, rep_values=rep_values, iters=T)


def make_game_solver(system: SetSystem, delta: float, rng: GaussianSource,
                     c_T: float = 8.0, iter_cap: int = GAME_ITER_CAP):
    def solver(lam, g, tol):
        return l2l1_game_solve(system, np.asarray(g, dtype=float), lam,
                               max(tol, 1e-6), delta, rng, c_T=c_T,
                               iter_cap=iter_cap).x
    return solver


# ---- rounding --------------------------------------------------------


def round_near_tight(system: SetSystem, x, S, rng: GaussianSource,
                     slack_bound: float, c_h: float = 4.0,
                     retries: int = 8) -> np.ndarray:
    """Unbiased rounding of the near-tight set S: x'_i is sign(x_i) or
    2x_i - sign(x_i), each with probability 1/2, so at least |S|/3 land at
    exact +-1 w.h.p. while Hoeffding keeps ||A(x'-x)||_inf <= c_h*sqrt(n)
    (audited; fresh coin flips up to ``retries`` times on violation)."""
    x = np.asarray(x, dtype=float)
    S = np.asarray(S, dtype=int)
    slack = np.minimum(np.abs(1.0 - x[S]), np.abs(1.0 + x[S]))
    if S.size and float(np.max(slack)) > slack_bound + 1e-12:
        raise ValueError("near-tight slack precondition violated")
    budget = c_h * math.sqrt(max(system.n, 1))
    signs = np.where(x[S] >= 0.0, 1.0, -1.0)
    for _ in range(max(retries, 1)):
        coin = rng.uniform(size=S.size) < 0.5
        xs = np.where(coin, signs, 2.0 * x[S] - signs)
        xp = x.copy()
        xp[S] = xs
        if system.disc(xp - x) <= budget:
            return xp
    raise RoundingError(f"rounding exceeded the +-{budget:.3g} discrepancy "
                        f"budget {retries} times")


# ---- the full coloring -----------------------------------------------


@dataclass
class SpencerConfig:
    c_tight: float = C_TIGHT_DEFAULT
    c_set: float = C_SET_DEFAULT
    c_h: float = 4.0
    beta: float | None = None
    solver_backend: str = "smoothed"   # or "game"
    game_delta: float = 0.25
    retries: int = 4
    round_cap: int = 64
    exhaustive_limit: int = 8


@dataclass
class RoundRecord:
    n_active: int
    frozen: int
    rho: float
    beta: float
    contribution: float
    attempts: int = 0


@dataclass
class SpencerResult:
    x: np.ndarray                 # entries exactly +-1
    disc_inf: float
    rounds: list = field(default_factory=list)
    ok: bool = True
    seed: int | None = None


def spencer_color(system: SetSystem, rng: GaussianSource | None = None,
                  seed: int | None = None,
                  config: SpencerConfig | None = None) -> SpencerResult:
    """Full coloring by repeated partial coloring of the active coordinates.

    Per round: body f(z) = ||A_active z||_inf with radius
    c_set*sqrt(8 n_act log(m/n_act + 2)) and beta = 1/sqrt(log m), two-sided
    partial coloring, unbiased rounding of the near-tight set, freezing of
    the exact +-1 coordinates.  At <= ``exhaustive_limit`` active coordinates
    the tail minimizes the total discrepancy against the accumulated partial
    coloring exhaustively.  On persistent round failure the remaining
    coordinates take their partial-coloring signs and the result is flagged.
    """
    if config is None:
        config = SpencerConfig()
    if rng is None:
        rng = GaussianSource(seed if seed is not None else 0)
    m, n = system.m, system.n
    x_final = np.zeros(n)
    active = np.arange(n)
    rounds: list[RoundRecord] = []
    ok = True

    beta_default = (config.beta if config.beta is not None
                    else 1.0 / math.sqrt(max(math.log(max(m, 2)), 1.0)))
    beta_default = min(beta_default, 0.9)

    while active.size > config.exhaustive_limit:
        if len(rounds) >= config.round_cap:
            ok = False
            log.warning("round budget exhausted with %d active", active.size)
            break
        sub = system.columns(active)
        n_act = active.size
        rho = spencer_radius(m, n_act, config.c_set)
        theta = max(sub.row_l1_max(), rho * (1.0 + 1e-9))
        beta = beta_default
        body = DiscrepancyBody(m=n_act, rho=rho, theta=theta, value=sub.disc)
        if config.solver_backend == "game":
            solver = make_game_solver(sub, config.game_delta,
                                      rng.spawn(900 + len(rounds)))
        else:
            solver = make_linf_solver(sub)
        required = max(1, int(math.floor(config.c_tight * n_act / 4.0)))

        rec = RoundRecord(n_active=n_act, frozen=0, rho=rho, beta=beta,
                          contribution=0.0)
        xp = None
        pc = None
        for attempt in range(config.retries):
            rec.attempts += 1
            try:
                pc = two_sided_partial_color(body, beta, solver, rng=rng,
                                             c_tight=config.c_tight)
            except FrameworkError as e:
                log.debug("spencer round attempt failed: %s", e)
                continue
            S = np.flatnonzero(pc.near_tight)
            if S.size < required:
                continue
            try:
                xp = round_near_tight(sub, pc.x, S, rng, beta,
                                      c_h=config.c_h)
            except RoundingError as e:
                log.debug("rounding failed: %s", e)
                continue
            break
        if xp is None:
            # best effort: freeze every remaining coordinate at its sign
            ok = False
            pc_x = pc.x if pc is not None else rng.standard(n_act)
            xs = np.where(np.asarray(pc_x) >= 0.0, 1.0, -1.0)
            z = np.zeros(n)
            z[active] = xs
            x_final[active] = xs
            rec.frozen = n_act
            rec.contribution = system.disc(z)
            rounds.append(rec)
            active = np.array([], dtype=int)
            break

        frozen = np.abs(xp) == 1.0
        z = np.zeros(n)
        z[active[frozen]] = xp[frozen]
        x_final[active[frozen]] = xp[frozen]
        rec.frozen = int(np.sum(frozen))
        rec.contribution = system.disc(z)
        rounds.append(rec)
        if rec.frozen == 0:
            ok = False
            log.warning("round froze no coordinates; stopping early")
            break
        active = active[~frozen]

    if active.size:
        # exhaustive tail against the accumulated residual
        best, best_d = None, math.inf
        base = x_final.copy()
        for signs in itertools.product((-1.0, 1.0), repeat=active.size):
            base[active] = signs
            d = system.disc(base)
            if d < best_d:
                best_d, best = d, np.array(signs)
        x_final[active] = best
        rounds.append(RoundRecord(n_active=active.size, frozen=active.size,
                                  rho=0.0, beta=0.0, contribution=best_d))

    x_final[x_final == 0.0] = 1.0      # isolated columns never got pressure
    disc = system.disc(x_final)
    return SpencerResult(x=x_final, disc_inf=disc, rounds=rounds, ok=ok,
                         seed=seed)
