"""Approximation-tolerant partial coloring via regularized binary search.

Given a symmetric convex value function f with f(0) = 0 and a radius rho,
the engine finds a point of K = {f <= rho} intersected with the cube that is
nearly as close to a Gaussian anchor g as the true projection, by binary
searching a regularization parameter lambda and aggregating approximate
minimizers of f(x) + lambda*||x - g||^2.  Running the search on both anchor
signs and keeping the run with more near-tight coordinates yields a partial
coloring suitable for recursive rounding.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import GaussianSource

log = logging.getLogger(__name__)

C_TIGHT_DEFAULT = 0.02
C_SET_DEFAULT = 2.0
ANCHOR_ATTEMPTS = 16


class FrameworkError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


@dataclass
class DiscrepancyBody:
    """K = {x : f(x) <= rho} with f symmetric, convex, f(0) = 0, 0 <= f <= theta
    on the cube; optionally intersected with {Cx = 0}."""

    m: int
    rho: float
    theta: float
    value: object            # callable x -> f(x), high accuracy
    constraint: np.ndarray | None = None

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.constraint is not None:
            C = np.atleast_2d(np.asarray(self.constraint, dtype=float))
            if C.shape[1] != self.m:
                raise ValueError("constraint width != m")
            self.constraint = C


@dataclass
class RegularizedSolveRequest:
    """One lambda-subproblem: minimize f(x) + lam*||x - g||^2 over the cube
    (and the constraint space, if any) to the stated additive accuracy."""

    lam: float
    g: np.ndarray
    additive_error: float
    constraint: np.ndarray | None = None


@dataclass
class PartialColoring:
    x: np.ndarray
    beta: float
    anchor_sign: int
    dist_sq: float
    anchor: np.ndarray | None = None

    @property
    def near_tight(self) -> np.ndarray:
        """Mask of |x_i| >= 1 - beta."""
        return np.abs(self.x) >= 1.0 - self.beta

    @property
    def neg_tight(self) -> np.ndarray:
        """Mask of x_i <= -1 + beta (the side the pipelines zero out)."""
        return self.x <= -1.0 + self.beta

    @property
    def frozen_signs(self) -> np.ndarray:
        s = np.zeros(self.x.shape[0], dtype=int)
        mask = self.near_tight
        s[mask] = np.where(self.x[mask] >= 0, 1, -1)
        return s


def check_anchor(g) -> bool:
    g = np.asarray(g, dtype=float)
    return bool(np.linalg.norm(g) <= 2.0 * math.sqrt(g.shape[0]))


def draw_anchor(m: int, rng: GaussianSource, max_attempts: int = ANCHOR_ATTEMPTS):
    for _ in range(max_attempts):
        g = rng.standard(m)
        if check_anchor(g):
            return g
    raise FrameworkError(f"anchor resampling failed {max_attempts} times")


def binary_search_partial_color(body: DiscrepancyBody, g, beta: float, solver,
                                value_query=None, rng=None,
                                c_tight: float = C_TIGHT_DEFAULT,
                                trace: list | None = None) -> np.ndarray:
    """Point of K intersect cube with ||x - g||^2 <= r_star^2 + tau,
    tau = c_tight*m*beta^2/4.

    solver(lam, g, tol) must return an additive tol-approximate minimizer of
    f(x) + lam*||x-g||^2 over the feasible set; value_query(x, c) must return
    A with f(x) in [(1-c)A, A] (defaults to the exact body value).
    """
    g = np.asarray(g, dtype=float)
    m = body.m
    if g.shape != (m,):
        raise ValueError("anchor dimension mismatch")
    if not check_anchor(g):
        raise FrameworkError("anchor fails the norm check; resample")
    rho, theta = body.rho, body.theta
    tau = c_tight * m * beta * beta / 4.0
    c = tau / (64.0 * m)
    if value_query is None:
        value_query = lambda x, _c: float(body.value(x))

    def record(**kw):
        log.debug("binary_search %s", kw)
        if trace is not None:
            trace.append(kw)

    def finish(x, reason):
        V = value_query(x, c)
        if V > rho * (1.0 + 2.0 * c) + 1e-12:
            raise FrameworkError(
                f"returned point infeasible: value {V:.6g} > rho {rho:.6g}",
                diagnostics={"reason": reason})
        record(event="return", reason=reason, value=V)
        return x

    lam_lo = rho / (8.0 * m)
    lam_hi = max(4.0 * theta / tau, lam_lo * (1.0 + c) ** 2)
    step = math.log1p(c)
    n_int = max(int(math.ceil(math.log(lam_hi / lam_lo) / step)), 2)

    def grid(j: int) -> float:
        return lam_lo * math.exp(j * step)

    # initialization: the low endpoint is always on the feasible side, the
    # clipped anchor (or a high-lambda solve under constraints) on the other
    x = solver(lam_lo, g, lam_lo * tau / 4.0)
    A = value_query(x, c)
    if body.constraint is None:
        xp = np.clip(g, -1.0, 1.0)
    else:
        xp = solver(grid(n_int), g, grid(n_int) * tau / 4.0)
    Ap = value_query(xp, c)
    record(event="init", A=A, Ap=Ap, lam_lo=lam_lo, lam_hi=lam_hi, n_int=n_int)
    if Ap <= (1.0 + c) * rho:
        return finish(xp / (1.0 + c), "anchor_feasible")
    if A > rho:
        x = solver(lam_lo, g, lam_lo * tau / 8.0)
        A = value_query(x, c)
        if A > rho:
            raise FrameworkError(
                f"low-endpoint value {A:.6g} exceeds rho {rho:.6g}",
                diagnostics={"A": A, "rho": rho})

    T_cap = int(math.ceil(4.0 * (math.log2(1.0 / beta)
                                 + math.log2(max(math.log2(max(theta / rho, 2.0)), 1.0))
                                 + 8.0)))
    j_lo, j_hi = 0, n_int
    calls = 0
    while j_hi - j_lo > 1:
        j_t = (j_lo + j_hi) // 2
        lam_t = grid(j_t)
        xt = solver(lam_t, g, lam_t * tau / 4.0)
        At = value_query(xt, c)
        calls += 1
        record(event="test", j=j_t, lam=lam_t, A_test=At, calls=calls)
        if calls == T_cap:
            log.warning("binary search exceeded call cap T=%d (continuing)", T_cap)
        if rho <= At <= (1.0 + c) * rho:
            return finish(xt / (1.0 + c), "drag_down")
        if At < rho:
            j_lo, x, A = j_t, xt, At
        else:
            j_hi, xp, Ap = j_t, xt, At

    lam, lamp = grid(j_lo), grid(j_hi)
    if lamp >= (1.0 + tau / (10.0 * m)) * lam:
        # only reachable through accumulated rounding; refresh both endpoints
        # once at doubled accuracy before aggregating
        x = solver(lam, g, lam * tau / 8.0)
        A = value_query(x, c)
        xp = solver(lamp, g, lamp * tau / 8.0)
        Ap = value_query(xp, c)
    if Ap <= A:
        raise FrameworkError("aggregation endpoints inverted",
                             diagnostics={"A": A, "Ap": Ap})
    alpha = 1.0 - (rho - A) / (Ap - A)
    if not -1e-12 <= alpha <= 1.0 + 1e-12:
        raise FrameworkError(f"aggregation weight {alpha} outside [0,1]")
    alpha = min(max(alpha, 0.0), 1.0)
    record(event="aggregate", alpha=alpha, A=A, Ap=Ap)
    return finish(alpha * x + (1.0 - alpha) * xp, "aggregate")


def two_sided_partial_color(body: DiscrepancyBody, beta: float, solver,
                            value_query=None, rng: GaussianSource | None = None,
                            c_tight: float = C_TIGHT_DEFAULT,
                            anchor=None) -> PartialColoring:
    """Run the binary search on g and -g; keep the run with more coordinates
    at the -1 side (the negated run is sign-flipped back, which is feasible
    since f and the feasible set are symmetric)."""
    if anchor is not None:
        g = np.asarray(anchor, dtype=float)
    else:
        if rng is None:
            raise ValueError("need an rng or an explicit anchor")
        g = draw_anchor(body.m, rng)

    errors = []
    candidates = []
    for sign in (1, -1):
        try:
            y = binary_search_partial_color(body, sign * g, beta, solver,
                                            value_query, rng, c_tight)
        except FrameworkError as e:
            errors.append((sign, e))
            continue
        x = sign * y          # map the -g run back so tight coords sit at -1
        count = int(np.sum(x <= -1.0 + beta))
        dist = float(np.sum((y - sign * g) ** 2))
        candidates.append((count, sign, x, dist))
    if not candidates:
        raise FrameworkError("both anchor signs failed",
                             diagnostics={"errors": [str(e) for _, e in errors]})
    count, sign, x, dist = max(candidates, key=lambda t: t[0])
    log.debug("two_sided: chose sign %d with %d/%d neg-tight", sign, count, body.m)
    return PartialColoring(x=x, beta=beta, anchor_sign=sign, dist_sq=dist, anchor=g)
