"""Solvers for the regularized subproblems f_lam(x) = ||A(x)||_op +
lam*||x - g||^2 over the cube, optionally intersected with a linear
constraint space.

Two interchangeable backends with the same additive-error contract:

* ``solve_flam`` — Frank-Wolfe on the softmax-smoothed objective, needing
  only gradients and a linear optimization oracle over the feasible set
  (``box_linopt`` for the unconstrained cube; a circulation oracle for the
  degree-preserving constraint space).  Iterates are convex combinations of
  feasible oracle outputs and the feasible start 0, so feasibility holds by
  construction.
* ``minimize_flam_smoothed`` — L-BFGS-B with smoothing continuation, the
  default high-accuracy backend at desk scale.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .operators import SpectralObjective

log = logging.getLogger(__name__)

FW_ITER_CAP = 10 ** 6


class SolverContractError(RuntimeError):
    pass


@dataclass
class FWConfig:
    """Frank-Wolfe configuration.  Fields left as None are wired from the
    target accuracy: mu = target/(3 log 2n), N = ceil(36 L / target) capped."""

    mu: float | None = None
    iters: int | None = None
    iter_cap: int = FW_ITER_CAP
    audit_stride: int | None = None
    mu_scale: float = 1.0

    def __post_init__(self):
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.iters is not None and self.iters < 1:
            raise ValueError("iteration count must be >= 1")


def box_linopt(c: np.ndarray) -> np.ndarray:
    """Exact linear minimization over the cube: z = -sign(c), ties to zero."""
    c = np.asarray(c, dtype=float)
    return -np.sign(c)


def solve_flam(obj: SpectralObjective, g, lam: float, target: float,
               linopt=None, rng=None, config: FWConfig | None = None,
               constraint: np.ndarray | None = None) -> np.ndarray:
    """Frank-Wolfe minimization of ||A(x)||_op + lam*||x-g||^2 to additive
    ``target`` over the cube (or the linopt's feasible set).

    Steps eta_t = 2/(t+1) from x_1 = 0 with z_t = linopt(grad_mu + 2 lam (x-g));
    the best iterate under periodic exact audits is returned.
    """
    if target <= 0:
        raise ValueError("target must be positive")
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    if config is None:
        config = FWConfig()
    if linopt is None:
        linopt = box_linopt
    dim = max(obj.dim, 2)
    log2n = math.log(2 * dim)
    mu = config.mu if config.mu is not None else config.mu_scale * target / (3.0 * log2n)
    if mu < 1e-12 * max(lam * m, 1.0):
        raise SolverContractError(f"smoothing underflow: mu={mu:.3g}")
    L = 1.0 / mu + 2.0 * lam * m
    N = config.iters if config.iters is not None else int(math.ceil(36.0 * L / target))
    N = min(max(N, 1), config.iter_cap)
    stride = config.audit_stride or max(N // 32, 1)

    def audit(x):
        d = x - g
        return obj.opnorm(x) + lam * float(d @ d)

    x = np.zeros(m)
    best_x, best_val = x.copy(), audit(x)
    for t in range(1, N + 1):
        _, grad = obj.value_grad(x, mu)
        z = linopt(grad + 2.0 * lam * (x - g))
        if constraint is not None:
            resid = np.max(np.abs(constraint @ z)) if constraint.size else 0.0
            if resid > 1e-8 * max(1.0, float(np.max(np.abs(constraint)))):
                raise SolverContractError(
                    f"linear oracle output violates constraints ({resid:.3g})")
        eta = 2.0 / (t + 1)
        x = (1.0 - eta) * x + eta * z
        if t % stride == 0 or t == N:
            val = audit(x)
            if val < best_val:
                best_val, best_x = val, x.copy()
    gap_bound = 12.0 * L / (N + 1)
    if gap_bound > target:
        log.debug("solve_flam: theoretical bound %.3g exceeds target %.3g "
                  "at iteration cap N=%d", gap_bound, target, N)
    return best_x


def minimize_flam_smoothed(obj: SpectralObjective, g, lam: float, tol: float,
                           x0: np.ndarray | None = None,
                           mu_floor: float = 1e-9) -> np.ndarray:
    """Quasi-Newton minimization of the smoothed objective with
    mu-continuation; the final smoothing keeps the smoothing gap below tol/2,
    so the output meets the additive-error contract at desk scale."""
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    dim = max(obj.dim, 2)
    log2n = math.log(2 * dim)
    mu_final = min(max(tol / (2.0 * log2n), mu_floor), 1.0)
    x = np.clip(g, -1.0, 1.0) if x0 is None else np.asarray(x0, dtype=float).copy()
    bounds = [(-1.0, 1.0)] * m

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
            fun, x, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": 400, "ftol": 1e-16, "gtol": 1e-12,
                     "maxcor": 20})
        x = np.clip(res.x, -1.0, 1.0)
    return x


def make_spectral_solver(obj: SpectralObjective, backend: str = "smoothed",
                         linopt=None, constraint=None,
                         config: FWConfig | None = None):
    """Solver closure with the (lam, g, tol) -> x signature the partial
    coloring engine expects."""
    if backend == "smoothed":
        state = {}

        def solver(lam, g, tol):
            x = minimize_flam_smoothed(obj, g, lam, tol, x0=state.get("x"))
            state["x"] = x.copy()
            return x
        return solver
    if backend == "frank-wolfe":
        def solver(lam, g, tol):
            return solve_flam(obj, g, lam, tol, linopt=linopt, config=config,
                              constraint=constraint)
        return solver
    raise ValueError(f"unknown backend {backend!r}")
