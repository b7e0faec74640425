"""Gradient-based solver for equality-constrained problems with bounds.

The solve contract is what matters to callers: the reported status is
``converged`` only when the KKT stationarity residual and the maximum
constraint violation both sit below their tolerances, measured here
with our own multiplier estimate rather than trusting the backend.
Everything is deterministic: same inputs, same iterates, same report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import (SR1, Bounds, NonlinearConstraint, minimize)

from . import fad


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 3000
    tol_kkt: float = 1e-6
    tol_feas: float = 1e-6
    derivative_mode: str = "ad"  # "ad" (forward-mode dual numbers) or "fd"
    fd_step: float = 1e-6
    verbose: bool = False


@dataclass(eq=False)
class SolverReport:
    x: np.ndarray
    cost: float
    status: str  # "converged" | "infeasible" | "max-iter"
    iterations: int
    kkt_residual: float
    constraint_violation: float
    worst_family: Optional[str]
    message: str = ""


class CallableNLP:
    """NLP defined by dual-safe cost and constraint callables.

    ``cost`` maps y to a scalar and ``cons`` to an equality-residual
    vector (may be empty); both must run on plain arrays and on
    ``fad.Dual`` seeds so derivatives can be taken in forward mode.
    """

    def __init__(self, cost: Callable, cons: Callable, lb, ub, families=None):
        self.cost = cost
        self.cons = cons
        self.lb = np.asarray(lb, dtype=float)
        self.ub = np.asarray(ub, dtype=float)
        m = np.asarray(cons(self.lb * 0.0 + (self.lb + self.ub) / 2.0)).size
        self.n_cons = m
        self.families = families or ((("constraints", slice(0, m)),) if m
                                     else ())

    @property
    def dim(self):
        return self.lb.size

    def value(self, y):
        return float(fad.value(self.cost(y))), np.atleast_1d(
            fad.value(self.cons(y)))

    def value_and_derivatives(self, y):
        yd = fad.seed(np.asarray(y, dtype=float))
        c = self.cost(yd)
        g = self.cons(yd)
        cost = float(fad.value(c))
        grad = (c.dot.reshape(-1).copy() if isinstance(c, fad.Dual)
                else np.zeros(y.size))
        cons = np.atleast_1d(fad.value(g))
        if isinstance(g, fad.Dual):
            jac = g.dot.T.copy()
        else:
            jac = np.zeros((cons.size, y.size))
        return cost, grad, cons, jac


def central_differences(value_fn, y, step=1e-6):
    """Central-difference gradient and Jacobian of (cost, cons)."""
    y = np.asarray(y, dtype=float)
    f0, c0 = value_fn(y)
    grad = np.zeros(y.size)
    jac = np.zeros((c0.size, y.size))
    for i in range(y.size):
        h = step * max(1.0, abs(y[i]))
        e = np.zeros(y.size)
        e[i] = h
        fp, cp = value_fn(y + e)
        fm, cm = value_fn(y - e)
        grad[i] = (fp - fm) / (2 * h)
        jac[:, i] = (cp - cm) / (2 * h)
    return grad, jac


class _Cache:
    """Memoizes the last few evaluations keyed by the iterate bytes."""

    def __init__(self, problem, options):
        self.problem = problem
        self.options = options
        self.values = {}
        self.derivs = {}
        self.n_evals = 0

    def _key(self, y):
        return np.asarray(y, dtype=float).tobytes()

    def value(self, y):
        k = self._key(y)
        if k not in self.values:
            if len(self.values) > 64:
                self.values.clear()
            self.values[k] = self.problem.value(np.asarray(y, dtype=float))
            self.n_evals += 1
        return self.values[k]

    def derivatives(self, y):
        k = self._key(y)
        if k not in self.derivs:
            if len(self.derivs) > 16:
                self.derivs.clear()
            y = np.asarray(y, dtype=float)
            if self.options.derivative_mode == "fd":
                grad, jac = central_differences(
                    lambda z: self.value(z), y, self.options.fd_step)
                cost, cons = self.value(y)
            else:
                cost, grad, cons, jac = self.problem.value_and_derivatives(y)
                self.values[self._key(y)] = (cost, cons)
            self.derivs[k] = (grad, jac)
        return self.derivs[k]


def kkt_residual(grad, jac, x, lb, ub, active_tol=1e-8):
    """Stationarity residual with least-squares multiplier estimate.

    Equality multipliers are fit to minimize the Lagrangian gradient;
    bound multipliers are implied: coordinates pinned at a bound only
    count when the residual pushes into the feasible box.
    """
    if jac.size:
        lam, *_ = np.linalg.lstsq(jac.T, -grad, rcond=None)
        r = grad + jac.T @ lam
    else:
        r = grad.copy()
    scale = max(1.0, float(np.abs(grad).max()))
    out = 0.0
    for i in range(x.size):
        tol_i = active_tol * max(1.0, abs(x[i]))
        at_lo = x[i] - lb[i] <= tol_i
        at_hi = ub[i] - x[i] <= tol_i
        if at_lo and at_hi:
            continue
        if at_lo:
            out = max(out, max(0.0, -r[i]))
        elif at_hi:
            out = max(out, max(0.0, r[i]))
        else:
            out = max(out, abs(r[i]))
    return out / scale


def _worst_family(problem, cons):
    worst, name = 0.0, None
    for fam, sl in getattr(problem, "families", ()):
        v = float(np.abs(cons[sl]).max()) if cons[sl].size else 0.0
        if v > worst:
            worst, name = v, fam
    return worst, name


def _variable_scales(lb, ub):
    """Per-coordinate scales so all variables move on comparable units."""
    scales = np.ones(lb.size)
    finite = np.isfinite(lb) & np.isfinite(ub)
    scales[finite] = np.maximum((ub[finite] - lb[finite]) / 4.0, 1e-3)
    return scales


def solve_nlp(problem, x0, options: SolverOptions = SolverOptions()):
    """Minimize problem.cost subject to problem.cons(y) = 0 and bounds.

    Internally the variables are rescaled by a quarter of their bound
    range, so radians, meters and densities present comparable steps to
    the quasi-Newton model.  KKT stationarity is measured in the scaled
    coordinates, relative to the cost gradient magnitude.
    """
    cache = _Cache(problem, options)
    x0 = np.clip(np.asarray(x0, dtype=float), problem.lb, problem.ub)
    s = _variable_scales(problem.lb, problem.ub)

    def to_y(z):
        return z * s

    constraints = []
    if getattr(problem, "n_cons", None) is None:
        problem.n_cons = cache.value(x0)[1].size
    if problem.n_cons:
        constraints.append(NonlinearConstraint(
            lambda z: cache.value(to_y(z))[1], 0.0, 0.0,
            jac=lambda z: cache.derivatives(to_y(z))[1] * s))

    lb_z, ub_z = problem.lb / s, problem.ub / s

    def kkt_scaled(y):
        grad, jac = cache.derivatives(y)
        return kkt_residual(grad * s, jac * s, y / s, lb_z, ub_z)

    tick = {"count": 0}

    def early_stop(zk, state):
        # our own periodic convergence test; the backend's gtol is
        # disabled because its barrier-path optimality reaches zero
        # while bound-active coordinates are still mu away from their
        # bound
        tick["count"] += 1
        if tick["count"] % 5 or tick["count"] < 10:
            return False
        y = to_y(zk)
        key = cache._key(y)
        if key not in cache.derivs or key not in cache.values:
            return False
        _, cons = cache.values[key]
        viol = float(np.abs(cons).max()) if cons.size else 0.0
        if viol > 0.5 * options.tol_feas:
            return False
        return kkt_scaled(y) <= 0.5 * options.tol_kkt

    scipy_options = {
        "maxiter": options.max_iter,
        "gtol": 0.0,
        "xtol": 1e-12,
        "barrier_tol": 1e-12,
        "verbose": 3 if options.verbose else 0,
    }
    if constraints:
        # dense SVD projections stay well defined when constraint rows
        # go dependent (flat-orientation rows do, near feasibility)
        scipy_options["factorization_method"] = "SVDFactorization"
    if hasattr(problem, "hessian"):
        # Gauss-Newton curvature of the sum-of-squares cost, rescaled
        hess = lambda z: (problem.hessian(to_y(z)) * s) * s[:, None]
    else:
        hess = SR1()
    res = minimize(
        lambda z: cache.value(to_y(z))[0], x0 / s,
        jac=lambda z: cache.derivatives(to_y(z))[0] * s,
        hess=hess,
        bounds=Bounds(lb_z, ub_z),
        constraints=constraints,
        method="trust-constr",
        callback=early_stop,
        options=scipy_options)

    x = np.clip(to_y(res.x), problem.lb, problem.ub)
    cost, cons = cache.value(x)
    viol = float(np.abs(cons).max()) if cons.size else 0.0
    kkt = kkt_scaled(x)
    worst_viol, worst_family = _worst_family(problem, cons)

    if viol <= options.tol_feas and kkt <= options.tol_kkt:
        status = "converged"
    elif viol > options.tol_feas:
        status = "infeasible"
    else:
        status = "max-iter"
    return SolverReport(
        x=x, cost=cost, status=status, iterations=int(res.niter),
        kkt_residual=kkt, constraint_violation=viol,
        worst_family=worst_family if status == "infeasible" else None,
        message=str(res.message))
