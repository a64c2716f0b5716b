"""Barrier abstraction and damped-Newton path following.

Three interchangeable backends drive the same path follower:

* ``LogBarrier``: the explicit logarithmic barrier of an H-polytope
  (also covers boxes and simplices through their halfspace form).
* ``EntropicBarrier``: the Fenchel conjugate of the log-partition
  function, reflected onto the body.  Values and derivatives come from
  the dual parameter theta(x) solved numerically, so it works for any
  body the deterministic moments oracle covers (dims <= 3).
* a sampled mode (``sampled_newton_step``) that replaces exact moments
  with Hit-and-Run estimates, needing only a membership oracle.

Orientation is fixed by one identity: the mean of exp(-theta^T x) on K
minimizes theta^T x + phi(x) for the entropic phi.  Everything else
(grad phi(x) = -theta(x), central-path condition grad phi = -t*theta_hat)
is derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import boltzmann
from .bodies import ConvexBody, NotInteriorError, boundary_margin, contains
from .boltzmann import BoltzmannParams
from .walker import WalkStats, make_chain_state, sample_batch

BOUNDARY_MARGIN = 1e-12

DEFAULT_PATH_C = 1.0 / 20.0
DECREMENT_LIMIT = 1.0 / 3.0
TOL_DUAL = 1e-8


class NumericalError(RuntimeError):
    """Raised when a Hessian cannot be factored even after regularization."""


class PathLossError(RuntimeError):
    """Raised when the follower's decrement leaves the certified region."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class DualSolveError(RuntimeError):
    """Raised when the dual-parameter solve stalls; carries the best iterate."""

    def __init__(self, message: str, best_theta: np.ndarray):
        super().__init__(message)
        self.best_theta = best_theta


@dataclass(frozen=True)
class BarrierEval:
    """Value, gradient, and Hessian of a barrier at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def local_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(max(v @ self.hessian @ v, 0.0)))

    def dual_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(max(v @ _solve_pd(self.hessian, v), 0.0)))


@dataclass(frozen=True)
class NewtonState:
    """One path-follower iterate: point, temperature, decrement, epoch."""

    x_hat: np.ndarray
    t: float
    decrement: float
    k: int


def _solve_pd(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    ridge = 1e-12 * max(float(np.trace(H)) / n, 1e-300)
    try:
        cf = scipy.linalg.cho_factor(H + ridge * np.eye(n), lower=True)
        return scipy.linalg.cho_solve(cf, rhs)
    except scipy.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (H + H.T))
        if np.max(vals) <= 0.0:
            raise NumericalError("Hessian is not positive definite after regularization")
        vals = np.maximum(vals, 1e-12 * np.max(vals))
        return vecs @ ((vecs.T @ rhs) / vals)


class LogBarrier:
    """-sum log(b_i - a_i^T x) over the rows of an H-polytope.

    The barrier parameter is the number of halfspaces (override via
    ``nu``).  Boxes and simplices are accepted through their stored
    halfspace form.
    """

    def __init__(self, body: ConvexBody, nu: Optional[float] = None):
        if body.kind == "box":
            A = np.vstack([np.eye(body.n), -np.eye(body.n)])
            b = np.concatenate([body.hi, -body.lo])
        elif body.kind in ("hpolytope", "simplex"):
            A, b = body.A, body.b
        else:
            raise ValueError("log barrier needs a halfspace description")
        self.body = body
        self.A = A
        self.b = b
        self.nu = float(nu) if nu is not None else float(len(b))

    def evaluate(self, x, hint=None) -> BarrierEval:
        x = np.asarray(x, dtype=float)
        margins = self.b - self.A @ x
        if np.any(margins <= 1e-12):
            raise NotInteriorError("point is within 1e-12 of a facet")
        inv = 1.0 / margins
        value = float(-np.sum(np.log(margins)))
        grad = self.A.T @ inv
        hess = (self.A * inv[:, None] ** 2).T @ self.A
        return BarrierEval(value=value, gradient=grad, hessian=hess)


class EntropicBarrier:
    """Conjugate of the log-partition function, reflected onto the body.

    phi(x) = sup_theta { -theta^T x - A(theta) }, evaluated by solving
    the dual parameter theta(x) with mean(theta(x)) = x.  Then

        phi(x)      = -theta(x)^T x - A(theta(x)),
        grad phi(x) = -theta(x),
        hess phi(x) = covariance(theta(x))^{-1}.

    The default barrier parameter is 1.1 * n, a small safety factor over
    the dimension bound.  The internal dual solve runs well below the
    public default tolerance so that Newton decrements computed from
    these evaluations are trustworthy down to ~1e-9.
    """

    def __init__(self, body: ConvexBody, nu: Optional[float] = None,
                 tol_dual: float = 1e-11):
        self.body = body
        self.nu = float(nu) if nu is not None else 1.1 * body.n
        self.tol_dual = tol_dual

    def evaluate(self, x, hint=None) -> BarrierEval:
        x = np.asarray(x, dtype=float)
        if boundary_margin(self.body, x) <= BOUNDARY_MARGIN:
            raise NotInteriorError("point is within 1e-12 of the boundary")
        theta = dual_parameter_solve(self.body, x, theta_init=hint, tol=self.tol_dual)
        ms = boltzmann.moments(BoltzmannParams(theta, self.body))
        value = float(-theta @ x - ms.log_partition)
        hess = np.linalg.inv(ms.covariance)
        hess = 0.5 * (hess + hess.T)
        return BarrierEval(value=value, gradient=-theta, hessian=hess)

    def initial_point(self, theta_hat: np.ndarray) -> np.ndarray:
        # The temperature-1 center is the mean at theta_hat itself.
        return boltzmann.moments(BoltzmannParams(theta_hat, self.body)).mean


def barrier_eval(backend, x) -> BarrierEval:
    """Evaluate a barrier backend at a strictly interior point."""
    return backend.evaluate(x)


def newton_decrement(backend, x, t: float, theta_hat, ev: Optional[BarrierEval] = None) -> float:
    """lambda(x, t) = dual local norm of the gradient of t*theta_hat^T x + phi."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if ev is None:
        ev = backend.evaluate(x)
    g = t * theta_hat + ev.gradient
    y = _solve_pd(ev.hessian, g)
    return float(np.sqrt(max(g @ y, 0.0)))


def _step_inside(body: ConvexBody, x: np.ndarray, step: np.ndarray) -> np.ndarray:
    # Halve on exit from K; only numerical error can trigger this.
    for _ in range(60):
        x_new = x - step
        if contains(body, x_new):
            return x_new
        step = 0.5 * step
    raise NumericalError("could not keep the Newton step interior")


def damped_newton_step(backend, state: NewtonState, theta_hat, damping: bool = True) -> NewtonState:
    """One damped Newton update at the state's temperature.

    The iterate moves by -(1/(1+lambda)) * H^{-1} grad, where lambda is
    the decrement at entry; the returned state carries the recomputed
    decrement at the new point.  ``damping=False`` takes the raw Newton
    step (useful on quadratic test objectives, where it is exact).
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    ev = backend.evaluate(state.x_hat)
    g = state.t * theta_hat + ev.gradient
    d = _solve_pd(ev.hessian, g)
    lam = float(np.sqrt(max(g @ d, 0.0)))
    step = d / (1.0 + lam) if damping else d
    x_new = _step_inside(backend.body, state.x_hat, step)
    ev_new = backend.evaluate(x_new, hint=-ev.gradient if ev.gradient is not None else None)
    lam_new = newton_decrement(backend, x_new, state.t, theta_hat, ev=ev_new)
    return NewtonState(x_hat=x_new, t=state.t, decrement=lam_new, k=state.k)


def _center(backend, theta_hat: np.ndarray, t: float, x0: np.ndarray,
            tol: float = 1e-10, max_iters: int = 2000) -> np.ndarray:
    """Minimize t*theta_hat^T x + phi(x) by damped Newton from x0."""
    x = np.asarray(x0, dtype=float).copy()
    hint = None
    for _ in range(max_iters):
        ev = backend.evaluate(x, hint=hint)
        hint = -ev.gradient
        g = t * theta_hat + ev.gradient
        d = _solve_pd(ev.hessian, g)
        lam = float(np.sqrt(max(g @ d, 0.0)))
        if lam <= tol:
            return x
        x = _step_inside(backend.body, x, d / (1.0 + lam))
    raise NumericalError(f"centering did not reach decrement {tol}")


def initial_path_point(backend, theta_hat) -> np.ndarray:
    """A start with (numerically) zero decrement at temperature one."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if hasattr(backend, "initial_point"):
        return backend.initial_point(theta_hat)
    return _center(backend, theta_hat, 1.0, backend.body.x0)


def follow_path(backend, body: ConvexBody, theta_hat, eps: float,
                c: float = DEFAULT_PATH_C, x0=None,
                max_epochs: int = 200000) -> list[NewtonState]:
    """Trace the central path until the certified gap drops below eps.

    Temperatures grow geometrically, t_k = (1 + c/sqrt(nu))^k, with a
    single damped Newton step after each bump; the certified gap at
    temperature t is (nu + sqrt(nu)/4) / t.  Every recorded decrement
    must stay below 1/3, else the path is declared lost.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    if body is not backend.body:
        raise ValueError("backend was built for a different body")
    nu = backend.nu
    cert = nu + math.sqrt(nu) / 4.0
    x = initial_path_point(backend, theta_hat) if x0 is None else np.asarray(x0, dtype=float)
    ev = backend.evaluate(x)
    lam0 = newton_decrement(backend, x, 1.0, theta_hat, ev=ev)
    if lam0 >= 0.5:
        raise PathLossError(f"initial decrement {lam0:.3f} >= 1/2", epoch=0)
    states = [NewtonState(x_hat=x, t=1.0, decrement=lam0, k=0)]
    if cert <= eps:
        return states
    bump = 1.0 + c / math.sqrt(nu)
    t = 1.0
    for k in range(1, max_epochs + 1):
        t *= bump
        g = t * theta_hat + ev.gradient
        d = _solve_pd(ev.hessian, g)
        lam_entry = float(np.sqrt(max(g @ d, 0.0)))
        x = _step_inside(body, x, d / (1.0 + lam_entry))
        ev = backend.evaluate(x, hint=-ev.gradient)
        lam = newton_decrement(backend, x, t, theta_hat, ev=ev)
        if lam >= DECREMENT_LIMIT:
            raise PathLossError(f"decrement {lam:.3f} >= 1/3 at epoch {k}", epoch=k)
        states.append(NewtonState(x_hat=x, t=t, decrement=lam, k=k))
        if cert / t <= eps:
            return states
    raise PathLossError("epoch budget exhausted before reaching eps", epoch=max_epochs)


# -- dual parameter (membership-only barrier access) --------------------------


def dual_parameter_solve(body: ConvexBody, x, theta_init=None, tol: float = TOL_DUAL,
                         max_iters: int = 80, mode: str = "quadrature",
                         sampler: "SampledStepConfig | None" = None) -> np.ndarray:
    """Find theta with mean(theta) = x, i.e. the maximizer of -theta^T x - A(theta).

    Damped Newton on theta: the gradient of the (convex) objective
    theta^T x + A(theta) is x - mean(theta) and its Hessian is the
    covariance at theta.  In "sampled" mode moments come from Hit-and-Run
    batches and the stopping rule loosens to three standard errors.
    """
    x = np.asarray(x, dtype=float)
    if not contains(body, x) or boundary_margin(body, x) <= BOUNDARY_MARGIN:
        raise NotInteriorError("dual solve target must lie strictly inside the body")
    theta = np.zeros(body.n) if theta_init is None else np.asarray(theta_init, dtype=float).copy()
    sampled = mode == "sampled"
    if sampled:
        if sampler is None:
            sampler = SampledStepConfig()
        chains = [make_chain_state(body, sampler.seed, stream=sampler.stream_base + j)
                  for j in range(sampler.samples)]
        stats = WalkStats()
    best = (np.inf, theta.copy())
    for _ in range(max_iters):
        if sampled:
            pts = sample_batch(BoltzmannParams(theta, body), chains, sampler.steps, stats=stats)
            mean = pts.mean(axis=0)
            cov = np.cov(pts.T, bias=True).reshape(body.n, body.n)
            cov = cov + 1e-10 * max(np.trace(cov) / body.n, 1e-300) * np.eye(body.n)
            se = np.sqrt(np.diag(cov) / sampler.samples)
            done = bool(np.all(np.abs(x - mean) <= 3.0 * se))
        else:
            ms = boltzmann.moments(BoltzmannParams(theta, body))
            mean, cov = ms.mean, ms.covariance
            done = bool(np.linalg.norm(x - mean) <= tol)
        resid = float(np.linalg.norm(x - mean))
        if resid < best[0]:
            best = (resid, theta.copy())
        if done:
            return theta
        grad = x - mean
        d = _solve_pd(cov, grad)
        lam = float(np.sqrt(max(grad @ d, 0.0)))
        theta = theta - d / (1.0 + lam)
    raise DualSolveError(
        f"no convergence in {max_iters} iterations (best residual {best[0]:.3e})",
        best_theta=best[1],
    )


@dataclass
class SampledStepConfig:
    """Sampling budget for membership-only Newton steps."""

    samples: int = 2000
    steps: int = 40
    seed: int = 0
    stream_base: int = 10000
    exact_moments: bool = False
    dual_max_iters: int = 25


def sampled_newton_direction(body: ConvexBody, theta_hat, x, t: float,
                             config: SampledStepConfig):
    """Newton data at x from estimated moments: (direction, decrement, theta).

    The returned ``direction`` is Sigma_hat (t*theta_hat - theta(x)), the
    quantity subtracted (after damping) from x; with exact moments it
    equals the entropic backend's H^{-1} grad exactly.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    if config.exact_moments:
        theta = dual_parameter_solve(body, x)
        cov = boltzmann.moments(BoltzmannParams(theta, body)).covariance
    else:
        theta = dual_parameter_solve(body, x, mode="sampled", sampler=config,
                                     max_iters=config.dual_max_iters)
        chains = [make_chain_state(body, config.seed, stream=config.stream_base + 50000 + j)
                  for j in range(config.samples)]
        pts = sample_batch(BoltzmannParams(theta, body), chains, config.steps)
        cov = np.cov(pts.T, bias=True).reshape(body.n, body.n)
        cov = cov + 1e-10 * max(np.trace(cov) / body.n, 1e-300) * np.eye(body.n)
    g = t * theta_hat - theta
    direction = cov @ g
    lam = float(np.sqrt(max(g @ direction, 0.0)))
    return direction, lam, theta


def sampled_newton_step(body: ConvexBody, theta_hat, state: NewtonState,
                        config: SampledStepConfig) -> NewtonState:
    """Membership-only damped Newton update.

    Replaces the inverse Hessian with the empirical covariance at the
    current dual parameter and damps by 1/(1 + lambda_hat).  In sampled
    mode the recorded decrement is the entry estimate (recomputing it
    would double the sampling bill); with ``exact_moments`` it matches
    ``damped_newton_step`` on the entropic backend.
    """
    direction, lam, _ = sampled_newton_direction(body, theta_hat, state.x_hat, state.t, config)
    x_new = _step_inside(body, state.x_hat, direction / (1.0 + lam))
    if config.exact_moments:
        theta_new = dual_parameter_solve(body, x_new)
        cov_new = boltzmann.moments(BoltzmannParams(theta_new, body)).covariance
        g_new = state.t * theta_hat - theta_new
        lam_new = float(np.sqrt(max(g_new @ (cov_new @ g_new), 0.0)))
    else:
        lam_new = lam
    return NewtonState(x_hat=x_new, t=state.t, decrement=lam_new, k=state.k)
