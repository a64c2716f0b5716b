"""Compare the annealing heat path with barrier central paths.

The heat path is the curve of means of exp(-theta_hat^T x / t) as the
temperature t falls; a central path is the curve of minimizers of
t_b * theta_hat^T x + phi(x) for a barrier phi.  With the entropic
barrier the two curves coincide; with other barriers they need not, and
the comparison quantifies the difference.

Temperatures here are annealing temperatures throughout: the barrier
drivers are called at the reciprocal, so rows with equal ``t`` are
directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import boltzmann, ipm
from .bodies import ConvexBody
from .boltzmann import BoltzmannParams
from .walker import make_chain_state, run_chain


class GridMismatchError(ValueError):
    """Raised when two paths were sampled on different temperature grids."""


@dataclass(frozen=True)
class PathPoint:
    """One path sample: temperature, location, provenance, and residual
    against the counterpart path (filled in by :func:`compare_paths`)."""

    t: float
    x: np.ndarray
    source: str
    residual: Optional[float] = None


@dataclass(frozen=True)
class PathComparison:
    heat: list[PathPoint]
    central: list[PathPoint]
    residuals: np.ndarray
    max_residual: float


@dataclass
class SampledHeatConfig:
    steps: int = 20000
    burn_in: int = 2000
    thin: int = 10
    seed: int = 0


def default_temperature_grid(body: ConvexBody, count: int = 7) -> np.ndarray:
    """Log-spaced annealing temperatures from 2R down to R/50."""
    return np.geomspace(2.0 * body.R, body.R / 50.0, count)


def heat_path(body: ConvexBody, theta_hat, temperatures,
              mode: str = "quadrature",
              sampler: SampledHeatConfig | None = None) -> list[PathPoint]:
    """Mean of exp(-theta_hat^T x / t) at each temperature.

    "quadrature" uses the deterministic moments oracle (dims <= 3);
    "sampled" averages a long thinned Hit-and-Run chain and works in any
    dimension.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    pts: list[PathPoint] = []
    for i, t in enumerate(np.asarray(temperatures, dtype=float)):
        params = BoltzmannParams(theta_hat / t, body)
        if mode == "quadrature":
            x = boltzmann.moments(params).mean
            source = "heat"
        elif mode == "sampled":
            cfg = sampler or SampledHeatConfig()
            state = make_chain_state(body, cfg.seed, stream=i)
            run_chain(state, params, cfg.burn_in)
            trace: list[np.ndarray] = []
            run_chain(state, params, cfg.steps, record_every=cfg.thin, trace=trace)
            x = np.mean(trace, axis=0)
            source = "sampled-heat"
        else:
            raise ValueError(f"unknown mode {mode!r}")
        pts.append(PathPoint(t=float(t), x=x, source=source))
    return pts


def central_path(body: ConvexBody, theta_hat, barrier_backend, temperatures,
                 decrement_tol: float = 1e-8, max_iters: int = 200) -> list[PathPoint]:
    """Minimizer of (1/t) theta_hat^T x + phi(x) at each annealing temperature.

    Newton iterations are warm-started from the previous grid point and
    run until the decrement falls below ``decrement_tol``.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    temps = np.asarray(temperatures, dtype=float)
    pts: list[PathPoint] = []
    x = None
    hint = None
    for t in temps:
        t_b = 1.0 / t  # barrier temperature is the reciprocal
        if x is None:
            x = ipm.initial_path_point(barrier_backend, t_b * theta_hat)
        for _ in range(max_iters):
            ev = barrier_backend.evaluate(x, hint=hint)
            hint = -ev.gradient
            lam = ipm.newton_decrement(barrier_backend, x, t_b, theta_hat, ev=ev)
            if lam < decrement_tol:
                break
            state = ipm.NewtonState(x_hat=x, t=t_b, decrement=lam, k=0)
            x = ipm.damped_newton_step(barrier_backend, state, theta_hat).x_hat
        else:
            raise ipm.PathLossError(f"no centering at t={t}", epoch=0)
        pts.append(PathPoint(t=float(t), x=x.copy(), source="central"))
    return pts


def compare_paths(heat: list[PathPoint], central: list[PathPoint]) -> PathComparison:
    """Per-temperature distances between two paths on a matching grid."""
    if len(heat) != len(central):
        raise GridMismatchError("paths have different lengths")
    t_h = np.array([p.t for p in heat])
    t_c = np.array([p.t for p in central])
    if not np.allclose(t_h, t_c, rtol=1e-12, atol=0.0):
        raise GridMismatchError("temperature grids differ")
    residuals = np.array([float(np.linalg.norm(h.x - c.x)) for h, c in zip(heat, central)])
    heat_out = [PathPoint(p.t, p.x, p.source, float(r)) for p, r in zip(heat, residuals)]
    central_out = [PathPoint(p.t, p.x, p.source, float(r)) for p, r in zip(central, residuals)]
    return PathComparison(heat=heat_out, central=central_out,
                          residuals=residuals, max_residual=float(residuals.max()))


def reweighting_update(body: ConvexBody, theta, theta_prime) -> np.ndarray:
    """First-order prediction of the mean at theta' from moments at theta.

    mean(theta') ~ exp(KL(P_theta, P_theta')) * (mean(theta) - cov(theta) (theta' - theta)),
    exact to second order in theta' - theta.  The uncorrected part is the
    same quantity a Newton step on the entropic barrier would subtract.
    """
    theta = np.asarray(theta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    params = BoltzmannParams(theta, body)
    ms = boltzmann.moments(params)
    kl = boltzmann.bregman_divergence(params, theta_prime)
    return np.exp(kl) * (ms.mean - ms.covariance @ (theta_prime - theta))
