"""Simulated annealing on a membership oracle, with pluggable cooling rates.

The driver runs a main Hit-and-Run chain plus a pool of replica chains
per epoch.  Replica endpoints re-estimate the direction covariance for
the next, colder epoch, so the walk stays shaped like the target as it
concentrates.  Two named cooling rates are provided:

* ``classic``: shrink factor 1 - 1/sqrt(n),
* ``entropic``: shrink factor 1 - 1/(4 sqrt(nu)), where nu is a barrier
  parameter for the body (at most about n, often much smaller), giving
  proportionally fewer epochs.

The driver never evaluates a barrier; nu enters only through the rate.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import boltzmann
from .bodies import ConvexBody, estimate_diameter
from .boltzmann import BoltzmannParams
from .records import PathPoint
from .walker import (
    ChainState,
    WalkStats,
    advance_states,
    covariance_sqrt,
    make_chain_state,
    regularize_covariance,
    run_chain,
    with_covariance,
)

DEFAULT_EPS = 0.05


def default_nu(body: ConvexBody) -> float:
    """Barrier-parameter default: n, matching the universal bound for any body."""
    return float(body.n)


@dataclass(frozen=True)
class Schedule:
    """Geometric temperature schedule t_k = t1 * shrink^(k-1), k = 1..epochs."""

    kind: str
    t1: float
    shrink: float
    epochs: int
    nu: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.shrink < 1.0):
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.t1 <= 0.0:
            raise ValueError("t1 must be positive")

    def temperatures(self) -> np.ndarray:
        return self.t1 * self.shrink ** np.arange(self.epochs)


def make_schedule(kind: str, body: ConvexBody, objective, eps: float,
                  nu: Optional[float] = None, t1: Optional[float] = None,
                  shrink: Optional[float] = None) -> Schedule:
    """Build a schedule whose epoch count certifies an eps-accurate endpoint.

    The epoch count is the least k with t1 * shrink^k <= eps / nu_eff,
    where nu_eff is nu when known and n otherwise (the certified gap at
    temperature t is nu_eff * t).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    np.asarray(objective, dtype=float)  # shape errors surface early
    n = body.n
    if t1 is None:
        t1 = estimate_diameter(body)
    if kind == "classic":
        shrink = 1.0 - 1.0 / math.sqrt(n)
        nu_eff = float(n)
    elif kind == "entropic":
        if nu is None:
            nu = default_nu(body)
        shrink = 1.0 - 1.0 / (4.0 * math.sqrt(nu))
        nu_eff = float(nu)
    elif kind == "custom":
        if shrink is None:
            raise ValueError("custom schedules need an explicit shrink factor")
        nu_eff = float(nu) if nu is not None else float(n)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")

    threshold = eps / nu_eff
    if threshold >= t1:
        warnings.warn("eps is reachable without cooling; returning a zero-epoch schedule")
        return Schedule(kind=kind, t1=t1, shrink=shrink, epochs=0, nu=nu)
    # least k with t1 * shrink^k <= threshold, robust to float rounding
    k = max(0, math.ceil(math.log(threshold / t1) / math.log(shrink)))
    while t1 * shrink**k > threshold:
        k += 1
    while k > 0 and t1 * shrink ** (k - 1) <= threshold:
        k -= 1
    return Schedule(kind=kind, t1=t1, shrink=shrink, epochs=k, nu=nu)


@dataclass
class SamplerConfig:
    """Knobs for the chains run inside each epoch.

    ``steps`` overrides the per-epoch chain length; otherwise it is
    c_mix * n^3 (the cubic default hides unknown constants, so desk-scale
    runs usually set ``steps`` directly).
    """

    seed: int = 0
    c_mix: float = 1.0
    steps: Optional[int] = None
    replicas: Optional[int] = None

    def resolve_steps(self, n: int) -> int:
        if self.steps is not None:
            return int(self.steps)
        return max(1, int(round(self.c_mix * n**3)))

    def resolve_replicas(self, n: int) -> int:
        if self.replicas is not None:
            return int(self.replicas)
        return max(2 * n, 64)


@dataclass
class AnnealReport:
    """Everything a run produced, plus enough context to diagnose it."""

    trajectory: list[PathPoint]
    final_x: np.ndarray
    final_gap_bound: float
    wallclock_seconds: float
    oracle_calls: int
    retries: int
    schedule: Schedule
    theta_hat: np.ndarray
    body: ConvexBody = field(repr=False)
    replica_history: list[np.ndarray] = field(default_factory=list, repr=False)
    covariance_history: list[np.ndarray] = field(default_factory=list, repr=False)


def anneal(body: ConvexBody, theta_hat, schedule: Schedule,
           config: SamplerConfig | None = None) -> AnnealReport:
    """Run the full annealing loop and return the trace.

    Per epoch k: set theta_k = theta_hat / t_k, advance the main chain
    and all replicas by N steps under the current covariance, then
    re-estimate the covariance from replica endpoints.  The main chain
    starts at the body's interior point with identity covariance.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape != (body.n,):
        raise boltzmann.DimensionMismatchError("objective dimension mismatch")
    if config is None:
        config = SamplerConfig()
    n = body.n
    steps = config.resolve_steps(n)
    m = config.resolve_replicas(n)
    nu_eff = float(schedule.nu) if schedule.nu is not None else float(n)

    stats = WalkStats()
    t_start = time.perf_counter()
    main = make_chain_state(body, config.seed, stream=0)
    replicas = [make_chain_state(body, config.seed, stream=1 + j) for j in range(m)]
    sigma = np.eye(n)

    trajectory: list[PathPoint] = []
    replica_history: list[np.ndarray] = []
    covariance_history: list[np.ndarray] = []

    for t_k in schedule.temperatures():
        params = BoltzmannParams(theta_hat / t_k, body)
        run_chain(main, params, steps, stats=stats)
        advance_states(params, replicas, steps, stats=stats)
        endpoints = np.stack([r.x for r in replicas])
        replica_history.append(endpoints)

        emp = np.cov(endpoints.T, bias=True).reshape(n, n)
        if np.linalg.matrix_rank(emp, tol=1e-12 * max(1.0, float(np.trace(emp)))) < n:
            warnings.warn("replica covariance is rank deficient; keeping previous estimate")
        else:
            sigma = regularize_covariance(emp)
        covariance_history.append(sigma.copy())
        root = covariance_sqrt(sigma)
        with_covariance(main, sigma, root)
        for r in replicas:
            with_covariance(r, sigma, root)

        trajectory.append(PathPoint(t=float(t_k), x=main.x.copy(),
                                    gap_bound=float(nu_eff * t_k)))

    wall = time.perf_counter() - t_start
    final_gap = float(nu_eff * schedule.temperatures()[-1]) if schedule.epochs else float("inf")
    return AnnealReport(
        trajectory=trajectory,
        final_x=main.x.copy(),
        final_gap_bound=final_gap,
        wallclock_seconds=wall,
        oracle_calls=stats.membership_checks,
        retries=stats.retries,
        schedule=schedule,
        theta_hat=theta_hat,
        body=body,
        replica_history=replica_history,
        covariance_history=covariance_history,
    )


@dataclass(frozen=True)
class EpochDiagnostics:
    epoch: int
    t: float
    isotropy_c: Optional[float]
    mean_error: Optional[float]
    mean_error_se_units: Optional[float]
    l2_to_previous: Optional[float]


def epoch_diagnostics(report: AnnealReport) -> list[EpochDiagnostics]:
    """Best-effort per-epoch health table against the deterministic oracle.

    For each epoch: the isotropy constant of whitened replica endpoints,
    the replica-mean error against the exact mean (absolute and in
    standard-error units), and the ratio norm between the epoch's target
    and the previous one.  Entries needing deterministic moments are None
    above 3 dimensions or when the oracle fails.
    """
    body = report.body
    rows: list[EpochDiagnostics] = []
    temps = report.schedule.temperatures()
    for k, (t_k, endpoints) in enumerate(zip(temps, report.replica_history)):
        theta_k = report.theta_hat / t_k
        iso = mean_err = se_units = l2 = None
        try:
            ms = boltzmann.moments(BoltzmannParams(theta_k, body))
            emp_mean = endpoints.mean(axis=0)
            diff = emp_mean - ms.mean
            mean_err = float(np.linalg.norm(diff))
            m = len(endpoints)
            se = np.sqrt(np.maximum(np.diag(ms.covariance), 1e-300) / m)
            se_units = float(np.max(np.abs(diff) / se))
            white = np.linalg.cholesky(np.linalg.inv(
                regularize_covariance(ms.covariance)))
            iso = boltzmann.check_isotropy(endpoints @ white, np.eye(body.n))
            if k > 0:
                l2 = boltzmann.l2_ratio_pair(
                    BoltzmannParams(report.theta_hat / temps[k - 1], body), theta_k)
        except (boltzmann.UnsupportedDimensionError, boltzmann.DiagnosticError):
            pass
        rows.append(EpochDiagnostics(epoch=k + 1, t=float(t_k), isotropy_c=iso,
                                     mean_error=mean_err, mean_error_se_units=se_units,
                                     l2_to_previous=l2))
    return rows
