"""Hit-and-Run Markov chain targeting exp(-theta^T x) restricted to a body.

Each step draws a direction from N(0, Sigma), intersects the line with
the body, and resamples the point exactly from the target's restriction
to that chord (a truncated exponential in one variable, inverted in
closed form).  Directions that fail to produce a usable chord, e.g.
because the point has drifted onto the boundary, are resampled a bounded
number of times.

Chains are deterministic functions of their seed.  ``sample_batch``
advances many chains in lockstep with vectorized geometry; each chain
still consumes only its own random stream, drawn in blocks, so results
are reproducible regardless of batching.
"""

from __future__ import annotations

import copy
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bodies import (
    ConvexBody,
    DegenerateDirectionError,
    NotInteriorError,
    _chord_bounds_batch,
    chord,
    contains,
    contains_batch,
)
from .boltzmann import BoltzmannParams

MAX_DIRECTION_RETRIES = 16

#: |s| * chord width below this is treated as a flat exponent (uniform law).
FLAT_EXPONENT = 1e-12


class ChainError(RuntimeError):
    """Raised when a chain cannot take a valid step after bounded retries."""


@dataclass
class WalkStats:
    """Counters accumulated by walker operations."""

    steps: int = 0
    membership_checks: int = 0
    retries: int = 0


@dataclass
class ChainState:
    """Mutable state of one chain: location, direction shape, and stream."""

    x: np.ndarray
    sigma: np.ndarray
    rng: np.random.Generator
    steps_taken: int = 0
    sigma_sqrt: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.sigma_sqrt is None:
            self.sigma_sqrt = covariance_sqrt(self.sigma)

    def clone(self) -> "ChainState":
        return ChainState(
            x=self.x.copy(),
            sigma=self.sigma.copy(),
            rng=copy.deepcopy(self.rng),
            steps_taken=self.steps_taken,
            sigma_sqrt=self.sigma_sqrt.copy(),
        )


def derive_rng(seed: int, stream: int) -> np.random.Generator:
    """Deterministic per-chain stream: generator of SeedSequence((seed, stream))."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(stream))))


def regularize_covariance(sigma: np.ndarray) -> np.ndarray:
    """Symmetrize and add a trace-scaled ridge so the matrix is safely PD."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    sym = 0.5 * (sigma + sigma.T)
    ridge = 1e-10 * max(np.trace(sym) / n, 1e-300)
    return sym + ridge * np.eye(n)


def covariance_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition (computed once per update)."""
    sym = regularize_covariance(sigma)
    vals, vecs = np.linalg.eigh(sym)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def make_chain_state(body: ConvexBody, seed: int, stream: int = 0,
                     x=None, sigma=None) -> ChainState:
    x = body.x0.copy() if x is None else np.asarray(x, dtype=float).copy()
    sigma = np.eye(body.n) if sigma is None else np.asarray(sigma, dtype=float)
    return ChainState(x=x, sigma=sigma, rng=derive_rng(seed, stream))


def with_covariance(state: ChainState, sigma: np.ndarray, sigma_sqrt=None) -> ChainState:
    """Swap the direction covariance on an existing chain (shared sqrt allowed)."""
    state.sigma = sigma
    state.sigma_sqrt = covariance_sqrt(sigma) if sigma_sqrt is None else sigma_sqrt
    return state


def sample_chord_position(s: float, rho_lo: float, rho_hi: float, unit: float) -> float:
    """Invert the CDF of the density ~ exp(-s*rho) on [rho_lo, rho_hi].

    ``unit`` is a Uniform[0,1) variate mapped to its exact quantile:
    exp(-s*r) = (1-U) exp(-s*rho_lo) + U exp(-s*rho_hi), solved in log
    space so arbitrarily steep exponents stay finite.  Exponents that
    are numerically flat over the chord degrade to uniform sampling.
    """
    width = rho_hi - rho_lo
    if abs(s) * width < FLAT_EXPONENT:
        return rho_lo + unit * width
    a = -s * rho_lo
    b = -s * rho_hi
    m = max(a, b)
    with np.errstate(divide="ignore"):
        logp = np.logaddexp(np.log1p(-unit) + (a - m), np.log(unit) + (b - m))
    return float(-(m + logp) / s)


def hit_and_run_step(state: ChainState, p: BoltzmannParams,
                     stats: WalkStats | None = None) -> ChainState:
    """Advance one step; the state is mutated in place and returned."""
    body = p.body
    theta = p.theta
    for _ in range(MAX_DIRECTION_RETRIES):
        z = state.rng.standard_normal(body.n)
        u = state.sigma_sqrt @ z
        unit = state.rng.random()
        try:
            ch = chord(body, state.x, u)
        except (NotInteriorError, DegenerateDirectionError):
            if stats is not None:
                stats.retries += 1
            continue
        if not np.isfinite(ch.width) or ch.width <= 0.0:
            if stats is not None:
                stats.retries += 1
            continue
        s = float(theta @ u)
        rho = sample_chord_position(s, ch.rho_lo, ch.rho_hi, unit)
        x_new = state.x + rho * u
        if stats is not None:
            stats.membership_checks += 1
        if contains(body, x_new):
            state.x = x_new
            state.steps_taken += 1
            if stats is not None:
                stats.steps += 1
            return state
        if stats is not None:
            stats.retries += 1
    raise ChainError(f"no valid step after {MAX_DIRECTION_RETRIES} direction resamples")


def run_chain(state: ChainState, p: BoltzmannParams, N: int,
              stats: WalkStats | None = None, record_every: int = 0,
              trace: list | None = None) -> ChainState:
    """Run N sequential steps, optionally recording every k-th point."""
    if N < 1:
        raise ValueError("N must be >= 1")
    for i in range(N):
        hit_and_run_step(state, p, stats=stats)
        if record_every and trace is not None and (i + 1) % record_every == 0:
            trace.append(state.x.copy())
    return state


def advance_states(p: BoltzmannParams, states: list[ChainState], N: int,
                   stats: WalkStats | None = None) -> None:
    """Advance every chain by N steps (vectorized across chains when possible)."""
    if not states:
        raise ValueError("need at least one chain")
    if p.body.kind == "oracle":
        _advance_sequential(p, states, N, stats)
        return
    _advance_lockstep(p, states, N, stats)


def sample_batch(p: BoltzmannParams, warm_starts: list[ChainState], N: int,
                 stats: WalkStats | None = None) -> np.ndarray:
    """One chain per warm start; returns the (m, n) stack of final points."""
    advance_states(p, warm_starts, N, stats=stats)
    return np.stack([s.x for s in warm_starts])


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("ANNEAL_IPM_THREADS", "1")))
    except ValueError:
        return 1


def _advance_sequential(p: BoltzmannParams, states, N, stats):
    workers = _worker_count()
    if workers == 1 or len(states) == 1:
        for st in states:
            run_chain(st, p, N, stats=stats)
        return
    # Chains are single-owner with independent streams, so a thread pool
    # cannot change results, only wall time.
    local = [WalkStats() for _ in states]

    def job(arg):
        st, ls = arg
        run_chain(st, p, N, stats=ls)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(job, zip(states, local)))
    if stats is not None:
        for ls in local:
            stats.steps += ls.steps
            stats.membership_checks += ls.membership_checks
            stats.retries += ls.retries


def _advance_lockstep(p: BoltzmannParams, states, N, stats):
    body, theta = p.body, p.theta
    m, n = len(states), body.n
    start_counts = [st.steps_taken for st in states]
    X = np.stack([st.x for st in states])
    roots = np.stack([st.sigma_sqrt for st in states])
    # Block-draw each chain's randomness from its own stream.
    Z = np.stack([st.rng.standard_normal((N, n)) for st in states])
    U = np.stack([st.rng.random(N) for st in states])
    for t in range(N):
        dirs = np.einsum("mij,mj->mi", roots, Z[:, t, :])
        rho_lo, rho_hi = _chord_bounds_batch(body, X, dirs)
        width = rho_hi - rho_lo
        s = dirs @ theta
        rho = _sample_chord_batch(s, rho_lo, rho_hi, U[:, t])
        X_new = X + rho[:, None] * dirs
        ok = (
            np.isfinite(rho)
            & np.isfinite(width)
            & (width > 0.0)
            & contains_batch(body, X_new)
        )
        if stats is not None:
            stats.membership_checks += m
            stats.steps += int(ok.sum())
        if not np.all(ok):
            # Rare numerical failures: retry those chains individually,
            # continuing from each chain's own stream.
            for i in np.flatnonzero(~ok):
                if stats is not None:
                    stats.retries += 1
                states[i].x = X[i]
                hit_and_run_step(states[i], p, stats=stats)
                X_new[i] = states[i].x
        X = X_new
    for i, st in enumerate(states):
        st.x = X[i]
        st.steps_taken = start_counts[i] + N


def _sample_chord_batch(s, rho_lo, rho_hi, unit):
    width = rho_hi - rho_lo
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        flat = np.abs(s) * width < FLAT_EXPONENT
        a = -s * rho_lo
        b = -s * rho_hi
        m = np.maximum(a, b)
        logp = np.logaddexp(np.log1p(-unit) + (a - m), np.log(unit) + (b - m))
        rho_exp = -(m + logp) / np.where(s == 0.0, 1.0, s)
        return np.where(flat, rho_lo + unit * width, rho_exp)
