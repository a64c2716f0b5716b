"""Convex bodies behind a uniform membership interface.

Every body answers point membership queries and can intersect a line
through an interior point with its boundary (a chord).  Analytic kinds
(box, ball, simplex, H-polytope) resolve chords in closed form; bodies
given only by a user oracle fall back to bisection on the membership
predicate.  All bodies carry an enclosing-ball radius ``R`` (about the
origin) and an interior point ``x0``; both are required to bracket
chords and to size temperature schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

#: Relative tolerance for bisection chords, as a fraction of the bracketing interval.
TOL_CHORD = 1e-9

#: Directions with norm below this floor are rejected as degenerate.
DIRECTION_NORM_FLOOR = 1e-12


class BodySpecError(ValueError):
    """Raised when a body description is inconsistent or incomplete."""


class DimensionMismatchError(ValueError):
    """Raised when a point's dimension does not match the body's."""


class NotInteriorError(ValueError):
    """Raised when an operation requires a strictly interior point."""


class DegenerateDirectionError(ValueError):
    """Raised for directions below the norm floor."""


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise DimensionMismatchError(f"expected shape ({n},), got {x.shape}")
    return x


@dataclass(frozen=True)
class ConvexBody:
    """A convex body K in R^n, described by kind-specific data.

    Instances are immutable after construction and safe to share across
    threads.  Use the factory classmethods (:meth:`box`, :meth:`ball`,
    :meth:`simplex`, :meth:`hpolytope`, :meth:`from_oracle`) rather than
    the raw constructor.
    """

    kind: str
    n: int
    R: float
    x0: np.ndarray
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    radius: Optional[float] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    oracle: Optional[Callable[[np.ndarray], bool]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise BodySpecError("dimension must be a positive integer")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise BodySpecError("radius bound R must be positive and finite")
        if self.x0.shape != (self.n,):
            raise DimensionMismatchError("interior point has wrong dimension")

    # -- factories ---------------------------------------------------------

    @classmethod
    def box(cls, lo, hi, n: Optional[int] = None) -> "ConvexBody":
        """Axis-aligned box with per-axis bounds lo <= x <= hi."""
        if np.isscalar(lo) and np.isscalar(hi):
            if n is None:
                raise BodySpecError("scalar bounds need an explicit dimension")
            lo = np.full(n, float(lo))
            hi = np.full(n, float(hi))
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise BodySpecError("box bounds must be matching vectors")
        if np.any(lo >= hi):
            raise BodySpecError("box requires lo < hi on every axis")
        dim = lo.size
        R = float(np.sqrt(np.sum(np.maximum(lo**2, hi**2))))
        return cls(kind="box", n=dim, R=R, x0=0.5 * (lo + hi), lo=lo, hi=hi)

    @classmethod
    def ball(cls, n: int, radius: float = 1.0) -> "ConvexBody":
        """Euclidean ball of the given radius, centered at the origin."""
        if radius <= 0:
            raise BodySpecError("ball radius must be positive")
        return cls(kind="ball", n=n, R=float(radius), x0=np.zeros(n), radius=float(radius))

    @classmethod
    def simplex(cls, n: int) -> "ConvexBody":
        """Standard simplex {x >= 0, sum(x) <= 1}."""
        A = np.vstack([-np.eye(n), np.ones((1, n))])
        b = np.concatenate([np.zeros(n), [1.0]])
        x0 = np.full(n, 1.0 / (2.0 * n))
        return cls(kind="simplex", n=n, R=1.0, x0=x0, A=A, b=b)

    @classmethod
    def hpolytope(cls, A, b, x0=None, R: Optional[float] = None) -> "ConvexBody":
        """H-polytope {x : A x <= b}.

        ``x0`` defaults to the Chebyshev center, ``R`` to an axis-extent
        bound; both are computed with small LPs when omitted, so passing
        them explicitly avoids any solver dependence at construction.
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise BodySpecError("A and b row counts differ")
        n = A.shape[1]
        if x0 is None:
            x0 = _chebyshev_center(A, b)
        x0 = _as_vector(x0, n)
        if np.any(A @ x0 >= b):
            raise BodySpecError("x0 is not strictly interior to {Ax <= b}")
        if R is None:
            R = _extent_radius(A, b)
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
            raise BodySpecError("A, b must be finite")
        return cls(kind="hpolytope", n=n, R=float(R), x0=x0, A=A, b=b)

    @classmethod
    def from_oracle(cls, fn: Callable[[np.ndarray], bool], n: int, R: float, x0) -> "ConvexBody":
        """Body given only by a membership predicate.

        The caller must declare (n, R, x0); chord bracketing is impossible
        without them.
        """
        x0 = _as_vector(x0, n)
        body = cls(kind="oracle", n=n, R=float(R), x0=x0, oracle=fn)
        if not contains(body, x0):
            raise BodySpecError("declared interior point fails the membership oracle")
        return body


@dataclass(frozen=True)
class Chord:
    """Intersection of the line {x + rho*u} with a body.

    ``rho_lo < 0 < rho_hi`` whenever the base point is interior; every
    rho strictly inside the interval stays inside the body.
    """

    x: np.ndarray
    u: np.ndarray
    rho_lo: float
    rho_hi: float

    @property
    def width(self) -> float:
        return self.rho_hi - self.rho_lo

    def point(self, rho: float) -> np.ndarray:
        return self.x + rho * self.u


# -- membership -------------------------------------------------------------


def contains(body: ConvexBody, x) -> bool:
    """Membership query ``x in K``; exact for analytic kinds."""
    x = _as_vector(x, body.n)
    if body.kind == "box":
        return bool(np.all(x >= body.lo) and np.all(x <= body.hi))
    if body.kind == "ball":
        return bool(x @ x <= body.radius**2)
    if body.kind in ("simplex", "hpolytope"):
        return bool(np.all(body.A @ x <= body.b))
    return bool(body.oracle(x))


def contains_batch(body: ConvexBody, X: np.ndarray) -> np.ndarray:
    """Vectorized membership for an (m, n) stack of points."""
    X = np.asarray(X, dtype=float)
    if body.kind == "box":
        return np.all((X >= body.lo) & (X <= body.hi), axis=1)
    if body.kind == "ball":
        return np.einsum("ij,ij->i", X, X) <= body.radius**2
    if body.kind in ("simplex", "hpolytope"):
        return np.all(X @ body.A.T <= body.b, axis=1)
    return np.fromiter((body.oracle(x) for x in X), dtype=bool, count=len(X))


# -- chords ------------------------------------------------------------------


def chord(body: ConvexBody, x, u, method: str = "auto", tol: float = TOL_CHORD) -> Chord:
    """Intersect the line through ``x`` along ``u`` with the body.

    Analytic kinds are solved in closed form; oracle bodies (or
    ``method='bisect'``) locate each endpoint by bisection to relative
    tolerance ``tol``, using O(log 1/tol) membership calls.

    Raises ``NotInteriorError`` if ``x`` is not strictly inside and
    ``DegenerateDirectionError`` if ``u`` is below the norm floor.
    """
    x = _as_vector(x, body.n)
    u = _as_vector(u, body.n)
    unorm = float(np.linalg.norm(u))
    if unorm < DIRECTION_NORM_FLOOR:
        raise DegenerateDirectionError("direction norm below floor")
    if not contains(body, x):
        raise NotInteriorError("chord base point is outside the body")

    if method == "bisect" or (method == "auto" and body.kind == "oracle"):
        rho_hi = _bisect_endpoint(body, x, u, +1.0, tol)
        rho_lo = _bisect_endpoint(body, x, u, -1.0, tol)
    else:
        rho_lo, rho_hi = _analytic_bounds(body, x, u)

    if not (rho_lo < 0.0 < rho_hi) and not (rho_lo <= 0.0 <= rho_hi):
        raise NotInteriorError("base point is on the boundary within tolerance")
    return Chord(x=x, u=u, rho_lo=float(rho_lo), rho_hi=float(rho_hi))


def _analytic_bounds(body: ConvexBody, x: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    if body.kind == "box":
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (body.lo - x) / u
            t2 = (body.hi - x) / u
        lows = np.where(u != 0.0, np.minimum(t1, t2), -np.inf)
        highs = np.where(u != 0.0, np.maximum(t1, t2), np.inf)
        return float(lows.max()), float(highs.min())
    if body.kind == "ball":
        a = u @ u
        bq = 2.0 * (x @ u)
        c = x @ x - body.radius**2
        disc = bq * bq - 4.0 * a * c
        if disc <= 0.0:
            raise NotInteriorError("line misses the ball interior")
        root = math.sqrt(disc)
        return (-bq - root) / (2.0 * a), (-bq + root) / (2.0 * a)
    # halfspace representation: each row bounds rho on one side
    slopes = body.A @ u
    margins = body.b - body.A @ x
    rho_lo, rho_hi = -np.inf, np.inf
    pos = slopes > 0.0
    neg = slopes < 0.0
    if np.any(pos):
        rho_hi = float(np.min(margins[pos] / slopes[pos]))
    if np.any(neg):
        rho_lo = float(np.max(margins[neg] / slopes[neg]))
    if not (np.isfinite(rho_lo) and np.isfinite(rho_hi)):
        raise BodySpecError("unbounded chord; polytope is not bounded along u")
    return rho_lo, rho_hi


def _bisect_endpoint(body: ConvexBody, x, u, sign: float, tol: float) -> float:
    unorm = float(np.linalg.norm(u))
    rho_in = 0.0
    # Any point past (R + |x|)/|u| violates |x + rho*u| <= R, hence is outside.
    rho_out = (body.R + float(np.linalg.norm(x))) / unorm * (1.0 + 1e-9) + 1e-15
    if contains(body, x + sign * rho_out * u):
        # Declared R was too small; widen a few times before giving up.
        for _ in range(8):
            rho_out *= 2.0
            if not contains(body, x + sign * rho_out * u):
                break
        else:
            raise BodySpecError("membership oracle inconsistent with declared R")
    iters = math.ceil(math.log2(1.0 / tol))
    for _ in range(iters):
        mid = 0.5 * (rho_in + rho_out)
        if contains(body, x + sign * mid * u):
            rho_in = mid
        else:
            rho_out = mid
    # Return the confirmed-inside end so strict sub-chords stay members.
    return sign * rho_in


def _chord_bounds_batch(body: ConvexBody, X: np.ndarray, D: np.ndarray):
    """Chord bounds for m (point, direction) pairs at once.

    Returns (rho_lo, rho_hi) arrays; rows that fail to bracket come back
    as NaN and are retried individually by the caller.  Only analytic
    kinds are supported.
    """
    m = X.shape[0]
    if body.kind == "box":
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (body.lo - X) / D
            t2 = (body.hi - X) / D
        lows = np.where(D != 0.0, np.minimum(t1, t2), -np.inf)
        highs = np.where(D != 0.0, np.maximum(t1, t2), np.inf)
        return lows.max(axis=1), highs.min(axis=1)
    if body.kind == "ball":
        a = np.einsum("ij,ij->i", D, D)
        bq = 2.0 * np.einsum("ij,ij->i", X, D)
        c = np.einsum("ij,ij->i", X, X) - body.radius**2
        disc = bq * bq - 4.0 * a * c
        bad = disc <= 0.0
        root = np.sqrt(np.where(bad, np.nan, disc))
        return (-bq - root) / (2.0 * a), (-bq + root) / (2.0 * a)
    if body.kind in ("simplex", "hpolytope"):
        slopes = D @ body.A.T          # (m, #rows)
        margins = body.b - X @ body.A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = margins / slopes
        hi = np.where(slopes > 0.0, ratios, np.inf).min(axis=1)
        lo = np.where(slopes < 0.0, ratios, -np.inf).max(axis=1)
        hi = np.where(np.isfinite(hi), hi, np.nan)
        lo = np.where(np.isfinite(lo), lo, np.nan)
        return lo, hi
    raise BodySpecError(f"batch chords unsupported for kind {body.kind!r}")


# -- metadata ----------------------------------------------------------------


def estimate_diameter(body: ConvexBody) -> float:
    """Upper bound on diam(K) from the enclosing-ball metadata (2R)."""
    return 2.0 * body.R


def boundary_margin(body: ConvexBody, x) -> float:
    """Euclidean distance from ``x`` to the boundary, for analytic kinds.

    Oracle bodies have no computable margin; they return +inf and rely on
    membership alone.  Negative values mean ``x`` is outside.
    """
    x = _as_vector(x, body.n)
    if body.kind == "box":
        return float(min(np.min(x - body.lo), np.min(body.hi - x)))
    if body.kind == "ball":
        return float(body.radius - np.linalg.norm(x))
    if body.kind in ("simplex", "hpolytope"):
        norms = np.linalg.norm(body.A, axis=1)
        return float(np.min((body.b - body.A @ x) / norms))
    return math.inf


def support_min(body: ConvexBody, theta) -> float:
    """min_{x in K} theta^T x; analytic where possible, else an R-ball bound.

    For oracle bodies this is the (possibly loose) lower bound -R*|theta|,
    which is safe wherever a lower bound is acceptable.
    """
    theta = _as_vector(theta, body.n)
    if body.kind == "box":
        return float(np.sum(np.where(theta >= 0.0, body.lo * theta, body.hi * theta)))
    if body.kind == "ball":
        return -body.radius * float(np.linalg.norm(theta))
    if body.kind == "simplex":
        return float(min(0.0, float(np.min(theta))))
    if body.kind == "hpolytope":
        res = linprog(theta, A_ub=body.A, b_ub=body.b, bounds=(None, None), method="highs")
        if not res.success:
            raise BodySpecError(f"support LP failed: {res.message}")
        return float(res.fun)
    return -body.R * float(np.linalg.norm(theta))


def _chebyshev_center(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(A.shape[1] + 1)
    c[-1] = -1.0
    A_ext = np.hstack([A, norms[:, None]])
    res = linprog(c, A_ub=A_ext, b_ub=b, bounds=(None, None), method="highs")
    if not res.success or res.x[-1] <= 0:
        raise BodySpecError("could not find an interior point; polytope may be empty")
    return res.x[:-1]


def _extent_radius(A: np.ndarray, b: np.ndarray) -> float:
    n = A.shape[1]
    worst = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        for sign in (+1.0, -1.0):
            res = linprog(sign * e, A_ub=A, b_ub=b, bounds=(None, None), method="highs")
            if not res.success:
                raise BodySpecError("polytope appears unbounded; pass R explicitly")
            worst[i] = max(worst[i], abs(res.fun))
    return float(np.linalg.norm(worst))
