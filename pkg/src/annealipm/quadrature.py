"""Deterministic integration over low-dimensional convex bodies.

Nested Gauss-Legendre rules: the outer variable runs over the exact
extent of the body, and each slice recurses on the cross-section.  Slice
extents are closed-form for boxes, balls, and simplices and come from
tiny vertex/LP computations for H-polytopes, so the integrand seen by
the rule is smooth and convergence is fast.  Oracle-only bodies fall
back to masking the integrand with the membership predicate, which is
kept for completeness but converges slowly; quantitative work should use
an analytic kind.

Only dimensions <= 3 are supported; higher-dimensional needs are served
by sampling elsewhere.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .bodies import ConvexBody, contains_batch

MAX_QUAD_DIM = 3


class QuadratureError(RuntimeError):
    """Raised when the refinement loop fails to converge."""


@lru_cache(maxsize=64)
def _gauss(p: int):
    return np.polynomial.legendre.leggauss(p)


def _interval_nodes(a: float, b: float, p: int):
    nodes, weights = _gauss(p)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def _extent(body: ConvexBody, prefix: tuple[float, ...]):
    """Extent of coordinate len(prefix) given the fixed leading coordinates.

    Returns (lo, hi) or None when the cross-section is empty.
    """
    k = len(prefix)
    if body.kind == "box":
        return float(body.lo[k]), float(body.hi[k])
    if body.kind == "ball":
        rem = body.radius**2 - sum(c * c for c in prefix)
        if rem <= 0.0:
            return None
        r = np.sqrt(rem)
        return float(-r), float(r)
    if body.kind == "simplex":
        s = sum(prefix)
        if s >= 1.0:
            return None
        return 0.0, float(1.0 - s)
    if body.kind == "hpolytope":
        return _hpoly_extent(body, prefix)
    # Oracle body: outer bound from the enclosing ball; the integrand is
    # masked pointwise, so over-covering only costs accuracy, not bias.
    rem = body.R**2 - sum(c * c for c in prefix)
    if rem <= 0.0:
        return None
    r = np.sqrt(rem)
    return float(-r), float(r)


def _hpoly_extent(body: ConvexBody, prefix: tuple[float, ...]):
    k = len(prefix)
    rest = body.n - k
    A = body.A[:, k:]
    b = body.b - (body.A[:, :k] @ np.asarray(prefix) if k else 0.0)
    if rest == 1:
        a0 = A[:, 0]
        lo, hi = -np.inf, np.inf
        if np.any((np.abs(a0) < 1e-14) & (b < -1e-12)):
            return None
        pos = a0 > 1e-14
        neg = a0 < -1e-14
        if np.any(pos):
            hi = np.min(b[pos] / a0[pos])
        if np.any(neg):
            lo = np.max(b[neg] / a0[neg])
        if not np.isfinite(lo) or not np.isfinite(hi) or lo >= hi:
            return None if lo > hi else (float(lo), float(lo))
        return float(lo), float(hi)
    if rest == 2:
        return _polygon_extent(A, b)
    # Top-level call on a 3-D polytope: two small LPs.
    c = np.zeros(rest)
    c[0] = 1.0
    lo = linprog(c, A_ub=A, b_ub=b, bounds=(None, None), method="highs")
    hi = linprog(-c, A_ub=A, b_ub=b, bounds=(None, None), method="highs")
    if not (lo.success and hi.success):
        return None
    return float(lo.fun), float(-hi.fun)


def _polygon_extent(A: np.ndarray, b: np.ndarray):
    """Extent of the first coordinate over the polygon {A y <= b}, y in R^2."""
    m = A.shape[0]
    ii, jj = np.triu_indices(m, k=1)
    M = np.stack([A[ii], A[jj]], axis=1)          # (pairs, 2, 2)
    rhs = np.stack([b[ii], b[jj]], axis=1)        # (pairs, 2)
    dets = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    ok = np.abs(dets) > 1e-12 * (np.abs(M).max(axis=(1, 2)) ** 2 + 1e-300)
    if not np.any(ok):
        return None
    pts = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    scale = np.abs(b).max() + 1.0
    feas = np.all(pts @ A.T <= b + 1e-9 * scale, axis=1)
    if not np.any(feas):
        return None
    xs = pts[feas, 0]
    lo, hi = float(xs.min()), float(xs.max())
    if hi - lo <= 0.0:
        return None
    return lo, hi


def _nested(body: ConvexBody, prefix: tuple[float, ...], fn, p: int, width: int) -> np.ndarray:
    ext = _extent(body, prefix)
    out = np.zeros(width)
    if ext is None:
        return out
    a, b = ext
    if b - a <= 0.0:
        return out
    nodes, weights = _interval_nodes(a, b, p)
    k = len(prefix)
    if k == body.n - 1:
        pts = np.empty((p, body.n))
        pts[:, :k] = prefix
        pts[:, k] = nodes
        vals = fn(pts)
        if body.kind == "oracle":
            vals = vals * contains_batch(body, pts)[:, None]
        return weights @ vals
    for c, w in zip(nodes, weights):
        out += w * _nested(body, prefix + (float(c),), fn, p, width)
    return out


def integrate(body: ConvexBody, fn, width: int, scales=None,
              tol: float = 1e-8, p0: int = 24, p_max: int = 1536) -> np.ndarray:
    """Integrate a vector-valued integrand over the body.

    ``fn`` maps an (m, n) stack of points to (m, width) values.  The rule
    order doubles until the result is stable to ``tol`` relative to the
    mass component ``result[0]`` (scaled per component by ``scales``).
    """
    if body.n > MAX_QUAD_DIM:
        raise QuadratureError(f"quadrature capped at {MAX_QUAD_DIM} dimensions")
    if scales is None:
        scales = np.ones(width)
    scales = np.asarray(scales, dtype=float)
    if body.kind == "oracle":
        p_max = max(p_max, 4096)  # indicator masking converges slowly
    prev = None
    p = p0
    while p <= p_max:
        cur = _nested(body, (), fn, p, width)
        if prev is not None and cur[0] > 0.0:
            err = np.max(np.abs(cur - prev) / (cur[0] * scales))
            if err < tol:
                return cur
        prev = cur
        p *= 2
    if body.kind == "oracle":
        return prev  # best effort; documented limitation
    raise QuadratureError(f"no convergence to {tol} within order {p_max}")
