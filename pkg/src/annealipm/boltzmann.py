"""Ground-truth oracle for the exponential family exp(-theta^T x) on a body.

The family's log-partition function

    A(theta) = log integral_K exp(-theta^T x) dx

carries everything: -grad A is the mean, the Hessian of A is the
covariance.  Boxes get exact per-axis closed forms in any dimension;
other bodies are integrated deterministically (dims <= 3).  These values
are the reference against which samplers and barrier backends are
tested, so this module favors accuracy and stability over speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .bodies import ConvexBody, DimensionMismatchError, support_min


class UnsupportedDimensionError(ValueError):
    """Raised when deterministic integration is requested above 3 dims."""


class DiagnosticError(RuntimeError):
    """Raised by diagnostics on degenerate inputs (e.g. rank-deficient samples)."""


@dataclass(frozen=True)
class BoltzmannParams:
    """Natural parameter theta paired with the body carrying the density."""

    theta: np.ndarray
    body: ConvexBody

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.shape != (self.body.n,):
            raise DimensionMismatchError(
                f"theta has shape {theta.shape}, body dimension is {self.body.n}"
            )
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class MomentSummary:
    """Mean, covariance, and log-partition value at one parameter."""

    mean: np.ndarray
    covariance: np.ndarray
    log_partition: float


# -- stable one-dimensional pieces (box axes) --------------------------------
#
# On an axis [a, b] with exponent s, substitute x = a + w*y, w = b - a,
# z = s*w, so the standardized density on [0, 1] is proportional to
# exp(-z*y).  The helpers below evaluate log-mass, mean, and variance of
# that standardized law with series branches near z = 0.


def _logz_std(z: float) -> float:
    # log integral_0^1 exp(-z y) dy
    if abs(z) < 1e-6:
        return -z / 2.0 + z * z / 24.0
    if z > 0:
        return float(np.log1p(-np.exp(-z)) - np.log(z))
    v = -z
    return float(v + np.log1p(-np.exp(-v)) - np.log(v))


def _mean_std(z: float) -> float:
    # mean of the standardized law: 1/z - 1/(e^z - 1)
    if abs(z) < 1e-5:
        return 0.5 - z / 12.0 + z**3 / 720.0
    if abs(z) > 700.0:
        return 1.0 / z if z > 0 else 1.0 + 1.0 / z
    return float(1.0 / z - 1.0 / np.expm1(z))


def _var_std(z: float) -> float:
    # variance: 1/z^2 - e^z/(e^z - 1)^2 = 1/z^2 - 1/(4 sinh^2(z/2))
    if abs(z) < 1e-4:
        return 1.0 / 12.0 - z * z / 240.0
    if abs(z) > 100.0:
        return 1.0 / (z * z)
    s = np.sinh(0.5 * z)
    return float(1.0 / (z * z) - 0.25 / (s * s))


def _box_axis(s: float, a: float, b: float):
    w = b - a
    z = s * w
    logz = _logz_std(z) + np.log(w) - s * a
    mean = a + w * _mean_std(z)
    var = w * w * _var_std(z)
    return logz, mean, var


# -- core evaluations ---------------------------------------------------------


def _require_quadrature_ok(p: BoltzmannParams):
    if p.body.n > quadrature.MAX_QUAD_DIM:
        raise UnsupportedDimensionError(
            "deterministic moments need dimension <= 3 for non-box bodies"
        )


def _quad_moments(p: BoltzmannParams, tol: float) -> MomentSummary:
    body, theta = p.body, p.theta
    n = body.n
    shift = support_min(body, theta)

    def fn(pts):
        w = np.exp(-(pts @ theta - shift))
        cross = (pts[:, :, None] * pts[:, None, :]).reshape(len(pts), n * n)
        return np.concatenate([w[:, None], pts * w[:, None], cross * w[:, None]], axis=1)

    scale = max(1.0, body.R)
    scales = np.concatenate([[1.0], np.full(n, scale), np.full(n * n, scale * scale)])
    raw = quadrature.integrate(body, fn, 1 + n + n * n, scales=scales, tol=tol)
    mass = raw[0]
    mean = raw[1 : 1 + n] / mass
    second = raw[1 + n :].reshape(n, n) / mass
    cov = second - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    return MomentSummary(mean=mean, covariance=cov, log_partition=float(np.log(mass) - shift))


def _box_moments(p: BoltzmannParams) -> MomentSummary:
    body, theta = p.body, p.theta
    logz = 0.0
    mean = np.empty(body.n)
    var = np.empty(body.n)
    for i in range(body.n):
        lz, m, v = _box_axis(float(theta[i]), float(body.lo[i]), float(body.hi[i]))
        logz += lz
        mean[i] = m
        var[i] = v
    return MomentSummary(mean=mean, covariance=np.diag(var), log_partition=float(logz))


def moments(p: BoltzmannParams, method: str = "auto", tol: float = 1e-8) -> MomentSummary:
    """Mean, covariance, and A(theta) of the density exp(-theta^T x) on K.

    ``method`` is "auto" (analytic for boxes, quadrature otherwise),
    "analytic" (boxes only), or "quadrature".
    """
    if method == "analytic" or (method == "auto" and p.body.kind == "box"):
        if p.body.kind != "box":
            raise UnsupportedDimensionError("analytic moments exist only for boxes")
        return _box_moments(p)
    _require_quadrature_ok(p)
    return _quad_moments(p, tol)


def log_partition(p: BoltzmannParams, method: str = "auto", tol: float = 1e-8) -> float:
    """A(theta) = log integral_K exp(-theta^T x) dx."""
    if method == "analytic" or (method == "auto" and p.body.kind == "box"):
        if p.body.kind != "box":
            raise UnsupportedDimensionError("analytic log-partition exists only for boxes")
        return float(sum(
            _box_axis(float(p.theta[i]), float(p.body.lo[i]), float(p.body.hi[i]))[0]
            for i in range(p.body.n)
        ))
    _require_quadrature_ok(p)
    body, theta = p.body, p.theta
    shift = support_min(body, theta)

    def fn(pts):
        return np.exp(-(pts @ theta - shift))[:, None]

    mass = quadrature.integrate(body, fn, 1, tol=tol)[0]
    return float(np.log(mass) - shift)


def bregman_divergence(p: BoltzmannParams, theta_prime, method: str = "auto") -> float:
    """D_A(theta', theta) = A(theta') - A(theta) - grad A(theta)^T (theta' - theta).

    Always nonnegative, and equal to KL(P_theta, P_theta') for this family.
    """
    theta_prime = np.asarray(theta_prime, dtype=float)
    if theta_prime.shape != (p.body.n,):
        raise DimensionMismatchError("theta' dimension mismatch")
    ms = moments(p, method=method)
    a_prime = log_partition(BoltzmannParams(theta_prime, p.body), method=method)
    # grad A = -mean
    return float(a_prime - ms.log_partition + ms.mean @ (theta_prime - p.theta))


def l2_ratio_norm(p: BoltzmannParams, gamma: float, method: str = "identity") -> float:
    """The ratio norm ||P_theta / P_{(1+gamma) theta}|| = E_theta[P_theta/P_{(1+gamma)theta}].

    Two routes are provided and must agree: "identity" evaluates
    exp(A((1+gamma)theta) - 2 A(theta) + A((1-gamma)theta)), while
    "direct" integrates the density ratio against P_theta.
    """
    theta, body = p.theta, p.body
    if method == "identity":
        a0 = log_partition(p)
        a_plus = log_partition(BoltzmannParams((1.0 + gamma) * theta, body))
        a_minus = log_partition(BoltzmannParams((1.0 - gamma) * theta, body))
        return float(np.exp(a_plus - 2.0 * a0 + a_minus))
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    # direct: quadrature of the pointwise ratio (P_theta/P_theta')(x) dP_theta(x),
    # with both densities normalized through their own A values
    _require_quadrature_ok(p)
    a0 = log_partition(p)
    a_plus = log_partition(BoltzmannParams((1.0 + gamma) * theta, body))
    combined = 2.0 * theta - (1.0 + gamma) * theta
    peak = a_plus - 2.0 * a0 - support_min(body, combined)

    def ratio_density(pts):
        log_p0 = -(pts @ theta) - a0
        log_p1 = -(pts @ ((1.0 + gamma) * theta)) - a_plus
        return np.exp(log_p0 - log_p1 + log_p0 - peak)[:, None]

    mass = quadrature.integrate(body, ratio_density, 1)[0]
    return float(mass * np.exp(peak))


def l2_ratio_pair(p: BoltzmannParams, theta_other) -> float:
    """max of the two directed ratio norms between P_theta and P_theta_other.

    Uses the closed form E_a[P_a/P_b] = exp(A(2a-b) - 2A(a) + A(b)),
    which holds for any parameter pair on a bounded body.
    """
    a = p.theta
    b = np.asarray(theta_other, dtype=float)
    if b.shape != a.shape:
        raise DimensionMismatchError("parameter dimension mismatch")
    body = p.body
    a_a = log_partition(p)
    a_b = log_partition(BoltzmannParams(b, body))
    fwd = log_partition(BoltzmannParams(2.0 * a - b, body)) - 2.0 * a_a + a_b
    rev = log_partition(BoltzmannParams(2.0 * b - a, body)) - 2.0 * a_b + a_a
    return float(np.exp(max(fwd, rev)))


def check_isotropy(samples, reference_cov) -> float:
    """Smallest C >= 1 bounding centered second moments against a reference.

    Along every eigendirection v of ``reference_cov``, the empirical
    second moment of the centered samples must lie within [1/C, C] times
    v^T reference_cov v; the returned C is the tightest such constant.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise DiagnosticError("samples must be an (m, n) array")
    m, n = X.shape
    if m < n + 1:
        raise DiagnosticError(f"need at least n+1={n + 1} samples, got {m}")
    ref = np.asarray(reference_cov, dtype=float)
    centered = X - X.mean(axis=0)
    emp = centered.T @ centered / m
    if np.linalg.matrix_rank(emp, tol=1e-12 * max(1.0, float(np.trace(emp)))) < n:
        raise DiagnosticError("sample set is rank deficient")
    _, vecs = np.linalg.eigh(ref)
    c = 1.0
    for v in vecs.T:
        denom = float(v @ ref @ v)
        num = float(v @ emp @ v)
        if denom <= 0.0 or num <= 0.0:
            raise DiagnosticError("reference covariance is not positive definite")
        ratio = num / denom
        c = max(c, ratio, 1.0 / ratio)
    return float(c)
