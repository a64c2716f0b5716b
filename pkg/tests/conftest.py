import numpy as np
import pytest

from annealipm.bodies import ConvexBody
from annealipm.ipm import BarrierEval


class QuadraticTestBarrier:
    """Test-only backend with phi = ||x||^2 / 2 on a huge box.

    Newton is exact on this objective, which pins down the step algebra
    without any body geometry in the way.
    """

    def __init__(self, n: int, nu: float = 1.0):
        self.body = ConvexBody.box(-1e9, 1e9, n=n)
        self.n = n
        self.nu = nu

    def evaluate(self, x, hint=None) -> BarrierEval:
        x = np.asarray(x, dtype=float)
        return BarrierEval(value=0.5 * float(x @ x), gradient=x.copy(), hessian=np.eye(self.n))


@pytest.fixture
def box01_1d():
    return ConvexBody.box(0.0, 1.0, n=1)


@pytest.fixture
def box01_2d():
    return ConvexBody.box(0.0, 1.0, n=2)


@pytest.fixture
def boxpm_2d():
    return ConvexBody.box(-1.0, 1.0, n=2)


@pytest.fixture
def triangle():
    return ConvexBody.simplex(2)


@pytest.fixture
def interval_hpoly():
    # [0, 1] as an H-polytope, forcing the quadrature path
    return ConvexBody.hpolytope([[1.0], [-1.0]], [1.0, 0.0])
