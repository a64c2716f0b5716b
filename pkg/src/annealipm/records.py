"""Trace records shared by the annealing and path-following drivers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class PathPoint:
    """One recorded point of an optimization trace.

    ``t`` is the annealing temperature (the path-following drivers invert
    their own temperature before recording, so traces share one axis),
    ``gap_bound`` the certified suboptimality at that temperature, and
    ``decrement`` the Newton decrement where one is defined.
    """

    t: float
    x: np.ndarray
    gap_bound: float
    decrement: Optional[float] = None
