"""Closed Euclidean ball constraint set and projection onto it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BallSet:
    """``{x in R^dim : ||x|| <= radius}``."""

    radius: float
    dim: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")

    def contains(self, x, tol: float = 0.0) -> bool:
        return norm(x) <= self.radius + tol

    def project(self, x) -> np.ndarray:
        return project(self, x)


def norm(x) -> float:
    x = np.ravel(x)
    return math.sqrt(float(x @ x))


def project(ball: BallSet, x) -> np.ndarray:
    """Nearest point of ``ball`` to ``x``: identity inside, radial scaling outside."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ball.dim,):
        raise ValueError(f"expected a vector of dimension {ball.dim}, got shape {x.shape}")
    n = math.sqrt(x @ x)
    if n <= ball.radius:
        return x.copy()
    y = x * (ball.radius / n)
    # rounding can leave ||y|| one ulp above the radius
    while norm(y) > ball.radius:
        y = y * (1.0 - 2.0**-52)
    return y
