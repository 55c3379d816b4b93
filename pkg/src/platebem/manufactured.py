"""Closed-form biharmonic test solutions.

Each solution has the form ``u = P(x1, x2) * F(x1, x2)`` with a polynomial
``P`` and either ``F = 1`` or ``F = sinh(a x1) cos(a x2)``; partial
derivatives of any order follow from the Leibniz rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .trace_spaces import SmoothTrace


def _poly(terms: dict[tuple[int, int], float]) -> np.ndarray:
    deg = max(max(i, j) for i, j in terms) + 1
    c = np.zeros((deg, deg))
    for (i, j), v in terms.items():
        c[i, j] = v
    return c


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """Test solution ``u`` on a named domain.

    ``poly[i, j]`` is the coefficient of ``x1**i x2**j``; ``wave`` is the
    frequency ``a`` of the optional factor ``sinh(a x1) cos(a x2)``.
    """

    domain: str
    name: str
    poly: np.ndarray
    wave: float | None = None

    def derivative(self, x, i: int, j: int) -> np.ndarray:
        """``d^i/dx1^i d^j/dx2^j u`` at points ``x[..., 2]``."""
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        if self.wave is None:
            c = npoly.polyder(npoly.polyder(self.poly, i, axis=0), j, axis=1) if (i or j) else self.poly
            return npoly.polyval2d(x1, x2, c)
        a = self.wave
        out = np.zeros(np.shape(x1))
        for ia in range(i + 1):
            for jb in range(j + 1):
                c = self.poly
                if ia:
                    c = npoly.polyder(c, ia, axis=0)
                if jb:
                    c = npoly.polyder(c, jb, axis=1)
                if not np.any(c):
                    continue
                k, m = i - ia, j - jb
                fx = a**k * (np.sinh(a * x1) if k % 2 == 0 else np.cosh(a * x1))
                fy = a**m * np.cos(a * x2 + m * math.pi / 2)
                out = out + math.comb(i, ia) * math.comb(j, jb) * npoly.polyval2d(x1, x2, c) * fx * fy
        return out

    def value(self, x):
        return self.derivative(x, 0, 0)

    def gradient(self, x):
        return np.stack([self.derivative(x, 1, 0), self.derivative(x, 0, 1)], axis=-1)

    def hessian(self, x):
        uxx, uxy, uyy = (self.derivative(x, 2, 0), self.derivative(x, 1, 1), self.derivative(x, 0, 2))
        return np.stack([np.stack([uxx, uxy], -1), np.stack([uxy, uyy], -1)], -2)

    def third(self, x):
        """Tensor ``T[..., i, j, k] = d^3 u / dx_i dx_j dx_k``."""
        d = {n: self.derivative(x, 3 - n, n) for n in range(4)}
        shape = np.shape(d[0]) + (2, 2, 2)
        T = np.empty(shape)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    T[..., i, j, k] = d[i + j + k]
        return T

    def bilaplacian(self, x):
        return self.derivative(x, 4, 0) + 2 * self.derivative(x, 2, 2) + self.derivative(x, 0, 4)

    def trace(self) -> SmoothTrace:
        return SmoothTrace(self.value, self.gradient, self.hessian)


CASE_NAMES = {"circle": "quartic", "square": "sinhcos", "pacman": "singular"}


def manufactured_case(kind: str) -> ManufacturedCase:
    """The test solution used on the domain ``kind``."""
    if kind == "circle":
        # (x1^2 + x2^2)(x1^2 + 2 x1 x2 - x2^2)
        return ManufacturedCase("circle", "quartic", _poly({(4, 0): 1, (0, 4): -1, (3, 1): 2, (1, 3): 2}))
    if kind == "square":
        return ManufacturedCase("square", "sinhcos", _poly({(2, 0): 1, (0, 2): 1}), wave=2 * math.pi)
    if kind == "pacman":
        # r^4 cos(2 theta)
        return ManufacturedCase("pacman", "singular", _poly({(4, 0): 1, (0, 4): -1}))
    raise ValueError(f"no manufactured solution for domain {kind!r}")
