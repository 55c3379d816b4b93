"""Quadrature rules on [0, 1] and on pairs of elements.

Three families are provided:

* Gauss-Legendre rules on [0, 1];
* rules that are exact for ``f1(s) + f2(s) log(s)`` with polynomial ``f1, f2``;
* rules on the unit square for element pairs: tensor Gauss for disjoint
  elements and Duffy-type splittings for coincident and adjacent elements,
  which move the diagonal or corner singularity onto a coordinate axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import mpmath
import numpy as np

from .geometry import Element


@dataclass(frozen=True, eq=False)
class Rule1D:
    nodes: np.ndarray
    weights: np.ndarray

    def __iter__(self):
        return iter((self.nodes, self.weights))


@dataclass(frozen=True, eq=False)
class LogRule1D(Rule1D):
    degree: int = 0


@dataclass(frozen=True, eq=False)
class PairRule2D:
    s: np.ndarray
    t: np.ndarray
    weights: np.ndarray
    kind: str  # tensor_gauss | duffy_coincident | duffy_adjacent


class PairKind(Enum):
    DISJOINT = "disjoint"
    ADJACENT = "adjacent_shared_node"
    COINCIDENT = "coincident"


@dataclass(frozen=True)
class PairClass:
    """Relation between two elements.

    For adjacent elements ``shared`` lists ``(s_end, t_end)`` parameter
    corners (each 0 or 1) at which the two closures touch.
    """

    kind: PairKind
    shared: tuple[tuple[int, int], ...] = ()


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_legendre(n: int) -> Rule1D:
    """``n``-point Gauss-Legendre rule on [0, 1]."""
    if n < 1:
        raise ValueError("Gauss rule needs at least one point")
    return Rule1D(*_gauss(int(n)))


# Grading exponent for the base nodes of the logarithmic rule.  Clustering
# nodes near 0 like u**3 keeps all corrected weights positive for d <= 20.
_LOG_GRADING = 3


@lru_cache(maxsize=None)
def _log_rule(d: int) -> tuple[np.ndarray, np.ndarray]:
    # Start from graded Gauss nodes s = u**q and correct the weights by the
    # weighted minimum-norm update that matches the 2(d+1) moments exactly.
    n = 2 * (d + 1) + 2
    u, wu = _gauss(n)
    q = _LOG_GRADING
    s = u**q
    w0 = wu * q * u ** (q - 1)
    with mpmath.workdps(60):
        sm = [mpmath.mpf(float(v)) for v in s]
        logs = [mpmath.log(v) for v in sm]
        w0m = [mpmath.mpf(float(v)) for v in w0]
        m = mpmath.matrix(2 * (d + 1), n)
        for j in range(n):
            pw = mpmath.mpf(1)
            for k in range(d + 1):
                m[k, j] = pw
                m[d + 1 + k, j] = pw * logs[j]
                pw *= sm[j]
        mu = mpmath.matrix(
            [mpmath.mpf(1) / (k + 1) for k in range(d + 1)]
            + [-mpmath.mpf(1) / (k + 1) ** 2 for k in range(d + 1)]
        )
        resid = mu - m * mpmath.matrix(w0m)
        wm = mpmath.diag(w0m)
        gram = m * wm * m.T
        try:
            lam = mpmath.lu_solve(gram, resid)
        except ZeroDivisionError as exc:  # pragma: no cover - not reached for d <= 20
            raise np.linalg.LinAlgError(f"log-rule moment system singular for d={d}") from exc
        w = mpmath.matrix(w0m) + wm * m.T * lam
        weights = np.array([float(v) for v in w])
    if np.any(weights <= 0):
        raise np.linalg.LinAlgError(f"log rule of degree {d} produced nonpositive weights")
    s = s.copy()
    s.flags.writeable = False
    weights.flags.writeable = False
    return s, weights


def log_rule(d: int) -> LogRule1D:
    """Rule on [0, 1] exact for ``f1(s) + f2(s) log s`` with ``deg f1, deg f2 <= d``."""
    if d < 0:
        raise ValueError("degree must be nonnegative")
    nodes, weights = _log_rule(int(d))
    return LogRule1D(nodes, weights, int(d))


def classify_pair(e: Element, f: Element) -> PairClass:
    if e.index == f.index:
        return PairClass(PairKind.COINCIDENT)
    shared = []
    for a, na in ((0, e.start), (1, e.end)):
        for b, nb in ((0, f.start), (1, f.end)):
            if na == nb:
                shared.append((a, b))
    if shared:
        return PairClass(PairKind.ADJACENT, tuple(shared))
    return PairClass(PairKind.DISJOINT)


def _axis_rule(kernel_kind: str, n: int, log_degree: int | None) -> Rule1D:
    if kernel_kind == "log_singular":
        return log_rule(log_degree if log_degree is not None else max(n - 1, 1))
    if kernel_kind == "smooth":
        return gauss_legendre(n)
    raise ValueError(f"unknown kernel kind {kernel_kind!r}")


@lru_cache(maxsize=None)
def _coincident(kernel_kind: str, n: int, log_degree: int | None):
    z, wz = _axis_rule(kernel_kind, n, log_degree)
    v, wv = _gauss(n)
    zz, vv = np.meshgrid(z, v, indexing="ij")
    ww = np.outer(wz, wv) * (1.0 - zz)
    a = (1.0 - zz) * vv + zz
    b = (1.0 - zz) * vv
    s = np.concatenate([a.ravel(), b.ravel()])
    t = np.concatenate([b.ravel(), a.ravel()])
    w = np.concatenate([ww.ravel(), ww.ravel()])
    return s, t, w


@lru_cache(maxsize=None)
def _corner(kernel_kind: str, n: int, log_degree: int | None):
    # Singular corner at (0, 0): split along s = t and map u -> (u, u v).
    u, wu = _axis_rule(kernel_kind, n, log_degree)
    v, wv = _gauss(n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv) * uu
    s = np.concatenate([uu.ravel(), (uu * vv).ravel()])
    t = np.concatenate([(uu * vv).ravel(), uu.ravel()])
    w = np.concatenate([ww.ravel(), ww.ravel()])
    return s, t, w


def pair_rule(
    pair: PairClass,
    kernel_kind: str = "log_singular",
    n: int = 16,
    log_degree: int | None = None,
    corner: tuple[int, int] | None = None,
) -> PairRule2D:
    """Rule for the parameter square of an element pair.

    ``log_degree`` fixes the exactness degree of the singular-axis rule.
    For adjacent pairs the singular corner is the first shared corner unless
    ``corner`` is given.
    """
    if n < 1:
        raise ValueError("rule needs at least one point per direction")
    if pair.kind is PairKind.DISJOINT:
        x, w = _gauss(n)
        s, t = np.meshgrid(x, x, indexing="ij")
        return PairRule2D(s.ravel(), t.ravel(), np.outer(w, w).ravel(), "tensor_gauss")
    if pair.kind is PairKind.COINCIDENT:
        return PairRule2D(*_coincident(kernel_kind, n, log_degree), "duffy_coincident")
    if corner is None:
        corner = pair.shared[0]
    s, t, w = _corner(kernel_kind, n, log_degree)
    if corner[0] == 1:
        s = 1.0 - s
    if corner[1] == 1:
        t = 1.0 - t
    return PairRule2D(s, t, w, "duffy_adjacent")


def integrate_element(f, element: Element, rule: Rule1D) -> float:
    """Arc-length integral of ``f(t)`` over ``element``."""
    t, w = rule.nodes, rule.weights
    return float(np.sum(w * np.asarray(f(t)) * element.speed(t)))
