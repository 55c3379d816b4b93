"""Fundamental solution of the bilaplacian and the boundary-operator kernels.

All functions are vectorized: points and unit vectors are arrays with a
trailing axis of length 2 that broadcast against each other.  Kernels are
evaluated in physical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOUR_PI = 4.0 * np.pi
EIGHT_PI = 8.0 * np.pi

# Squared distances below this are treated as coincident points.
COINCIDENT_R2 = 1e-30

V_KERNELS = ("sf_sf", "nn_sf", "sf_nn", "nn_nn", "J_sf", "J_nn")
K_KERNELS = (
    "dlp_laplace",
    "t_part",
    "n_const",
    "n_log",
    "n_rational",
    "ktnn_c_log",
    "ktnn_c_rational",
    "knnn_log_deriv",
    "knnn_rational_deriv",
)
# Kernels without a finite limit at coincident points.
_DIVERGENT = {"nn_nn", "n_log", "ktnn_c_log"}


@dataclass(frozen=True)
class PlateModel:
    """Isotropic Kirchhoff plate with Poisson ratio ``nu`` and rigidity ``D = 1``."""

    nu: float = 0.0
    D: float = 1.0

    def __post_init__(self):
        if not (-1.0 < self.nu < 1.0):
            raise ValueError(f"Poisson ratio must lie in (-1, 1), got {self.nu}")
        if self.D != 1.0:
            raise ValueError("bending rigidity is fixed to D = 1")

    def apply_C(self, Q: np.ndarray) -> np.ndarray:
        """``C Q = nu tr(Q) I + (1 - nu) Q`` for symmetric 2x2 tensors ``Q[..., 2, 2]``."""
        Q = np.asarray(Q, dtype=float)
        tr = Q[..., 0, 0] + Q[..., 1, 1]
        return self.nu * tr[..., None, None] * np.eye(2) + (1.0 - self.nu) * Q


@dataclass(frozen=True)
class KernelArgs:
    x: np.ndarray
    y: np.ndarray
    n_x: np.ndarray | None = None
    n_y: np.ndarray | None = None
    t_y: np.ndarray | None = None
    # Optional precomputed x - y (avoids cancellation for close boundary points).
    diff: np.ndarray | None = None

    def d(self) -> np.ndarray:
        if self.diff is not None:
            return np.asarray(self.diff, dtype=float)
        return np.asarray(self.x, dtype=float) - np.asarray(self.y, dtype=float)


@dataclass(frozen=True)
class FundamentalValues:
    G: np.ndarray
    grad: np.ndarray
    lapl: np.ndarray
    hess: np.ndarray
    singular: np.ndarray


def _dot(a, b):
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def _polar(d):
    """Squared distance, log distance and coincidence mask, safe at 0."""
    r2 = _dot(d, d)
    small = r2 < COINCIDENT_R2
    r2s = np.where(small, 1.0, r2)
    return r2s, 0.5 * np.log(r2s), small


def fundamental(x) -> FundamentalValues:
    """``G(x) = |x|^2 log|x| / (8 pi)`` and its derivatives up to order two.

    At ``x = 0`` the value and gradient are 0; the Laplacian and Hessian are
    returned as NaN and flagged in ``singular``.
    """
    x = np.asarray(x, dtype=float)
    r2, logr, small = _polar(x)
    G = np.where(small, 0.0, r2 * logr / EIGHT_PI)
    grad = np.where(small[..., None], 0.0, ((2 * logr + 1) / EIGHT_PI)[..., None] * x)
    lapl = np.where(small, np.nan, (logr + 1) / (2 * np.pi))
    outer = x[..., :, None] * x[..., None, :] / (FOUR_PI * r2)[..., None, None]
    hess = ((2 * logr + 1) / EIGHT_PI)[..., None, None] * np.eye(2) + outer
    hess = np.where(small[..., None, None], np.nan, hess)
    return FundamentalValues(G, grad, lapl, hess, small)


def hg_components(model: PlateModel, x, n, t) -> dict[str, np.ndarray]:
    """Components of ``C grad grad G(x)``: ``n.HG.n``, ``t.HG.n`` and ``n.div HG``."""
    x = np.asarray(x, dtype=float)
    r2, logr, small = _polar(x)
    if np.any(small):
        raise ValueError("moment-tensor components are singular at x = 0")
    nu = model.nu
    nx, tx = _dot(n, x), _dot(t, x)
    return {
        "nHGn": (1 + 3 * nu) / EIGHT_PI + (1 + nu) * logr / FOUR_PI + (1 - nu) * nx**2 / (FOUR_PI * r2),
        "tHGn": (1 - nu) * tx * nx / (FOUR_PI * r2),
        "nDivHG": nx / (2 * np.pi * r2),
    }


def _check_divergent(kind, small):
    if kind in _DIVERGENT and np.any(small):
        raise ValueError(f"kernel {kind} has no finite limit at coincident points")


def v_kernel(kind: str, args: KernelArgs) -> np.ndarray:
    """Single-layer integrand factors.

    ``sf`` refers to the shear-force density, ``nn`` to the normal-moment
    density and ``J`` to a vertex (``y`` is then the vertex).  The first
    label belongs to ``y`` and the second to ``x`` for ``nn_sf``; ``sf_nn``
    carries the normal at ``x``.
    """
    if kind not in V_KERNELS:
        raise ValueError(f"unknown single-layer kernel {kind!r}")
    d = args.d()
    r2, logr, small = _polar(d)
    _check_divergent(kind, small)
    if kind in ("sf_sf", "J_sf"):
        out = r2 * logr / EIGHT_PI
    elif kind == "nn_sf":
        out = (2 * logr + 1) * _dot(args.n_y, d) / EIGHT_PI
    elif kind in ("sf_nn", "J_nn"):
        out = (2 * logr + 1) * _dot(args.n_x, d) / EIGHT_PI
    else:
        out = ((2 * logr + 1) * _dot(args.n_x, args.n_y) + 2 * _dot(args.n_x, d) * _dot(args.n_y, d) / r2) / EIGHT_PI
    return np.where(small, 0.0, out)


def k_kernel(kind: str, args: KernelArgs, model: PlateModel) -> np.ndarray:
    """Double-layer kernel factors; ``ktnn_c_*`` return vectors."""
    if kind not in K_KERNELS:
        raise ValueError(f"unknown double-layer kernel {kind!r}")
    nu = model.nu
    d = args.d()
    r2, logr, small = _polar(d)
    _check_divergent(kind, small)
    if kind == "n_const":
        return np.broadcast_to((1 + 3 * nu) / EIGHT_PI, small.shape).copy()
    if kind == "dlp_laplace":
        out = _dot(args.n_y, d) / (2 * np.pi * r2)
    elif kind == "t_part":
        out = (1 - nu) * _dot(args.t_y, d) * _dot(args.n_y, d) / (FOUR_PI * r2)
    elif kind == "n_log":
        out = (1 + nu) * logr / FOUR_PI
    elif kind == "n_rational":
        out = (1 - nu) * _dot(args.n_y, d) ** 2 / (FOUR_PI * r2)
    elif kind == "knnn_log_deriv":
        out = (1 + nu) * _dot(args.n_x, d) / (FOUR_PI * r2)
    elif kind == "knnn_rational_deriv":
        ny_d, nx_d = _dot(args.n_y, d), _dot(args.n_x, d)
        out = (1 - nu) / (2 * np.pi) * (ny_d * _dot(args.n_x, args.n_y) / r2 - ny_d**2 * nx_d / r2**2)
    elif kind == "ktnn_c_log":
        n_x = np.asarray(args.n_x, dtype=float)
        out = -((2 * logr + 1) / EIGHT_PI)[..., None] * n_x
        return np.where(small[..., None], 0.0, out)
    else:  # ktnn_c_rational
        out = -(_dot(args.n_x, d) / (FOUR_PI * r2))[..., None] * d
        return np.where(small[..., None], 0.0, out)
    return np.where(small, 0.0, out)
