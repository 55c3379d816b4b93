"""Saddle-point solve, energy-norm errors and interior evaluation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import QuadratureConfig, assemble_V
from .geometry import BoundaryMesh, frame_at
from .kernels import KernelArgs, PlateModel, k_kernel, v_kernel
from .manufactured import ManufacturedCase, manufactured_case
from .quadrature import gauss_legendre
from .trace_spaces import (
    DirichletCoeffs,
    NeumannCoeffs,
    NeumannSpace,
    NeumannTrace,
    TraceFunctions,
    as_trace,
    eval_neumann,
    project_neumann_components,
)

__all__ = [
    "SaddleSystem",
    "Solution",
    "InteriorValue",
    "ManufacturedCase",
    "manufactured_case",
    "solve",
    "energy_error",
    "evaluate_interior",
    "has_noncolinear_nodes",
]


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    """``[[A, B], [B^T, 0]] [m; lam] = [rhs; 0]``."""

    A: np.ndarray
    B: np.ndarray
    rhs: np.ndarray
    space: NeumannSpace | None = None

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n, 3) or self.rhs.shape != (n,):
            raise ValueError("inconsistent saddle-point block shapes")

    @property
    def dim(self) -> int:
        return self.A.shape[0] + 3

    def matrix(self) -> np.ndarray:
        n = self.A.shape[0]
        S = np.zeros((n + 3, n + 3))
        S[:n, :n] = self.A
        S[:n, n:] = self.B
        S[n:, :n] = self.B.T
        return S


@dataclass(frozen=True, eq=False)
class Solution:
    m_h: NeumannCoeffs | np.ndarray
    lambda_h: np.ndarray
    residual: float


def has_noncolinear_nodes(mesh: BoundaryMesh) -> bool:
    x = mesh.node_positions
    M = np.column_stack([np.ones(len(x)), x - x.mean(axis=0)])
    sv = np.linalg.svd(M, compute_uv=False)
    return len(sv) >= 3 and sv[2] > 1e-10 * sv[0] * max(1.0, np.abs(x).max())


def solve(system: SaddleSystem) -> Solution:
    """Direct LU solve with partial pivoting."""
    space = system.space
    if space is not None and space.deg_nn <= 1 and not has_noncolinear_nodes(space.mesh):
        raise ValueError("the mesh needs three non-colinear nodes for a unique solution")
    S = system.matrix()
    n = system.A.shape[0]
    rhs = np.concatenate([system.rhs, np.zeros(3)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(S, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * diag.max():
        raise np.linalg.LinAlgError(
            "saddle-point matrix is numerically singular (degenerate mesh, colinear nodes or bad scaling)"
        )
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    resid = float(np.abs(S @ x - rhs).max())
    scale = np.abs(S).max() * max(np.abs(x).max(), 1e-300)
    if resid > 1e-10 * scale + 1e-14 * np.abs(rhs).max():
        raise np.linalg.LinAlgError(f"direct solve residual {resid:.3e} too large")
    m = NeumannCoeffs(space, x[:n]) if space is not None else x[:n]
    return Solution(m, x[n:], resid)


def energy_error(
    m_h: NeumannCoeffs,
    reference: NeumannCoeffs,
    model: PlateModel | None = None,
    quad: QuadratureConfig = QuadratureConfig(),
    A_ref: np.ndarray | None = None,
) -> float:
    """Energy-norm distance ``sqrt(<V e, e>)`` between ``m_h`` and a reference.

    ``m_h`` is embedded into the reference layout (exact for nested element
    spaces), so the quadratic form is evaluated on the difference vector.
    """
    if isinstance(m_h, Solution):
        m_h = m_h.m_h
    if m_h.space is reference.space:
        e = reference.values - m_h.values
    else:
        e = reference.values - project_neumann_components(NeumannTrace.from_coeffs(m_h), reference.space).values
    if A_ref is None:
        A_ref = assemble_V(reference.space, model=model, quad=quad).entries
    return math.sqrt(max(0.0, float(e @ np.asarray(A_ref) @ e)))


@dataclass(frozen=True)
class InteriorValue:
    value: float
    near_boundary: bool


def evaluate_interior(
    x,
    m_h: NeumannCoeffs | NeumannTrace,
    g_h: DirichletCoeffs | TraceFunctions,
    model: PlateModel,
    mesh: BoundaryMesh | None = None,
    n_quad: int = 16,
) -> InteriorValue:
    """Representation formula ``u(x) = (V~ m)(x) - (K~ g)(x)`` at an interior point."""
    x = np.asarray(x, dtype=float)
    if isinstance(m_h, NeumannCoeffs):
        mesh = m_h.space.mesh
        m_h = NeumannTrace.from_coeffs(m_h)
    mesh = mesh or m_h.mesh
    g = as_trace(g_h)
    t, w = gauss_legendre(n_quad)
    total = 0.0
    dist = np.inf
    near = False
    for e in mesh.elements:
        fr = frame_at(e, t)
        ww = w * e.speed(t)
        args = KernelArgs(x=x, y=fr.point, n_y=fr.normal, t_y=fr.tangent)
        single = v_kernel("sf_sf", args) * m_h.m_sf(e, t) + v_kernel("nn_sf", args) * m_h.m_nn(e, t)
        tr = g.on_element(e, t)
        normal_part = k_kernel("n_const", args, model) + k_kernel("n_log", args, model) + k_kernel(
            "n_rational", args, model
        )
        double = (
            k_kernel("dlp_laplace", args, model) * tr["v0"]
            + k_kernel("t_part", args, model) * tr["dv0"]
            + normal_part * tr["vn"]
        )
        total += float(np.sum(ww * (single - double)))
        de = np.linalg.norm(e.point(np.linspace(0, 1, 33)) - x, axis=-1).min()
        near = near or de < 0.5 * e.h
        dist = min(dist, de)
    for z, qj in m_h.m_J.items():
        total += qj * float(v_kernel("J_sf", KernelArgs(x=x, y=np.array(mesh.nodes[z].position))))
    return InteriorValue(total, near)
