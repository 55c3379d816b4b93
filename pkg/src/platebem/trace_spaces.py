"""Discrete Neumann and Dirichlet trace spaces, traces of smooth functions,
projections and the duality pairing.

Element-local polynomials are expanded in the Legendre basis that is
orthonormal on [0, 1], ``L_k(t) = sqrt(2k+1) P_k(2t - 1)``.  Derivatives
returned by the evaluation routines are arc-length derivatives.

A Neumann trace ``q = (q_nn, q_sf, q_J)`` acts on a Dirichlet trace
``v = (v0, vn)`` through

    l_q(v) = sum_E [ <q_sf, v0>_E - <q_nn, vn>_E ] + sum_z q_J(z) v0(z).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
from numpy.polynomial import legendre as npleg

from .geometry import BoundaryMesh, Element, frame_at
from .kernels import PlateModel
from .quadrature import gauss_legendre

# Gauss points per element for projections and pairings of non-polynomial data.
DATA_QUAD = 20


@lru_cache(maxsize=None)
def _leg_coeffs(deg: int, der: int) -> np.ndarray:
    c = np.diag(np.sqrt(2.0 * np.arange(deg + 1) + 1.0))
    if der:
        c = npleg.legder(c, m=der, axis=0) * 2.0**der
    return c


def legendre_basis(deg: int, t, der: int = 0) -> np.ndarray:
    """Values (shape ``(deg+1,) + t.shape``) of the orthonormal Legendre basis or its t-derivatives."""
    t = np.asarray(t, dtype=float)
    if deg < 0:
        return np.zeros((0,) + t.shape)
    c = _leg_coeffs(deg, der)
    if c.shape[0] == 0:
        return np.zeros((deg + 1,) + t.shape)
    return npleg.legval(2.0 * t - 1.0, c, tensor=True)


def _arc_derivs(e: Element, t):
    """Factors for the chain rule: 1/|g'| and g'.g''/|g'|^4."""
    d1, d2 = e.d1(t), e.d2(t)
    sp = np.linalg.norm(d1, axis=-1)
    return 1.0 / sp, np.sum(d1 * d2, axis=-1) / sp**4, sp


# ---------------------------------------------------------------------------
# Neumann space


@dataclass(frozen=True, eq=False)
class NeumannSpace:
    """Piecewise polynomial Neumann traces.

    ``sf_kind`` is ``"none"``, ``"deriv_linear"`` (arc-length derivatives of
    pulled-back linears, i.e. ``1/|g'|``) or ``"poly"`` (degree ``deg_sf``).
    ``j_nodes`` lists the mesh nodes carrying a point functional.
    """

    mesh: BoundaryMesh
    deg_nn: int
    sf_kind: str
    deg_sf: int
    j_nodes: tuple[int, ...]
    p: int | None = None

    def __post_init__(self):
        n_sf = {"none": 0, "deriv_linear": 1, "poly": self.deg_sf + 1}[self.sf_kind]
        ne = self.mesh.n_elements
        object.__setattr__(self, "n_nn", self.deg_nn + 1)
        object.__setattr__(self, "n_sf", n_sf)
        object.__setattr__(self, "sf_offset", ne * (self.deg_nn + 1))
        object.__setattr__(self, "j_offset", ne * (self.deg_nn + 1 + n_sf))
        object.__setattr__(self, "j_index", {z: self.j_offset + k for k, z in enumerate(self.j_nodes)})

    @property
    def dim(self) -> int:
        return self.j_offset + len(self.j_nodes)

    def nn_dofs(self, e: int) -> np.ndarray:
        return e * self.n_nn + np.arange(self.n_nn)

    def sf_dofs(self, e: int) -> np.ndarray:
        return self.sf_offset + e * self.n_sf + np.arange(self.n_sf)

    def nn_basis(self, e: Element, t, der: int = 0) -> np.ndarray:
        """nn basis on ``e`` (or its first arc-length derivative)."""
        if der == 0:
            return legendre_basis(self.deg_nn, t)
        inv_sp, _, _ = _arc_derivs(e, t)
        return legendre_basis(self.deg_nn, t, 1) * inv_sp

    def sf_basis(self, e: Element, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.sf_kind == "none":
            return np.zeros((0,) + t.shape)
        if self.sf_kind == "deriv_linear":
            return (1.0 / e.speed(t))[None]
        return legendre_basis(self.deg_sf, t)


def neumann_space(mesh: BoundaryMesh, p: int) -> NeumannSpace:
    """The discrete Neumann space of degree ``p``."""
    if p < 0:
        raise ValueError("degree must be nonnegative")
    if p == 0:
        return NeumannSpace(mesh, 0, "none", -1, tuple(range(mesh.n_nodes)), 0)
    if p == 1:
        return NeumannSpace(mesh, 1, "deriv_linear", 0, mesh.corners, 1)
    return NeumannSpace(mesh, p, "poly", p - 1, mesh.corners, p)


def reference_layout(mesh: BoundaryMesh, p: int) -> NeumannSpace:
    """Enriched layout (nn degree p+1, sf degree p) used for error measurement."""
    j = tuple(range(mesh.n_nodes)) if p == 0 else mesh.corners
    return NeumannSpace(mesh, p + 1, "poly", p, j, None)


def neumann_dim_formula(mesh: BoundaryMesh, p: int) -> int:
    ne = mesh.n_elements
    return 2 * ne if p == 0 else (2 * p + 1) * ne + len(mesh.corners)


@dataclass(frozen=True, eq=False)
class NeumannCoeffs:
    space: NeumannSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got shape {v.shape}")
        object.__setattr__(self, "values", v)


def eval_neumann(c: NeumannCoeffs, e: Element, t) -> dict[str, np.ndarray]:
    sp = c.space
    q_nn = c.values[sp.nn_dofs(e.index)] @ sp.nn_basis(e, t)
    if sp.n_sf:
        q_sf = c.values[sp.sf_dofs(e.index)] @ sp.sf_basis(e, t)
    else:
        q_sf = np.zeros_like(np.asarray(t, dtype=float))
    return {"q_nn": q_nn, "q_sf": q_sf}


def neumann_point_value(c: NeumannCoeffs, node: int) -> float:
    """``q_J`` at ``node`` (0 for nodes outside the J block)."""
    k = c.space.j_index.get(node)
    return 0.0 if k is None else float(c.values[k])


def neumann_jump(c: NeumannCoeffs, node: int) -> float:
    """Jump of ``q_nn`` at ``node``: value after minus value before."""
    mesh = c.space.mesh
    after = eval_neumann(c, mesh.element_after(node), 0.0)["q_nn"]
    before = eval_neumann(c, mesh.element_before(node), 1.0)["q_nn"]
    return float(after - before)


# ---------------------------------------------------------------------------
# Trace functions


class TraceFunctions:
    """Dirichlet-type trace ``(v0, vn)`` evaluable on elements and at nodes."""

    def on_element(self, e: Element, t) -> dict[str, np.ndarray]:
        """Arrays ``v0, dv0, ddv0, vn`` (arc-length derivatives) at parameters ``t``."""
        raise NotImplementedError

    def at_node(self, mesh: BoundaryMesh, node: int) -> tuple[float, np.ndarray]:
        """``v0(z)`` and the ambient gradient vector ``w(z) = dv0 t + vn n``."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class SmoothTrace(TraceFunctions):
    """Trace of a smooth function given by its value, gradient and (optional) Hessian."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None

    def on_element(self, e, t):
        fr = frame_at(e, t)
        g = self.gradient(fr.point)
        out = {
            "v0": np.asarray(self.value(fr.point), dtype=float),
            "dv0": np.sum(g * fr.tangent, axis=-1),
            "vn": np.sum(g * fr.normal, axis=-1),
        }
        if self.hessian is not None:
            H = self.hessian(fr.point)
            tHt = np.einsum("...i,...ij,...j->...", fr.tangent, H, fr.tangent)
            out["ddv0"] = tHt - fr.curvature * out["vn"]
        return out

    def at_node(self, mesh, node):
        x = np.array(mesh.nodes[node].position)
        val = self.value(x)
        if not np.all(np.isfinite(val)) or not np.all(np.isfinite(self.gradient(x))):
            raise ValueError(f"trace data not finite at node {node}")
        return float(val), np.asarray(self.gradient(x), dtype=float)


def linear_trace(a: float, b1: float, b2: float) -> SmoothTrace:
    """Trace of ``u(x) = a + b1 x1 + b2 x2``."""
    b = np.array([b1, b2], dtype=float)
    return SmoothTrace(
        value=lambda x: a + np.asarray(x) @ b,
        gradient=lambda x: np.broadcast_to(b, np.shape(x)).copy(),
        hessian=lambda x: np.zeros(np.shape(x)[:-1] + (2, 2)),
    )


@dataclass(frozen=True, eq=False)
class NeumannTrace:
    """Neumann-type trace given by element callables and point values."""

    m_nn: Callable[[Element, np.ndarray], np.ndarray]
    m_sf: Callable[[Element, np.ndarray], np.ndarray]
    m_J: Mapping[int, float] = field(default_factory=dict)
    mesh: BoundaryMesh | None = None

    @classmethod
    def from_coeffs(cls, c: NeumannCoeffs) -> "NeumannTrace":
        jv = {z: float(c.values[k]) for z, k in c.space.j_index.items()}
        return cls(
            m_nn=lambda e, t: eval_neumann(c, e, t)["q_nn"],
            m_sf=lambda e, t: eval_neumann(c, e, t)["q_sf"],
            m_J=jv,
            mesh=c.space.mesh,
        )


# ---------------------------------------------------------------------------
# Dirichlet space


@dataclass(frozen=True, eq=False)
class DirichletSpace:
    """Discrete Dirichlet traces of degree ``p``.

    Global DOFs: for every node ``z`` the triple ``(v0(z), w1(z), w2(z))``
    at indices ``3z, 3z+1, 3z+2``; then per element ``p`` moments of ``vn``
    and ``p-1`` moments of ``v0`` against the orthonormal Legendre basis,
    normalized by ``1/h_E``.  Element-local ``v0`` has degree ``p+2``
    (``3`` for ``p = 0``) and ``vn`` degree ``p+1``.
    """

    mesh: BoundaryMesh
    p: int

    def __post_init__(self):
        p = self.p
        if p < 0:
            raise ValueError("degree must be nonnegative")
        object.__setattr__(self, "deg0", p + 2 + (1 if p == 0 else 0))
        object.__setattr__(self, "degn", p + 1)
        object.__setattr__(self, "n_vn_mom", p)
        object.__setattr__(self, "n_v0_mom", max(p - 1, 0))
        c0, cn = [], []
        for e in self.mesh.elements:
            a, b = self._local_maps(e)
            c0.append(a)
            cn.append(b)
        object.__setattr__(self, "C0", np.array(c0))
        object.__setattr__(self, "Cn", np.array(cn))
        nm = self.n_vn_mom + self.n_v0_mom
        ld = []
        for e in self.mesh.elements:
            nodal = [3 * e.start, 3 * e.start + 1, 3 * e.start + 2, 3 * e.end, 3 * e.end + 1, 3 * e.end + 2]
            mom = 3 * self.mesh.n_nodes + e.index * nm + np.arange(nm)
            ld.append(np.concatenate([nodal, mom]).astype(int))
        object.__setattr__(self, "local_dofs", np.array(ld))

    @property
    def nloc(self) -> int:
        return 6 + self.n_vn_mom + self.n_v0_mom

    @property
    def dim(self) -> int:
        return 3 * self.mesh.n_nodes + self.mesh.n_elements * (self.n_vn_mom + self.n_v0_mom)

    def _local_maps(self, e: Element):
        """Matrices mapping local DOFs to Legendre coefficients of v0 and vn."""
        nloc = self.nloc
        ends = np.array([0.0, 1.0])
        fr = frame_at(e, ends)
        inv_sp = 1.0 / e.speed(ends)
        qt, qw = gauss_legendre(self.deg0 + 4)
        sp_q = e.speed(qt)

        # v0 conditions
        L = legendre_basis(self.deg0, ends)
        dL = legendre_basis(self.deg0, ends, 1) * inv_sp
        rows = [L[:, 0], dL[:, 0], L[:, 1], dL[:, 1]]
        S = np.zeros((self.deg0 + 1, nloc))
        S[0, 0] = 1.0
        S[1, 1:3] = fr.tangent[0]
        S[2, 3] = 1.0
        S[3, 4:6] = fr.tangent[1]
        Lq = legendre_basis(self.deg0, qt)
        for k in range(self.n_v0_mom):
            test = legendre_basis(k, qt)[k]
            rows.append(Lq @ (qw * test * sp_q) / e.h)
            S[4 + k, 6 + self.n_vn_mom + k] = 1.0
        C0 = np.linalg.solve(np.array(rows), S)

        Ln = legendre_basis(self.degn, ends)
        rows = [Ln[:, 0], Ln[:, 1]]
        S = np.zeros((self.degn + 1, nloc))
        S[0, 1:3] = fr.normal[0]
        S[1, 4:6] = fr.normal[1]
        Lq = legendre_basis(self.degn, qt)
        for k in range(self.n_vn_mom):
            test = legendre_basis(k, qt)[k]
            rows.append(Lq @ (qw * test * sp_q) / e.h)
            S[2 + k, 6 + k] = 1.0
        Cn = np.linalg.solve(np.array(rows), S)
        return C0, Cn

    def basis_on_element(self, e: Element, t) -> dict[str, np.ndarray]:
        """Local basis values, shape ``(nloc,) + t.shape``, with arc-length derivatives."""
        t = np.asarray(t, dtype=float)
        inv_sp, curv, _ = _arc_derivs(e, t)
        C0, Cn = self.C0[e.index], self.Cn[e.index]
        L = legendre_basis(self.deg0, t)
        dL = legendre_basis(self.deg0, t, 1)
        ddL = legendre_basis(self.deg0, t, 2)
        Ln = legendre_basis(self.degn, t)
        dLn = legendre_basis(self.degn, t, 1)
        v0 = np.tensordot(C0.T, L, 1)
        dt = np.tensordot(C0.T, dL, 1)
        ddt = np.tensordot(C0.T, ddL, 1)
        return {
            "v0": v0,
            "dv0": dt * inv_sp,
            "ddv0": ddt * inv_sp**2 - curv * dt,
            "vn": np.tensordot(Cn.T, Ln, 1),
            "dvn": np.tensordot(Cn.T, dLn, 1) * inv_sp,
        }


def dirichlet_dim_formula(mesh: BoundaryMesh, p: int) -> int:
    return (2 * p + 2 + (1 if p == 0 else 0)) * mesh.n_elements


@dataclass(frozen=True, eq=False)
class DirichletCoeffs:
    space: DirichletSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} coefficients, got shape {v.shape}")
        object.__setattr__(self, "values", v)


def eval_dirichlet(c: DirichletCoeffs, e: Element, t) -> dict[str, np.ndarray]:
    basis = c.space.basis_on_element(e, t)
    loc = c.values[c.space.local_dofs[e.index]]
    return {k: np.tensordot(loc, v, 1) for k, v in basis.items()}


@dataclass(frozen=True, eq=False)
class DiscreteTrace(TraceFunctions):
    """A member of the discrete Dirichlet space viewed as a trace."""

    coeffs: DirichletCoeffs

    def on_element(self, e, t):
        return eval_dirichlet(self.coeffs, e, t)

    def at_node(self, mesh, node):
        v = self.coeffs.values
        return float(v[3 * node]), v[3 * node + 1 : 3 * node + 3].copy()


def as_trace(v) -> TraceFunctions:
    return DiscreteTrace(v) if isinstance(v, DirichletCoeffs) else v


def dirichlet_dofs(g: TraceFunctions, space: DirichletSpace, n_quad: int = DATA_QUAD) -> np.ndarray:
    """Values of the DOF functionals of the discrete Dirichlet space applied to ``g``."""
    g = as_trace(g)
    mesh = space.mesh
    out = np.zeros(space.dim)
    for z in range(mesh.n_nodes):
        v0, w = g.at_node(mesh, z)
        out[3 * z] = v0
        out[3 * z + 1 : 3 * z + 3] = w
    nm = space.n_vn_mom + space.n_v0_mom
    if nm == 0:
        return out
    qt, qw = gauss_legendre(max(n_quad, space.p + 4))
    for e in mesh.elements:
        tr = g.on_element(e, qt)
        wts = qw * e.speed(qt) / e.h
        base = 3 * mesh.n_nodes + e.index * nm
        if space.n_vn_mom:
            out[base : base + space.n_vn_mom] = legendre_basis(space.n_vn_mom - 1, qt) @ (wts * tr["vn"])
        if space.n_v0_mom:
            out[base + space.n_vn_mom : base + nm] = legendre_basis(space.n_v0_mom - 1, qt) @ (wts * tr["v0"])
    return out


def interpolate_Ih(g: TraceFunctions, space: DirichletSpace) -> DirichletCoeffs:
    """Canonical interpolation: the result has the same DOF values as ``g``."""
    return DirichletCoeffs(space, dirichlet_dofs(g, space))


def _h10_gram(space: DirichletSpace, n_quad: int):
    qt, qw = gauss_legendre(n_quad)
    G = np.zeros((space.dim, space.dim))
    for e in space.mesh.elements:
        b = space.basis_on_element(e, qt)
        w = qw * e.speed(qt)
        loc = b["v0"] @ (w * b["v0"]).T + b["dv0"] @ (w * b["dv0"]).T + b["vn"] @ (w * b["vn"]).T
        idx = space.local_dofs[e.index]
        G[np.ix_(idx, idx)] += loc
    return G


def project_Pih(g: TraceFunctions, space: DirichletSpace, n_quad: int = DATA_QUAD) -> DirichletCoeffs:
    """Orthogonal projection in ``<u0,v0> + <du0,dv0> + <un,vn>`` onto the discrete space."""
    g = as_trace(g)
    qt, qw = gauss_legendre(n_quad)
    G = _h10_gram(space, n_quad)
    rhs = np.zeros(space.dim)
    for e in space.mesh.elements:
        b = space.basis_on_element(e, qt)
        tr = g.on_element(e, qt)
        w = qw * e.speed(qt)
        loc = b["v0"] @ (w * tr["v0"]) + b["dv0"] @ (w * tr["dv0"]) + b["vn"] @ (w * tr["vn"])
        np.add.at(rhs, space.local_dofs[e.index], loc)
    try:
        cho = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular Gram matrix of the Dirichlet basis") from exc
    y = np.linalg.solve(cho, rhs)
    return DirichletCoeffs(space, np.linalg.solve(cho.T, y))


def h10_error(v: DirichletCoeffs, g: TraceFunctions, n_quad: int = DATA_QUAD) -> float:
    """``H^1 x L^2`` distance between a discrete trace and ``g``."""
    g = as_trace(g)
    qt, qw = gauss_legendre(n_quad)
    total = 0.0
    for e in v.space.mesh.elements:
        a = eval_dirichlet(v, e, qt)
        b = g.on_element(e, qt)
        w = qw * e.speed(qt)
        total += np.sum(w * ((a["v0"] - b["v0"]) ** 2 + (a["dv0"] - b["dv0"]) ** 2 + (a["vn"] - b["vn"]) ** 2))
    return float(np.sqrt(total))


def project_neumann_components(m: NeumannTrace, space: NeumannSpace, n_quad: int = DATA_QUAD) -> NeumannCoeffs:
    """Element-wise L2 projections of ``m_nn`` and ``m_sf``; point values copied."""
    qt, qw = gauss_legendre(n_quad)
    out = np.zeros(space.dim)
    for e in space.mesh.elements:
        w = qw * e.speed(qt)
        B = space.nn_basis(e, qt)
        out[space.nn_dofs(e.index)] = np.linalg.solve(B @ (w * B).T, B @ (w * m.m_nn(e, qt)))
        if space.n_sf:
            B = space.sf_basis(e, qt)
            out[space.sf_dofs(e.index)] = np.linalg.solve(B @ (w * B).T, B @ (w * m.m_sf(e, qt)))
    for z, k in space.j_index.items():
        out[k] = m.m_J.get(z, 0.0)
    return NeumannCoeffs(space, out)


def duality_pair(q, v, n_quad: int | None = None) -> float:
    """``l_q(v)``; ``q`` is a coefficient vector or a Neumann trace on ``v``'s mesh."""
    v = as_trace(v)
    if isinstance(q, NeumannCoeffs):
        mesh = q.space.mesh
        p = q.space.deg_nn
        q = NeumannTrace.from_coeffs(q)
    else:
        if q.mesh is None:
            raise ValueError("Neumann trace has no mesh attached")
        mesh = q.mesh
        p = 2
    n = n_quad or max(2 * p + 6, DATA_QUAD)
    qt, qw = gauss_legendre(n)
    total = 0.0
    for e in mesh.elements:
        tr = v.on_element(e, qt)
        w = qw * e.speed(qt)
        total += np.sum(w * (q.m_sf(e, qt) * tr["v0"] - q.m_nn(e, qt) * tr["vn"]))
    for z, qj in q.m_J.items():
        total += qj * v.at_node(mesh, z)[0]
    return float(total)


def exact_neumann_trace(case, model: PlateModel, mesh: BoundaryMesh) -> NeumannTrace:
    """Neumann trace of ``case.u`` for the moment tensor ``M = -C grad grad u``.

    ``m_nn = n.M.n``, ``m_sf = n.div M + d/ds (t.M.n)`` and ``m_J`` is the jump
    (after minus before) of ``t.M.n`` at the corners.
    """
    nu = model.nu

    def moment(x):
        return -model.apply_C(case.hessian(x))

    def m_nn(e, t):
        fr = frame_at(e, t)
        return np.einsum("...i,...ij,...j->...", fr.normal, moment(fr.point), fr.normal)

    def m_sf(e, t):
        fr = frame_at(e, t)
        n, tg, k = fr.normal, fr.tangent, fr.curvature
        M = moment(fr.point)
        T3 = case.third(fr.point)
        grad_lap = np.einsum("...iik->...k", T3)
        nMn = np.einsum("...i,...ij,...j->...", n, M, n)
        tMt = np.einsum("...i,...ij,...j->...", tg, M, tg)
        ttn = np.einsum("...ijk,...i,...j,...k->...", T3, tg, tg, n)
        return -np.sum(n * grad_lap, axis=-1) - k * nMn + k * tMt - (1 - nu) * ttn

    mj: dict[int, float] = {}
    for z in range(mesh.n_nodes):
        if not mesh.nodes[z].is_corner:
            mj[z] = 0.0
            continue
        M = moment(np.array(mesh.nodes[z].position))
        fa = frame_at(mesh.element_after(z), 0.0)
        fb = frame_at(mesh.element_before(z), 1.0)
        mj[z] = float(fa.tangent @ M @ fa.normal - fb.tangent @ M @ fb.normal)
    return NeumannTrace(m_nn, m_sf, mj, mesh)
