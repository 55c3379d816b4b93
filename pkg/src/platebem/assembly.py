"""Dense Galerkin matrices of the single-layer and double-layer operators.

Rows are indexed by a :class:`NeumannSpace` (the basis functionals
``phi_i``), columns either by a Neumann space (single layer), by a
discrete Dirichlet space, or by a single trace function (double layer and
duality pairing).

Entries of the single-layer matrix are ``phi_i^x phi_j^y G(x - y)`` where a
Neumann functional acts on a smooth function by
``phi(f) = int q_sf f - int q_nn d_n f + sum_z q_J(z) f(z)``.

The double-layer pairing uses integrated-by-parts forms for the
hypersingular parts, so only weakly singular kernels are integrated:

* ``<K0 g, q_sf>`` with the kernel of the Laplace double layer, a tangential
  part and the normal part ``n.HG.n``;
* ``<Kn g, q_nn>`` split into a log kernel against ``d_s g0 d_s q_nn``, node
  terms with jumps of ``q_nn``, a moment-tensor part acting on
  ``d_s(d_s g0 n)``, node terms with jumps of ``d_s g0 n`` and the
  ``n_x``-derivative of the normal part;
* vertex rows ``K0 g(z)`` including the angle correction ``(sigma - 1/2) g0(z)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import BoundaryMesh, Element, chord, frame_at
from .kernels import KernelArgs, PlateModel, k_kernel, v_kernel
from .quadrature import PairKind, classify_pair, gauss_legendre, log_rule, pair_rule
from .trace_spaces import (
    DATA_QUAD,
    DirichletSpace,
    NeumannSpace,
    TraceFunctions,
    linear_trace,
)


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature orders.

    ``gauss``: Gauss points per direction on disjoint pairs (doubled for
    pairs closer than the larger element length).  ``log_degree``:
    exactness degree of the logarithmic rule on touching pairs and at
    vertices; ``None`` selects ``max(2p + 6, log_floor)``.
    """

    gauss: int = 16
    log_degree: int | None = None
    log_floor: int = 10

    def __post_init__(self):
        if self.gauss < 1:
            raise ValueError("quadrature order must be at least 1")
        if self.log_degree is not None and self.log_degree < 0:
            raise ValueError("log-rule degree must be nonnegative")

    def log_deg(self, p: int) -> int:
        if self.log_degree is not None:
            return self.log_degree
        return max(2 * p + 6, self.log_floor)

    def doubled(self) -> "QuadratureConfig":
        return QuadratureConfig(2 * self.gauss, 2 * self.log_deg(0) if self.log_degree else None, 2 * self.log_floor)


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    entries: np.ndarray
    row_space: object
    col_space: object

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class MultiplierBasis:
    """The functions 1, x1, x2 spanning the affine polynomials."""

    traces: tuple[TraceFunctions, ...] = (
        linear_trace(1.0, 0.0, 0.0),
        linear_trace(0.0, 1.0, 0.0),
        linear_trace(0.0, 0.0, 1.0),
    )

    def __len__(self):
        return len(self.traces)


# ---------------------------------------------------------------------------
# shared helpers


class _Frames:
    """Frames of all elements at a fixed set of parameters."""

    def __init__(self, mesh: BoundaryMesh, t: np.ndarray):
        frs = [frame_at(e, t) for e in mesh.elements]
        self.t = t
        self.x = np.array([f.point for f in frs])
        self.n = np.array([f.normal for f in frs])
        self.tan = np.array([f.tangent for f in frs])
        self.kappa = np.array([f.curvature for f in frs])
        self.speed = np.array([e.speed(t) for e in mesh.elements])


def _element_distances(mesh: BoundaryMesh, samples: int = 9) -> np.ndarray:
    t = np.linspace(0.0, 1.0, samples)
    pts = np.array([e.point(t) for e in mesh.elements])
    d = np.linalg.norm(pts[:, None, :, None, :] - pts[None, :, None, :, :], axis=-1)
    return d.min(axis=(2, 3))


def _pair_groups(mesh: BoundaryMesh):
    """For every element: (far, near, touching) lists of partner elements."""
    dist = _element_distances(mesh)
    h = np.array([e.h for e in mesh.elements])
    out = []
    for e in mesh.elements:
        far, near, touch = [], [], []
        for f in mesh.elements:
            kind = classify_pair(e, f).kind
            if kind is not PairKind.DISJOINT:
                touch.append(f.index)
            elif dist[e.index, f.index] < max(h[e.index], h[f.index]):
                near.append(f.index)
            else:
                far.append(f.index)
        out.append((np.array(far, dtype=int), np.array(near, dtype=int), touch))
    return out


def _check_mesh(*spaces):
    mesh = spaces[0].mesh
    for s in spaces[1:]:
        if s.mesh is not mesh:
            raise ValueError("spaces live on different meshes")
    if mesh.n_elements < 3:
        raise ValueError("assembly needs at least three elements; refine the mesh")
    return mesh


def _touching_rule(e: Element, f: Element, n: int, deg: int):
    pc = classify_pair(e, f)
    return pair_rule(pc, "log_singular", n, deg)


def _vertex_rule(f: Element, z: int, n: int, deg: int):
    """1D rule on ``f`` for an integrand singular at node ``z`` (or regular)."""
    if z == f.start:
        r = log_rule(deg)
        return r.nodes, r.weights
    if z == f.end:
        r = log_rule(deg)
        return 1.0 - r.nodes, r.weights
    r = gauss_legendre(2 * n)
    return r.nodes, r.weights


def _vertex_diff(f: Element, z: int, zp: np.ndarray, t) -> np.ndarray:
    """``z - f.point(t)``, computed along ``f`` when ``z`` is one of its ends."""
    if z == f.start:
        return f.offset(0.0, t)
    if z == f.end:
        return f.offset(1.0, t)
    return zp - f.point(t)


@dataclass(frozen=True, eq=False)
class _Chunk:
    key: str
    idx: np.ndarray
    w: np.ndarray
    x: np.ndarray
    n: np.ndarray
    tan: np.ndarray
    kappa: np.ndarray
    speed: np.ndarray
    d: np.ndarray


class _VertexQuadrature:
    """Rules for integrals over the whole boundary of functions singular at a node.

    The two elements meeting at the node use the logarithmic rule with the
    singular end at the node, all others a Gauss rule with ``2n`` points.
    """

    def __init__(self, mesh: BoundaryMesh, n: int, deg: int):
        self.mesh = mesh
        tg, wg = gauss_legendre(2 * n)
        lr = log_rule(deg)
        self.rules = {
            "regular": (tg, wg),
            "start": (lr.nodes, lr.weights),
            "end": (1.0 - lr.nodes, lr.weights),
        }
        self.frames = {k: _Frames(mesh, t) for k, (t, _) in self.rules.items()}

    def chunks(self, z: int):
        mesh = self.mesh
        zp = np.array(mesh.nodes[z].position)
        ea, eb = mesh.element_after(z), mesh.element_before(z)
        mask = np.ones(mesh.n_elements, dtype=bool)
        mask[[ea.index, eb.index]] = False
        idx = np.nonzero(mask)[0]
        fr = self.frames["regular"]
        yield _Chunk("regular", idx, self.rules["regular"][1], fr.x[idx], fr.n[idx], fr.tan[idx],
                     fr.kappa[idx], fr.speed[idx], zp - fr.x[idx])
        for key, e, end in (("start", ea, 0.0), ("end", eb, 1.0)):
            t, w = self.rules[key]
            fr = self.frames[key]
            i = np.array([e.index])
            yield _Chunk(key, i, w, fr.x[i], fr.n[i], fr.tan[i], fr.kappa[i], fr.speed[i], e.offset(end, t)[None])

    def stack(self, fn) -> dict:
        """Per-rule arrays ``fn(element, t)`` stacked over all elements."""
        return {k: np.array([fn(e, t) for e in self.mesh.elements]) for k, (t, _) in self.rules.items()}


# ---------------------------------------------------------------------------
# single layer


def _neumann_col_basis(space: NeumannSpace, e: Element, t) -> np.ndarray:
    """Basis values ``(nt, n_nn + n_sf)`` ordered [nn..., sf...]."""
    return np.concatenate([space.nn_basis(e, t), space.sf_basis(e, t)], axis=0).T


def _neumann_dofs(space: NeumannSpace, e: int) -> np.ndarray:
    return np.concatenate([space.nn_dofs(e), space.sf_dofs(e)])


def _v_integrand(xp, nx, yp, ny, b, n_nn, d=None):
    """Integrands paired with the row nn and sf densities; ``b`` has the basis axis last."""
    args = KernelArgs(x=xp, y=yp, n_x=nx, n_y=ny, diff=d)
    G = v_kernel("sf_sf", args)[..., None]
    gy = v_kernel("nn_sf", args)[..., None]
    gx = v_kernel("sf_nn", args)[..., None]
    hnn = v_kernel("nn_nn", args)[..., None]
    bnn, bsf = b[..., :n_nn], b[..., n_nn:]
    i_sf = np.concatenate([gy * bnn, G * bsf], axis=-1)
    i_nn = np.concatenate([-hnn * bnn, -gx * bsf], axis=-1)
    return i_nn, i_sf


def _vertex_v(z: int, space: NeumannSpace, vq: "_VertexQuadrature", cb: dict) -> np.ndarray:
    """Row vector ``phi_j(G(z - .))`` over the element DOFs of ``space``."""
    zp = np.array(space.mesh.nodes[z].position)
    out = np.zeros(space.dim)
    n_nn = space.n_nn
    for ch in vq.chunks(z):
        args = KernelArgs(x=zp, y=ch.x, n_y=ch.n, diff=ch.d)
        ww = ch.w * ch.speed
        b = cb[ch.key][ch.idx]
        vals = np.concatenate(
            [
                np.einsum("kt,ktc->kc", ww * v_kernel("nn_sf", args), b[..., :n_nn]),
                np.einsum("kt,ktc->kc", ww * v_kernel("J_sf", args), b[..., n_nn:]),
            ],
            axis=1,
        )
        out[np.array([_neumann_dofs(space, i) for i in ch.idx])] = vals
    return out


def assemble_V(
    row: NeumannSpace,
    col: NeumannSpace | None = None,
    model: PlateModel | None = None,
    quad: QuadratureConfig = QuadratureConfig(),
) -> DenseMatrix:
    """Single-layer Galerkin matrix ``A[i, j] = <V phi_j, phi_i>``."""
    col = row if col is None else col
    mesh = _check_mesh(row, col)
    deg = quad.log_deg(max(row.deg_nn, col.deg_nn))
    A = np.zeros((row.dim, col.dim))
    n = quad.gauss
    groups = _pair_groups(mesh)
    frames = {}
    for m in (n, 2 * n):
        t, w = gauss_legendre(m)
        fr = _Frames(mesh, t)
        cb = np.array([_neumann_col_basis(col, e, t) for e in mesh.elements])
        frames[m] = (fr, w, cb)
    col_dofs = np.array([_neumann_dofs(col, e.index) for e in mesh.elements])
    ncn = col.n_nn

    for e in mesh.elements:
        far, near, touch = groups[e.index]
        rd = _neumann_dofs(row, e.index)
        for m, idx in ((n, far), (2 * n, near)):
            if len(idx) == 0:
                continue
            fr, w, cb = frames[m]
            wx = w * fr.speed[e.index]
            i_nn, i_sf = _v_integrand(
                fr.x[e.index][None, :, None], fr.n[e.index][None, :, None],
                fr.x[idx][:, None], fr.n[idx][:, None], cb[idx][:, None], ncn,
            )
            wy = (w * fr.speed[idx])[:, None, :, None]
            p_nn = np.sum(i_nn * wy, axis=2)
            p_sf = np.sum(i_sf * wy, axis=2)
            t = fr.t
            r_nn = row.nn_basis(e, t) * wx
            r_sf = row.sf_basis(e, t) * wx
            block = np.concatenate(
                [np.einsum("ax,mxc->mac", r_nn, p_nn), np.einsum("ax,mxc->mac", r_sf, p_sf)], axis=1
            )
            A[rd[None, :, None], col_dofs[idx][:, None, :]] = block
        for fi in touch:
            f = mesh.elements[fi]
            rule = _touching_rule(e, f, n, deg)
            fx, fy = frame_at(e, rule.s), frame_at(f, rule.t)
            b = _neumann_col_basis(col, f, rule.t)
            d = chord(e, rule.s, f, rule.t)
            i_nn, i_sf = _v_integrand(fx.point, fx.normal, fy.point, fy.normal, b, ncn, d)
            ww = rule.weights * e.speed(rule.s) * f.speed(rule.t)
            block = np.concatenate(
                [(row.nn_basis(e, rule.s) * ww) @ i_nn, (row.sf_basis(e, rule.s) * ww) @ i_sf], axis=0
            )
            A[np.ix_(rd, col_dofs[fi])] = block

    vq = _VertexQuadrature(mesh, n, deg)
    cb_col = vq.stack(lambda e, t: _neumann_col_basis(col, e, t))
    cb_row = cb_col if row is col else vq.stack(lambda e, t: _neumann_col_basis(row, e, t))
    for z, k in row.j_index.items():
        A[k, :] += _vertex_v(z, col, vq, cb_col)
    for z, k in col.j_index.items():
        A[:, k] += _vertex_v(z, row, vq, cb_row)
    for zr, kr in row.j_index.items():
        xr = np.array(mesh.nodes[zr].position)
        for zc, kc in col.j_index.items():
            A[kr, kc] = v_kernel("J_sf", KernelArgs(x=xr, y=np.array(mesh.nodes[zc].position)))
    return DenseMatrix(A, row, col)


# ---------------------------------------------------------------------------
# column sources for the double layer and the pairing


class _BasisSource:
    """Columns = basis of a discrete Dirichlet space."""

    def __init__(self, space: DirichletSpace):
        self.space = space
        self.ncols = space.dim
        self.cols = space.local_dofs

    def fields(self, e: Element, t) -> dict[str, np.ndarray]:
        b = self.space.basis_on_element(e, t)
        return {k: np.moveaxis(v, 0, -1) for k, v in b.items()}

    def node_value(self, mesh, z) -> np.ndarray:
        out = np.zeros(self.ncols)
        out[3 * z] = 1.0
        return out

    def node_dv0_jump(self, mesh, z) -> np.ndarray:
        """``[d_s v0 n](z)`` (after minus before) as an ``(ncols, 2)`` array."""
        out = np.zeros((self.ncols, 2))
        for e, t, sign in ((mesh.element_after(z), 0.0, 1.0), (mesh.element_before(z), 1.0, -1.0)):
            dv0 = self.space.basis_on_element(e, np.array([t]))["dv0"][:, 0]
            nrm = frame_at(e, t).normal
            np.add.at(out, self.cols[e.index], sign * dv0[:, None] * nrm[None, :])
        return out


class _TraceSource:
    """A single column given by a trace function."""

    def __init__(self, g: TraceFunctions, mesh: BoundaryMesh):
        self.g = g
        self.ncols = 1
        self.cols = np.zeros((mesh.n_elements, 1), dtype=int)

    def fields(self, e, t):
        tr = self.g.on_element(e, t)
        if "ddv0" not in tr:
            raise ValueError("exact double-layer application needs second derivatives of the trace")
        return {k: np.asarray(tr[k], dtype=float)[..., None] for k in ("v0", "dv0", "ddv0", "vn")}

    def node_value(self, mesh, z):
        return np.array([self.g.at_node(mesh, z)[0]])

    def node_dv0_jump(self, mesh, z):
        out = np.zeros((1, 2))
        for e, t, sign in ((mesh.element_after(z), 0.0, 1.0), (mesh.element_before(z), 1.0, -1.0)):
            dv0 = self.g.on_element(e, np.array([t]))["dv0"][0]
            out[0] += sign * dv0 * frame_at(e, t).normal
        return out


def _stack_fields(source, mesh, t):
    per = [source.fields(e, t) for e in mesh.elements]
    return {k: np.array([p[k] for p in per]) for k in per[0]}


# ---------------------------------------------------------------------------
# double layer


def _k_integrand(xp, nx, yp, ny, ty, ky, F, model: PlateModel, d=None):
    """Integrands for sf rows, nn rows and d_s(nn) rows; ``F`` fields have the column axis last."""
    args = KernelArgs(x=xp, y=yp, n_x=nx, n_y=ny, t_y=ty, diff=d)

    def k(name):
        return k_kernel(name, args, model)

    normal_part = k("n_const") + k("n_log") + k("n_rational")
    i_sf = k("dlp_laplace")[..., None] * F["v0"] + k("t_part")[..., None] * F["dv0"] + normal_part[..., None] * F["vn"]
    fvec = k("ktnn_c_log") + k("ktnn_c_rational")
    f_n = np.sum(fvec * ny, axis=-1)
    f_t = np.sum(fvec * ty, axis=-1) * ky
    knnn = k("knnn_log_deriv") + k("knnn_rational_deriv")
    i_nn = knnn[..., None] * F["vn"] - (1.0 - model.nu) * (f_n[..., None] * F["ddv0"] + f_t[..., None] * F["dv0"])
    d = args.d()
    logr = 0.5 * np.log(np.maximum(np.sum(d * d, axis=-1), 1e-300))
    i_dnn = (logr / (2 * np.pi))[..., None] * F["dv0"]
    return i_sf, i_nn, i_dnn


def _nn_endpoint_terms(q_space: NeumannSpace, S: np.ndarray) -> np.ndarray:
    """``sum_E [phi(end) S(end) - phi(start) S(start)]`` over the nn rows.

    For a coefficient vector ``c`` of ``q_nn``, ``c @ result`` equals
    ``-sum_z [q_nn](z) S(z)``, so it vanishes when ``q_nn`` is continuous.
    """
    out = np.zeros((q_space.dim, S.shape[1]))
    for e in q_space.mesh.elements:
        ends = q_space.nn_basis(e, np.array([0.0, 1.0]))
        out[q_space.nn_dofs(e.index)] += np.outer(ends[:, 1], S[e.end]) - np.outer(ends[:, 0], S[e.start])
    return out


def _apply_double_layer(q_space: NeumannSpace, source, model: PlateModel, quad: QuadratureConfig) -> np.ndarray:
    mesh = q_space.mesh
    K = np.zeros((q_space.dim, source.ncols))
    n = quad.gauss
    deg = quad.log_deg(q_space.deg_nn)
    groups = _pair_groups(mesh)
    data = {}
    for m in (n, 2 * n):
        t, w = gauss_legendre(m)
        data[m] = (_Frames(mesh, t), w, _stack_fields(source, mesh, t))
    cols = source.cols
    nu = model.nu

    def rows_of(e, s, ww, i_sf, i_nn, i_dnn, contract):
        r_nn = q_space.nn_basis(e, s) * ww
        r_dnn = q_space.nn_basis(e, s, der=1) * ww
        r_sf = q_space.sf_basis(e, s) * ww
        nn = -(contract(r_nn, i_nn) + contract(r_dnn, i_dnn))
        sf = contract(r_sf, i_sf)
        return nn, sf

    for e in mesh.elements:
        far, near, touch = groups[e.index]
        rnn = q_space.nn_dofs(e.index)
        rsf = q_space.sf_dofs(e.index)
        for m, idx in ((n, far), (2 * n, near)):
            if len(idx) == 0:
                continue
            fr, w, F = data[m]
            ii = e.index
            Fg = {k: v[idx][:, None] for k, v in F.items()}
            i_sf, i_nn, i_dnn = _k_integrand(
                fr.x[ii][None, :, None], fr.n[ii][None, :, None],
                fr.x[idx][:, None], fr.n[idx][:, None], fr.tan[idx][:, None], fr.kappa[idx][:, None],
                Fg, model,
            )
            wy = (w * fr.speed[idx])[:, None, :, None]
            p = [np.sum(a * wy, axis=2) for a in (i_sf, i_nn, i_dnn)]
            nn, sf = rows_of(e, fr.t, w * fr.speed[ii], *p, lambda r, P: np.einsum("ax,mxc->mac", r, P))
            ci = cols[idx][:, None, :]
            np.add.at(K, (rnn[None, :, None], ci), nn)
            if len(rsf):
                np.add.at(K, (rsf[None, :, None], ci), sf)
        for fi in touch:
            f = mesh.elements[fi]
            rule = _touching_rule(e, f, n, deg)
            fx, fy = frame_at(e, rule.s), frame_at(f, rule.t)
            F = source.fields(f, rule.t)
            i_sf, i_nn, i_dnn = _k_integrand(
                fx.point, fx.normal, fy.point, fy.normal, fy.tangent, fy.curvature, F, model,
                chord(e, rule.s, f, rule.t),
            )
            ww = rule.weights * e.speed(rule.s) * f.speed(rule.t)
            nn, sf = rows_of(e, rule.s, ww, i_sf, i_nn, i_dnn, lambda r, P: r @ P)
            np.add.at(K, (rnn[:, None], cols[fi][None, :]), nn)
            if len(rsf):
                np.add.at(K, (rsf[:, None], cols[fi][None, :]), sf)

    # Node terms of the integrated-by-parts normal component.
    S = np.zeros((mesh.n_nodes, source.ncols))
    jumps = np.zeros((mesh.n_nodes, source.ncols, 2))
    vq = _VertexQuadrature(mesh, n, deg)
    vfields = {k: _stack_fields(source, mesh, t) for k, (t, _) in vq.rules.items()}
    for z in range(mesh.n_nodes):
        for ch in vq.chunks(z):
            logr = 0.5 * np.log(np.maximum(np.sum(ch.d * ch.d, axis=-1), 1e-300))
            vals = np.einsum("kt,ktc->kc", ch.w * ch.speed * logr / (2 * np.pi), vfields[ch.key]["dv0"][ch.idx])
            np.add.at(S[z], cols[ch.idx], vals)
        jumps[z] = source.node_dv0_jump(mesh, z)
    K += _nn_endpoint_terms(q_space, S)
    node_pos = mesh.node_positions
    for e in mesh.elements:
        rnn = q_space.nn_dofs(e.index)
        # sum_z int_E phi(x) F(x, z) dx . [d_s v0 n](z)
        t, w = gauss_legendre(2 * n)
        fx = frame_at(e, t)
        args = KernelArgs(x=fx.point[None], y=node_pos[:, None], n_x=fx.normal[None])
        fvec = k_kernel("ktnn_c_log", args, model) + k_kernel("ktnn_c_rational", args, model)
        vals = np.einsum("ax,zxk->zak", q_space.nn_basis(e, t) * (w * e.speed(t)), fvec)
        for z, end in ((e.start, 0), (e.end, 1)):
            tl, wl = _vertex_rule(e, z, n, deg)
            fl = frame_at(e, tl)
            a1 = KernelArgs(x=fl.point, y=node_pos[z], n_x=fl.normal, diff=-_vertex_diff(e, z, node_pos[z], tl))
            fv = k_kernel("ktnn_c_log", a1, model) + k_kernel("ktnn_c_rational", a1, model)
            vals[z] = (q_space.nn_basis(e, tl) * (wl * e.speed(tl))) @ fv
        K[rnn] += (1.0 - nu) * np.einsum("zak,zck->ac", vals, jumps)

    # Vertex rows: K0 g(z).
    for z, k in q_space.j_index.items():
        zp = np.array(mesh.nodes[z].position)
        for ch in vq.chunks(z):
            F = {key: v[ch.idx] for key, v in vfields[ch.key].items()}
            i_sf, _, _ = _k_integrand(zp, ch.n, ch.x, ch.n, ch.tan, ch.kappa, F, model, ch.d)
            np.add.at(K[k], cols[ch.idx], np.einsum("kt,ktc->kc", ch.w * ch.speed, i_sf))
        K[k] += (mesh.nodes[z].sigma - 0.5) * source.node_value(mesh, z)
    return K


def assemble_K(
    q_space: NeumannSpace,
    y_space: DirichletSpace,
    model: PlateModel,
    quad: QuadratureConfig = QuadratureConfig(),
) -> DenseMatrix:
    """Double-layer matrix ``K[i, j] = <K psi_j, phi_i>``."""
    _check_mesh(q_space, y_space)
    return DenseMatrix(_apply_double_layer(q_space, _BasisSource(y_space), model, quad), q_space, y_space)


def apply_K(
    q_space: NeumannSpace,
    g: TraceFunctions,
    model: PlateModel,
    quad: QuadratureConfig = QuadratureConfig(),
) -> np.ndarray:
    """Vector ``<K g, phi_i>`` for a trace function with known second tangential derivatives."""
    mesh = _check_mesh(q_space)
    return _apply_double_layer(q_space, _TraceSource(g, mesh), model, quad)[:, 0]


# ---------------------------------------------------------------------------
# pairings


def _pairing(q_space: NeumannSpace, source, n_quad: int) -> np.ndarray:
    mesh = q_space.mesh
    P = np.zeros((q_space.dim, source.ncols))
    t, w = gauss_legendre(n_quad)
    for e in mesh.elements:
        F = source.fields(e, t)
        ww = w * e.speed(t)
        c = source.cols[e.index]
        np.add.at(P, (q_space.nn_dofs(e.index)[:, None], c[None, :]), -(q_space.nn_basis(e, t) * ww) @ F["vn"])
        if q_space.n_sf:
            np.add.at(P, (q_space.sf_dofs(e.index)[:, None], c[None, :]), (q_space.sf_basis(e, t) * ww) @ F["v0"])
    for z, k in q_space.j_index.items():
        P[k] += source.node_value(mesh, z)
    return P


class _PairingTraceSource(_TraceSource):
    def fields(self, e, t):
        tr = self.g.on_element(e, t)
        return {k: np.asarray(tr[k], dtype=float)[..., None] for k in ("v0", "vn")}


def assemble_mass_pair(q_space: NeumannSpace, y_space: DirichletSpace, n_quad: int | None = None) -> DenseMatrix:
    """``M[i, j] = l_i(psi_j)``."""
    _check_mesh(q_space, y_space)
    nq = n_quad or max(2 * y_space.p + 8, DATA_QUAD)
    return DenseMatrix(_pairing(q_space, _BasisSource(y_space), nq), q_space, y_space)


def pair_with_trace(q_space: NeumannSpace, g: TraceFunctions, n_quad: int = DATA_QUAD) -> np.ndarray:
    """Vector ``l_i(g)``."""
    return _pairing(q_space, _PairingTraceSource(g, q_space.mesh), n_quad)[:, 0]


def assemble_multiplier(q_space: NeumannSpace, basis: MultiplierBasis = MultiplierBasis()) -> DenseMatrix:
    """``B[i, k] = l_i(tr mu_k)`` for ``mu_k`` in {1, x1, x2}."""
    cols = [pair_with_trace(q_space, g) for g in basis.traces]
    return DenseMatrix(np.stack(cols, axis=1), q_space, basis)


def rhs_from_trace(
    q_space: NeumannSpace, g: TraceFunctions, model: PlateModel, quad: QuadratureConfig = QuadratureConfig()
) -> np.ndarray:
    """``<(K + 1/2) g, phi_i>`` for a smooth trace ``g``."""
    return apply_K(q_space, g, model, quad) + 0.5 * pair_with_trace(q_space, g)


def dump_matrix(M, path: str | Path) -> None:
    """Write a dense matrix as row-major plain text with full precision."""
    np.savetxt(path, np.asarray(M), fmt="%.17g")
