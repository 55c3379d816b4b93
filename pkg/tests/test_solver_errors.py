import math

import numpy as np
import pytest
import scipy.linalg
import sympy as sp

from platebem.assembly import assemble_K, assemble_mass_pair, assemble_multiplier, assemble_V
from platebem.geometry import DomainSpec, build_initial_mesh, build_mesh, inside, parse_domain
from platebem.kernels import PlateModel
from platebem.solver_errors import (
    SaddleSystem,
    energy_error,
    evaluate_interior,
    has_noncolinear_nodes,
    manufactured_case,
    solve,
)
from platebem.trace_spaces import (
    DirichletSpace,
    NeumannCoeffs,
    NeumannTrace,
    exact_neumann_trace,
    neumann_space,
    project_neumann_components,
    project_Pih,
    reference_layout,
)

DOMAINS = ["circle", "square", "pacman"]
rng = np.random.default_rng(5)
x1s, x2s = sp.symbols("x1 x2")
SYMBOLIC = {
    "circle": (x1s**2 + x2s**2) * (x1s**2 + 2 * x1s * x2s - x2s**2),
    "square": (x1s**2 + x2s**2) * sp.sinh(2 * sp.pi * x1s) * sp.cos(2 * sp.pi * x2s),
    "pacman": x1s**4 - x2s**4,
}


def discrete_problem(kind, level, p, nu=0.0):
    mesh = build_mesh(DomainSpec(kind), level)
    model = PlateModel(nu)
    X, Y = neumann_space(mesh, p), DirichletSpace(mesh, p)
    A = assemble_V(X).entries
    B = assemble_multiplier(X).entries
    K = assemble_K(X, Y, model).entries
    M = assemble_mass_pair(X, Y).entries
    case = manufactured_case(kind)
    g_h = project_Pih(case.trace(), Y)
    rhs = (K + 0.5 * M) @ g_h.values
    return mesh, model, X, A, B, rhs, g_h, case


@pytest.mark.parametrize("kind", DOMAINS)
def test_manufactured_derivatives_match_symbolic(kind):
    case = manufactured_case(kind)
    u = SYMBOLIC[kind]
    pts = rng.uniform(-0.1, 0.1, size=(6, 2))
    for i in range(4):
        for j in range(4 - i):
            f = sp.lambdify((x1s, x2s), sp.diff(u, x1s, i, x2s, j) if (i or j) else u)
            ref = np.array([float(f(*p)) for p in pts])
            np.testing.assert_allclose(case.derivative(pts, i, j), ref, rtol=1e-12, atol=1e-13)


def test_pacman_polynomial_identity():
    r, th = sp.symbols("r theta", positive=True)
    polar = SYMBOLIC["pacman"].subs({x1s: r * sp.cos(th), x2s: r * sp.sin(th)})
    assert sp.simplify(polar - r**4 * sp.cos(2 * th)) == 0
    lap = lambda f: sp.diff(f, x1s, 2) + sp.diff(f, x2s, 2)
    assert sp.expand(lap(SYMBOLIC["pacman"])) == 12 * x1s**2 - 12 * x2s**2
    assert sp.simplify(lap(lap(SYMBOLIC["pacman"]))) == 0


def test_square_solution_biharmonic_symbolic():
    lap = lambda f: sp.diff(f, x1s, 2) + sp.diff(f, x2s, 2)
    assert sp.simplify(lap(lap(SYMBOLIC["square"]))) == 0
    assert sp.simplify(lap(sp.sinh(2 * sp.pi * x1s) * sp.cos(2 * sp.pi * x2s))) == 0


def test_circle_solution_biharmonic_fd():
    case = manufactured_case("circle")
    h = 1e-2
    stencil = {(0, 0): 20, (1, 0): -8, (-1, 0): -8, (0, 1): -8, (0, -1): -8,
               (1, 1): 2, (1, -1): 2, (-1, 1): 2, (-1, -1): 2, (2, 0): 1, (-2, 0): 1, (0, 2): 1, (0, -2): 1}
    r = 0.1 * np.sqrt(rng.uniform(0, 1, 100))
    a = rng.uniform(0, 2 * np.pi, 100)
    pts = np.stack([r * np.cos(a), r * np.sin(a)], -1)
    bilap = sum(w * case.value(pts + h * np.array(o)) for o, w in stencil.items()) / h**4
    assert np.abs(bilap).max() <= 1e-4


@pytest.mark.parametrize("kind", DOMAINS)
def test_bilaplacian_vanishes(kind):
    case = manufactured_case(kind)
    pts = rng.uniform(-0.1, 0.1, size=(50, 2))
    scale = np.abs(case.derivative(pts, 4, 0)).max() + np.abs(case.derivative(pts, 2, 2)).max() + 1e-300
    assert np.abs(case.bilaplacian(pts)).max() <= 1e-12 * max(scale, 1.0)


def test_unknown_case():
    with pytest.raises(ValueError):
        manufactured_case("hexagon")


def test_interior_examples():
    assert manufactured_case("circle").value(np.zeros(2)) == 0
    assert manufactured_case("square").value(np.zeros(2)) == 0
    assert manufactured_case("pacman").value(np.array([0.05, 0.0])) == pytest.approx(6.25e-6, rel=1e-14)


def test_direct_solve_consistency():
    _, _, X, A, B, _, _, _ = discrete_problem("pacman", 1, 1)
    N = scipy.linalg.null_space(B.T)
    for _ in range(3):
        c = N @ rng.normal(size=N.shape[1])
        d = rng.normal(size=3)
        sol = solve(SaddleSystem(A, B, A @ c + B @ d, X))
        assert np.abs(sol.m_h.values - c).max() <= 1e-9 * np.abs(c).max()
        assert np.abs(sol.lambda_h - d).max() <= 1e-9 * np.abs(d).max()


@pytest.mark.parametrize("kind", DOMAINS)
@pytest.mark.parametrize("p", [0, 1, 2])
def test_solution_residuals(kind, p):
    _, _, X, A, B, rhs, _, _ = discrete_problem(kind, 1, p)
    system = SaddleSystem(A, B, rhs, X)
    assert system.dim == X.dim + 3
    sol = solve(system)
    m = sol.m_h.values
    assert np.abs(B.T @ m).max() <= 1e-10 * np.abs(B).max() * np.abs(m).max()
    galerkin = A @ m + B @ sol.lambda_h - rhs
    assert np.abs(galerkin).max() <= 1e-10 * np.abs(A).max() * np.abs(m).max()


def test_shape_validation():
    with pytest.raises(ValueError):
        SaddleSystem(np.eye(4), np.zeros((4, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        SaddleSystem(np.eye(4), np.zeros((4, 3)), np.zeros(5))


def test_degenerate_mesh_rejected():
    lens = build_initial_mesh(parse_domain("arc 0 0 0.1 0 180 corner\narc 0 0 0.1 180 360 corner\n"))
    assert lens.n_nodes == 2 and not has_noncolinear_nodes(lens)
    X = neumann_space(lens, 1)
    system = SaddleSystem(np.eye(X.dim), rng.normal(size=(X.dim, 3)), np.ones(X.dim), X)
    with pytest.raises(ValueError, match="non-colinear"):
        solve(system)
    assert has_noncolinear_nodes(build_initial_mesh(DomainSpec("square")))


def test_singular_system_reported():
    with pytest.raises(np.linalg.LinAlgError, match="singular"):
        solve(SaddleSystem(np.zeros((5, 5)), np.zeros((5, 3)), np.ones(5)))


@pytest.mark.parametrize("kind", DOMAINS)
def test_energy_error_of_reference_is_zero(kind):
    mesh = build_mesh(DomainSpec(kind), 1)
    R = reference_layout(mesh, 1)
    m = project_neumann_components(exact_neumann_trace(manufactured_case(kind), PlateModel(), mesh), R)
    assert energy_error(m, m) == 0.0
    # a discrete solution embedded into its own reference layout
    X = neumann_space(mesh, 1)
    c = NeumannCoeffs(X, rng.normal(size=X.dim))
    emb = project_neumann_components(NeumannTrace.from_coeffs(c), R)
    assert energy_error(c, emb) <= 1e-7 * np.abs(c.values).max()


def test_energy_error_permutation_invariance():
    mesh, model, X, A, B, rhs, _, case = discrete_problem("square", 2, 1)
    sol = solve(SaddleSystem(A, B, rhs, X))
    R = reference_layout(mesh, 1)
    ref = project_neumann_components(exact_neumann_trace(case, model, mesh), R)
    A_ref = assemble_V(R).entries
    err = energy_error(sol.m_h, ref, A_ref=A_ref)
    emb = project_neumann_components(NeumannTrace.from_coeffs(sol.m_h), R)
    e = ref.values - emb.values
    perm = rng.permutation(R.dim)
    permuted = math.sqrt(max(0.0, e[perm] @ A_ref[np.ix_(perm, perm)] @ e[perm]))
    assert permuted == pytest.approx(err, rel=1e-9)
    assert energy_error(sol, ref, A_ref=A_ref) == err
    assert energy_error(sol.m_h, ref) == pytest.approx(err, rel=1e-9)


INTERIOR = {
    "circle": [(0.02, 0.03), (-0.04, 0.01), (0.03, -0.05)],
    "square": [(0.03, 0.04), (-0.05, 0.02), (0.04, -0.06)],
    "pacman": [(0.05, 0.0), (0.03, 0.04), (0.02, -0.05)],
}


@pytest.mark.parametrize("kind", DOMAINS)
@pytest.mark.parametrize("nu", [0.0, 0.3])
def test_representation_formula_with_exact_traces(kind, nu):
    mesh = build_mesh(DomainSpec(kind), 3)
    case = manufactured_case(kind)
    model = PlateModel(nu)
    m = exact_neumann_trace(case, model, mesh)
    assert inside(mesh, INTERIOR[kind]).all()
    for x in INTERIOR[kind]:
        val = evaluate_interior(x, m, case.trace(), model, mesh, n_quad=24)
        assert not val.near_boundary
        assert val.value == pytest.approx(case.value(np.array(x)), rel=1e-8)


def test_interior_values_of_discrete_solution():
    mesh, model, X, A, B, rhs, g_h, case = discrete_problem("circle", 3, 1)
    sol = solve(SaddleSystem(A, B, rhs, X))
    origin = evaluate_interior((0.0, 0.0), sol.m_h, g_h, model)
    assert abs(origin.value) <= 1e-8 * 0.1**4
    mesh, model, X, A, B, rhs, g_h, case = discrete_problem("square", 3, 1)
    sol = solve(SaddleSystem(A, B, rhs, X))
    assert abs(evaluate_interior((0.0, 0.0), sol.m_h, g_h, model).value) <= 1e-8 * 0.1**4
    mesh, model, X, A, B, rhs, g_h, case = discrete_problem("pacman", 3, 1)
    sol = solve(SaddleSystem(A, B, rhs, X))
    val = evaluate_interior((0.05, 0.0), sol.m_h, g_h, model).value
    assert val == pytest.approx(6.25e-6, rel=1e-2)


def test_near_boundary_flag():
    mesh, model, X, A, B, rhs, g_h, case = discrete_problem("circle", 1, 1)
    sol = solve(SaddleSystem(A, B, rhs, X))
    assert evaluate_interior((0.099, 0.0), sol.m_h, g_h, model).near_boundary
    assert not evaluate_interior((0.0, 0.0), sol.m_h, g_h, model).near_boundary
