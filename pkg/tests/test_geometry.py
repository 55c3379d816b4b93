import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from platebem.geometry import (
    DomainSpec,
    build_initial_mesh,
    build_mesh,
    frame_at,
    inside,
    parse_domain,
    perimeter,
    refine_uniform,
    sigma,
)

DOMAINS = ["circle", "square", "pacman"]
PERIMETERS = {
    "circle": 2 * math.pi * 0.1,
    "square": 0.8,
    "pacman": 2 * math.pi * 0.1 * 315 / 360 + 0.2,
}


def test_initial_meshes():
    counts = {"circle": (4, 4, 0), "square": (4, 4, 4), "pacman": (4, 4, 3)}
    for kind, (ne, nn, nc) in counts.items():
        mesh = build_initial_mesh(DomainSpec(kind))
        assert (mesh.n_elements, mesh.n_nodes, len(mesh.corners)) == (ne, nn, nc)
        assert mesh.level == 0


def test_initial_node_positions():
    sq = build_initial_mesh(DomainSpec("square")).node_positions
    assert {tuple(np.round(p, 12)) for p in sq} == {(-0.1, -0.1), (0.1, -0.1), (0.1, 0.1), (-0.1, 0.1)}
    pac = build_initial_mesh(DomainSpec("pacman"))
    pos = np.round(pac.node_positions, 5)
    for target in [(0.1, 0.0), (-0.09239, 0.03827), (0.0, 0.0), (-0.09239, -0.03827)]:
        assert any(np.allclose(p, target, atol=1e-5) for p in pos)
    start = [n for n in pac.nodes if np.allclose(n.position, (0.1, 0.0))][0]
    assert not start.is_corner
    circ = build_initial_mesh(DomainSpec("circle")).node_positions
    np.testing.assert_allclose(circ, [[0.1, 0], [0, 0.1], [-0.1, 0], [0, -0.1]], atol=1e-15)


def test_invalid_domain_descriptions():
    with pytest.raises(ValueError):
        DomainSpec("hexagon")
    with pytest.raises(ValueError):
        DomainSpec("circle", scale=0.0)
    with pytest.raises(ValueError):
        DomainSpec("square", scale=-1.0)


def test_refinement_examples():
    m0 = build_initial_mesh(DomainSpec("circle"))
    m1 = refine_uniform(m0)
    assert m1.n_elements == 8 and m1.level == 1
    for e in m1.elements:
        assert e.h == pytest.approx(2 * math.pi * 0.1 / 8, rel=1e-14)
    for kind in DOMAINS:
        m = build_initial_mesh(DomainSpec(kind))
        r = refine_uniform(m)
        assert r.n_nodes == 2 * m.n_nodes
        assert r.h_max == pytest.approx(m.h_max / 2, rel=1e-14)
        assert r.corners == tuple(2 * c for c in m.corners)
        for z, node in enumerate(r.nodes):
            if z % 2:
                assert not node.is_corner and node.sigma == 0.5


@pytest.mark.parametrize("kind", DOMAINS)
@pytest.mark.parametrize("level", [0, 1, 3, 5])
def test_perimeter_and_counts(kind, level):
    mesh = build_mesh(DomainSpec(kind), level)
    assert mesh.n_elements == 4 * 2**level
    assert perimeter(mesh) == pytest.approx(PERIMETERS[kind], rel=1e-12)
    for piece in set(e.piece for e in mesh.elements):
        h = [e.h for e in mesh.elements if e.piece == piece]
        assert max(h) - min(h) <= 1e-12 * max(h)


@pytest.mark.parametrize("kind", DOMAINS)
def test_connectivity(kind):
    mesh = build_mesh(DomainSpec(kind), 2)
    ne = mesh.n_elements
    for i, e in enumerate(mesh.elements):
        assert e.end == mesh.elements[(i + 1) % ne].start
        np.testing.assert_allclose(e.point(1.0), mesh.elements[(i + 1) % ne].point(0.0), atol=1e-15)
        np.testing.assert_allclose(e.point(0.0), mesh.nodes[e.start].position, atol=1e-15)


def test_frame_examples():
    e = build_initial_mesh(DomainSpec("circle")).elements[0]
    fr = frame_at(e, 0.0)
    np.testing.assert_allclose(fr.point, [0.1, 0.0], atol=1e-15)
    np.testing.assert_allclose(fr.normal, [1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(fr.tangent, [0.0, 1.0], atol=1e-14)
    assert abs(fr.curvature) == pytest.approx(10.0, rel=1e-12)
    sq = build_initial_mesh(DomainSpec("square")).elements[0]
    assert frame_at(sq, 0.37).curvature == 0.0


@pytest.mark.parametrize("kind", DOMAINS)
def test_curvature_sign_matches_normal_derivative(kind):
    # d n / ds = kappa t along arc length.
    mesh = build_mesh(DomainSpec(kind), 1)
    for e in mesh.elements:
        t, dt = np.linspace(0.1, 0.9, 5), 1e-6
        fr = frame_at(e, t)
        dn = (frame_at(e, t + dt).normal - frame_at(e, t - dt).normal) / (2 * dt * e.speed(t))[:, None]
        np.testing.assert_allclose(dn, fr.curvature[:, None] * fr.tangent, atol=1e-6 * max(1, abs(fr.curvature).max()))


def test_circle_curvature_is_positive():
    e = build_initial_mesh(DomainSpec("circle")).elements[1]
    assert frame_at(e, 0.5).curvature == pytest.approx(10.0, rel=1e-12)


@given(st.sampled_from(DOMAINS), st.floats(0.0, 1.0), st.integers(0, 7))
def test_frame_orthonormal(kind, t, ei):
    e = build_initial_mesh(DomainSpec(kind)).elements[ei % 4]
    fr = frame_at(e, t)
    assert abs(fr.tangent @ fr.normal) <= 1e-15
    assert np.linalg.norm(fr.tangent) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(fr.normal, [fr.tangent[1], -fr.tangent[0]])


@pytest.mark.parametrize("kind", DOMAINS)
def test_tangent_continuity_at_smooth_nodes(kind):
    mesh = build_mesh(DomainSpec(kind), 3)
    for z, node in enumerate(mesh.nodes):
        before = frame_at(mesh.element_before(z), 1.0)
        after = frame_at(mesh.element_after(z), 0.0)
        if not node.is_corner:
            np.testing.assert_allclose(before.tangent, after.tangent, atol=1e-10)
        else:
            assert np.linalg.norm(before.tangent - after.tangent) > 1e-3


@pytest.mark.parametrize("kind", DOMAINS)
def test_normal_points_outward(kind):
    mesh = build_mesh(DomainSpec(kind), 2)
    eps = 1e-4
    for e in mesh.elements:
        fr = frame_at(e, np.linspace(0.05, 0.95, 7))
        assert not inside(mesh, fr.point + eps * fr.normal).any()
        assert inside(mesh, fr.point - eps * fr.normal).all()


def test_sigma_values():
    circ = build_mesh(DomainSpec("circle"), 1)
    assert all(sigma(circ, z) == 0.5 for z in range(circ.n_nodes))
    sq = build_initial_mesh(DomainSpec("square"))
    assert all(sigma(sq, z) == pytest.approx(0.25, abs=1e-15) for z in range(4))
    pac = build_initial_mesh(DomainSpec("pacman"))
    origin = [z for z, n in enumerate(pac.nodes) if np.allclose(n.position, 0.0)][0]
    assert sigma(pac, origin) == pytest.approx(7 / 8, abs=1e-14)
    notch = [z for z in pac.corners if z != origin]
    assert len(notch) == 2
    # straight edge meeting the circle radially: interior angle pi/2
    for z in notch:
        assert sigma(pac, z) == pytest.approx(0.25, abs=1e-14)


HALF_DISK = """
# half disk of radius 0.1
line -0.1 0 0.1 0 corner
arc 0 0 0.1 0 180 corner
"""


def test_custom_domain_half_disk():
    spec = parse_domain(HALF_DISK)
    mesh = build_initial_mesh(spec)
    assert mesh.n_elements == 2 and len(mesh.corners) == 2
    assert all(sigma(mesh, z) == pytest.approx(0.25) for z in mesh.corners)
    fine = build_mesh(spec, 3)
    assert perimeter(fine) == pytest.approx(0.2 + math.pi * 0.1, rel=1e-12)


def test_custom_domain_detects_smooth_junctions():
    text = "arc 0 0 0.1 0 180\narc 0 0 0.1 180 360\n"
    mesh = build_initial_mesh(parse_domain(text))
    assert mesh.n_elements == 2 and mesh.corners == ()


def test_custom_domain_file(tmp_path):
    from platebem.geometry import load_domain

    path = tmp_path / "dom.txt"
    path.write_text(HALF_DISK)
    assert build_initial_mesh(load_domain(path)).n_elements == 2


@pytest.mark.parametrize(
    "text",
    [
        "",
        "# nothing\n",
        "line 0 0 1 0\nline 1 0 0 1\n",  # not closed
        "line 0 0 0 1\nline 0 1 1 0\nline 1 0 0 0\n",  # clockwise
        "arc 0 0 0.1 0 360\n",  # single element
        "line 0 0 1 0\nline 1 0 1 1\nline 1 1 0 0 smooth\n",  # smooth flag on a corner
        "circle 0 0 1\n",
        "arc 0 0 -1 0 90\n",
        "line 0 0 x 1\n",
    ],
)
def test_custom_domain_errors(text):
    with pytest.raises(ValueError):
        build_initial_mesh(parse_domain(text))
