"""Piecewise-smooth boundary curves, boundary meshes and local frames.

A boundary is a closed, counterclockwise chain of smooth arcs (straight
segments and circular arcs).  Each arc is parametrized proportionally to
arc length, so an element obtained by bisecting parameter intervals has
constant speed ``|gamma'| = h_E``.

Conventions used throughout the package:

* the unit tangent ``t`` follows the positive (counterclockwise) orientation;
* the outward normal is ``n = (t2, -t1)``;
* the signed curvature satisfies ``dn/ds = kappa * t`` and ``dt/ds = -kappa * n``,
  which makes ``kappa = +1/R`` on a counterclockwise circle of radius ``R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

DOMAIN_KINDS = ("circle", "square", "pacman", "custom")

# Relative tolerance used for closure and tangent-continuity checks.
_GEOM_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    """Straight segment from ``a`` to ``b`` with parameter ``tau`` in [0, 1]."""

    a: tuple[float, float]
    b: tuple[float, float]

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def point(self, tau):
        tau = np.asarray(tau, dtype=float)[..., None]
        a, b = np.array(self.a), np.array(self.b)
        return a + (b - a) * tau

    def d1(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.broadcast_to(np.subtract(self.b, self.a), tau.shape + (2,)).copy()

    def d2(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.zeros(tau.shape + (2,))

    def diff(self, tau_mid, dtau):
        """``point(tau_mid + dtau/2) - point(tau_mid - dtau/2)`` without cancellation."""
        dtau = np.asarray(dtau, dtype=float)[..., None]
        return np.subtract(self.b, self.a) * dtau


@dataclass(frozen=True)
class CircularArc:
    """Arc ``c + r (cos theta, sin theta)`` with theta running from ``theta0`` to ``theta1``.

    Angles are in radians.  ``theta1 > theta0`` traverses the arc
    counterclockwise, ``theta1 < theta0`` clockwise.
    """

    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.theta1 - self.theta0)

    def _theta(self, tau):
        return self.theta0 + (self.theta1 - self.theta0) * np.asarray(tau, dtype=float)

    def point(self, tau):
        th = self._theta(tau)
        return np.stack(
            [self.center[0] + self.radius * np.cos(th), self.center[1] + self.radius * np.sin(th)],
            axis=-1,
        )

    def d1(self, tau):
        th = self._theta(tau)
        w = self.radius * (self.theta1 - self.theta0)
        return np.stack([-w * np.sin(th), w * np.cos(th)], axis=-1)

    def d2(self, tau):
        th = self._theta(tau)
        w = self.radius * (self.theta1 - self.theta0) ** 2
        return np.stack([-w * np.cos(th), -w * np.sin(th)], axis=-1)

    def diff(self, tau_mid, dtau):
        """``point(tau_mid + dtau/2) - point(tau_mid - dtau/2)`` without cancellation."""
        th = self._theta(tau_mid)
        half = 0.5 * (self.theta1 - self.theta0) * np.asarray(dtau, dtype=float)
        chord = 2.0 * self.radius * np.sin(half)
        return np.stack([-chord * np.sin(th), chord * np.cos(th)], axis=-1)


Arc = Segment | CircularArc


@dataclass(frozen=True)
class DomainSpec:
    """Description of a domain.

    ``kind`` is one of ``circle``, ``square``, ``pacman`` or ``custom``.  The
    built-in kinds are scaled by ``scale``; a custom domain is given by its
    list of ``arcs`` in absolute coordinates together with optional corner
    flags, where ``corner_flags[i]`` describes the junction at the start of
    ``arcs[i]`` (``True`` corner, ``False`` smooth, ``None`` detect).
    """

    kind: str
    scale: float = 0.1
    arcs: tuple[Arc, ...] = ()
    corner_flags: tuple[bool | None, ...] = ()

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {DOMAIN_KINDS}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"domain scale must be positive, got {self.scale}")
        if self.kind == "custom":
            if len(self.arcs) == 0:
                raise ValueError("custom domain needs at least one arc")
            if self.corner_flags and len(self.corner_flags) != len(self.arcs):
                raise ValueError("corner_flags must have one entry per arc")


@dataclass(frozen=True)
class Frame:
    """Local frame at boundary points (arrays broadcast over the sample shape)."""

    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray


@dataclass(frozen=True)
class Node:
    position: tuple[float, float]
    is_corner: bool
    sigma: float


@dataclass(frozen=True, eq=False)
class Element:
    """Sub-arc ``arc(tau0 + (tau1 - tau0) t)``, ``t`` in [0, 1]."""

    index: int
    arc: Arc
    tau0: float
    tau1: float
    start: int
    end: int
    piece: int

    @property
    def h(self) -> float:
        return self.arc.length * abs(self.tau1 - self.tau0)

    def _tau(self, t):
        return self.tau0 + (self.tau1 - self.tau0) * np.asarray(t, dtype=float)

    def point(self, t):
        return self.arc.point(self._tau(t))

    def d1(self, t):
        return self.arc.d1(self._tau(t)) * (self.tau1 - self.tau0)

    def d2(self, t):
        return self.arc.d2(self._tau(t)) * (self.tau1 - self.tau0) ** 2

    def speed(self, t):
        return np.linalg.norm(self.d1(t), axis=-1)

    def offset(self, s, t):
        """``point(s) - point(t)`` computed along the arc (accurate for close parameters)."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return self.arc.diff(self._tau(0.5 * (s + t)), (self.tau1 - self.tau0) * (s - t))


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    elements: tuple[Element, ...]
    nodes: tuple[Node, ...]
    level: int = 0
    pieces: tuple[Arc, ...] = field(default=(), repr=False)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def corners(self) -> tuple[int, ...]:
        return tuple(i for i, nd in enumerate(self.nodes) if nd.is_corner)

    @property
    def h_max(self) -> float:
        return max(e.h for e in self.elements)

    @property
    def node_positions(self) -> np.ndarray:
        return np.array([nd.position for nd in self.nodes])

    def element_after(self, node: int) -> Element:
        """Element starting at ``node``."""
        return self.elements[self._after[node]]

    def element_before(self, node: int) -> Element:
        """Element ending at ``node``."""
        return self.elements[self._before[node]]

    def __post_init__(self):
        after = {e.start: e.index for e in self.elements}
        before = {e.end: e.index for e in self.elements}
        object.__setattr__(self, "_after", after)
        object.__setattr__(self, "_before", before)


def chord(e: Element, s, f: Element, t) -> np.ndarray:
    """``e.point(s) - f.point(t)``, free of cancellation when the elements touch."""
    if e.index == f.index:
        return e.offset(s, t)
    for a, na in ((0.0, e.start), (1.0, e.end)):
        for b, nb in ((0.0, f.start), (1.0, f.end)):
            if na == nb:
                return e.offset(s, a) - f.offset(t, b)
    return e.point(s) - f.point(t)


def frame_at(element: Element, t) -> Frame:
    """Point, unit tangent, outward normal and signed curvature at parameter ``t``."""
    d1 = element.d1(t)
    d2 = element.d2(t)
    speed = np.linalg.norm(d1, axis=-1)
    if np.any(speed <= 0):
        raise ValueError("vanishing parametrization speed")
    tan = d1 / speed[..., None]
    nrm = np.stack([tan[..., 1], -tan[..., 0]], axis=-1)
    kappa = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed**3
    return Frame(point=element.point(t), tangent=tan, normal=nrm, curvature=kappa)


def _unit_tangent(arc: Arc, tau: float) -> np.ndarray:
    d = arc.d1(tau)
    return d / np.linalg.norm(d)


def _turning_angle(t_before: np.ndarray, t_after: np.ndarray) -> float:
    cross = t_before[0] * t_after[1] - t_before[1] * t_after[0]
    dot = float(np.dot(t_before, t_after))
    return math.atan2(cross, dot)


def sigma(mesh: BoundaryMesh, node: int) -> float:
    """Interior angle at ``node`` divided by ``2 pi`` (1/2 at smooth nodes)."""
    return mesh.nodes[node].sigma


def _node_sigma(t_before: np.ndarray, t_after: np.ndarray) -> float:
    return (math.pi - _turning_angle(t_before, t_after)) / (2 * math.pi)


def _builtin_arcs(spec: DomainSpec) -> tuple[list[Arc], list[int]]:
    """Arcs and the number of initial elements per arc."""
    s = spec.scale
    if spec.kind == "circle":
        return [CircularArc((0.0, 0.0), s, 0.0, 2 * math.pi)], [4]
    if spec.kind == "square":
        c = [(-s, -s), (s, -s), (s, s), (-s, s)]
        return [Segment(c[i], c[(i + 1) % 4]) for i in range(4)], [1, 1, 1, 1]
    if spec.kind == "pacman":
        a = 7 * math.pi / 8
        p1 = (s * math.cos(a), s * math.sin(a))
        p2 = (s * math.cos(a), -s * math.sin(a))
        arcs = [
            CircularArc((0.0, 0.0), s, 0.0, a),
            Segment(p1, (0.0, 0.0)),
            Segment((0.0, 0.0), p2),
            CircularArc((0.0, 0.0), s, 2 * math.pi - a, 2 * math.pi),
        ]
        return arcs, [1, 1, 1, 1]
    return list(spec.arcs), [1] * len(spec.arcs)


def _check_closed_ccw(arcs: Sequence[Arc]) -> None:
    size = max(max(abs(v) for v in np.ravel(a.point(np.array([0.0, 1.0])))) for a in arcs)
    size = max(size, max(a.length for a in arcs))
    for i, arc in enumerate(arcs):
        if arc.length <= 0:
            raise ValueError(f"arc {i} has zero length")
        end = arc.point(1.0)
        nxt = arcs[(i + 1) % len(arcs)].point(0.0)
        if np.linalg.norm(end - nxt) > _GEOM_TOL * size:
            raise ValueError(f"arc {i} does not end where arc {(i + 1) % len(arcs)} starts")
    # Shoelace area on a sampled polygon; positive for counterclockwise curves.
    tau = np.linspace(0.0, 1.0, 65)[:-1]
    pts = np.concatenate([a.point(tau) for a in arcs])
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area <= 0:
        raise ValueError("boundary must be positively (counterclockwise) oriented")


def build_initial_mesh(spec: DomainSpec) -> BoundaryMesh:
    """Initial mesh: four elements for the built-in domains, one per arc for custom ones."""
    arcs, counts = _builtin_arcs(spec)
    _check_closed_ccw(arcs)
    flags = list(spec.corner_flags) if spec.kind == "custom" and spec.corner_flags else [None] * len(arcs)

    elements: list[Element] = []
    nodes: list[Node] = []
    for ip, (arc, count) in enumerate(zip(arcs, counts)):
        t_before = _unit_tangent(arcs[ip - 1], 1.0)
        t_after = _unit_tangent(arc, 0.0)
        turn = _turning_angle(t_before, t_after)
        smooth = abs(turn) <= _GEOM_TOL
        flag = flags[ip]
        if flag is False and not smooth:
            raise ValueError(f"junction at start of arc {ip} is flagged smooth but the tangent jumps")
        is_corner = (not smooth) if flag is None else bool(flag)
        if abs(abs(turn) - math.pi) <= _GEOM_TOL:
            raise ValueError(f"cusp at start of arc {ip}")
        for k in range(count):
            pos = arc.point(k / count)
            if k == 0:
                sig = _node_sigma(t_before, t_after) if is_corner else 0.5
                nodes.append(Node((float(pos[0]), float(pos[1])), is_corner, sig))
            else:
                nodes.append(Node((float(pos[0]), float(pos[1])), False, 0.5))
            elements.append(Element(len(elements), arc, k / count, (k + 1) / count, len(nodes) - 1, -1, ip))
    n = len(elements)
    if n < 2:
        raise ValueError("a closed boundary needs at least two elements")
    elements = [replace(e, end=(e.start + 1) % n) for e in elements]
    return BoundaryMesh(tuple(elements), tuple(nodes), 0, tuple(arcs))


def refine_uniform(mesh: BoundaryMesh) -> BoundaryMesh:
    """Bisect every element at its parameter (= arc-length) midpoint."""
    elements: list[Element] = []
    nodes: list[Node] = []
    for e in mesh.elements:
        mid = 0.5 * (e.tau0 + e.tau1)
        pos = e.arc.point(mid)
        nodes.append(mesh.nodes[e.start])
        nodes.append(Node((float(pos[0]), float(pos[1])), False, 0.5))
        i0 = len(nodes) - 2
        elements.append(Element(len(elements), e.arc, e.tau0, mid, i0, i0 + 1, e.piece))
        elements.append(Element(len(elements), e.arc, mid, e.tau1, i0 + 1, -1, e.piece))
    n = len(elements)
    elements = [replace(e, end=(e.start + 1) % n) if e.end == -1 else e for e in elements]
    return BoundaryMesh(tuple(elements), tuple(nodes), mesh.level + 1, mesh.pieces)


def build_mesh(spec: DomainSpec, level: int) -> BoundaryMesh:
    """Initial mesh refined ``level`` times."""
    mesh = build_initial_mesh(spec)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def perimeter(mesh: BoundaryMesh) -> float:
    return float(sum(e.h for e in mesh.elements))


def inside(mesh: BoundaryMesh, points, samples_per_element: int = 32) -> np.ndarray:
    """Point-in-polygon test against a fine polygonal approximation of the boundary."""
    t = np.linspace(0.0, 1.0, samples_per_element + 1)[:-1]
    poly = np.concatenate([e.point(t) for e in mesh.elements])
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return np.count_nonzero(crosses & (x < xint), axis=1) % 2 == 1


def parse_domain(text: str) -> DomainSpec:
    """Parse the plain-text custom domain format.

    One arc per line, listed in counterclockwise order::

        # comments and blank lines are ignored
        line x0 y0 x1 y1 [corner|smooth]
        arc  cx cy r theta0 theta1 [corner|smooth]

    Angles are in degrees; ``theta1 < theta0`` runs clockwise.  The optional
    last token describes the junction at the start of the arc; without it the
    junction type is detected from the tangents.
    """
    arcs: list[Arc] = []
    flags: list[bool | None] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        flag: bool | None = None
        if tok[-1] in ("corner", "smooth"):
            flag = tok[-1] == "corner"
            tok = tok[:-1]
        try:
            vals = [float(v) for v in tok[1:]]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad number ({exc})") from None
        if tok[0] == "line" and len(vals) == 4:
            arcs.append(Segment((vals[0], vals[1]), (vals[2], vals[3])))
        elif tok[0] == "arc" and len(vals) == 5:
            if vals[2] <= 0:
                raise ValueError(f"line {lineno}: radius must be positive")
            arcs.append(CircularArc((vals[0], vals[1]), vals[2], math.radians(vals[3]), math.radians(vals[4])))
        else:
            raise ValueError(f"line {lineno}: expected 'line x0 y0 x1 y1' or 'arc cx cy r theta0 theta1'")
        flags.append(flag)
    if not arcs:
        raise ValueError("domain description contains no arcs")
    return DomainSpec("custom", arcs=tuple(arcs), corner_flags=tuple(flags))


def load_domain(path: str | Path) -> DomainSpec:
    return parse_domain(Path(path).read_text())
