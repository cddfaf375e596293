"""Piecewise-analytic planar curves in 3-space.

Every component lies in a vertical plane spanned by a horizontal unit
vector ``e1`` and the z-axis.  Pieces are described in the plane's local
coordinates ``(a, b)``; ``b`` is height, so the z-component of a unit
tangent is its second local coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import clasp_core as cc

EZ = np.array([0.0, 0.0, 1.0])
JUNCTION_TOL = 1e-9
DEFAULT_H = 0.01
MAX_TURN = 0.05


def _n_steps(length, h, turn=0.0):
    return max(1, int(math.ceil(length / h - 1e-9)), int(math.ceil(turn / MAX_TURN - 1e-9)))


# ---------------------------------------------------------------------------
# pieces


@dataclass(frozen=True)
class Segment:
    start: tuple
    end: tuple

    kind = "segment"

    def __post_init__(self):
        if self.length() <= 0:
            raise ValueError("segment must have positive length")

    def length(self) -> float:
        return float(np.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1]))

    def direction(self):
        d = np.subtract(self.end, self.start)
        return d / np.linalg.norm(d)

    @property
    def start_tangent(self):
        return self.direction()

    @property
    def end_tangent(self):
        return self.direction()

    def grid_key(self):
        return None

    def sample_local(self, h, grids):
        n = _n_steps(self.length(), h)
        f = np.linspace(0.0, 1.0, n + 1)
        p0, p1 = np.asarray(self.start, float), np.asarray(self.end, float)
        pts = p0[None, :] + f[:, None] * (p1 - p0)[None, :]
        pts[-1] = p1
        tan = np.repeat(self.direction()[None, :], n + 1, axis=0)
        return pts, tan, np.zeros(n + 1), f * self.length()

    def reflected(self):
        return Segment((-self.start[0], self.start[1]), (-self.end[0], self.end[1]))

    def reversed_(self):
        return Segment(self.end, self.start)


@dataclass(frozen=True)
class CircularArc:
    """Arc ``center + radius (cos phi, sin phi)`` traversed from phi0 to phi1."""

    center: tuple
    radius: float
    phi0: float
    phi1: float

    kind = "circular"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.phi0 == self.phi1:
            raise ValueError("arc must have positive angle")

    def _pt(self, phi):
        return np.array([self.center[0] + self.radius * math.cos(phi), self.center[1] + self.radius * math.sin(phi)])

    def _tan(self, phi):
        sgn = 1.0 if self.phi1 > self.phi0 else -1.0
        return sgn * np.array([-math.sin(phi), math.cos(phi)])

    @property
    def start(self):
        return self._pt(self.phi0)

    @property
    def end(self):
        return self._pt(self.phi1)

    @property
    def start_tangent(self):
        return self._tan(self.phi0)

    @property
    def end_tangent(self):
        return self._tan(self.phi1)

    def length(self):
        return self.radius * abs(self.phi1 - self.phi0)

    def grid_key(self):
        lo, hi = sorted((self.phi0, self.phi1))
        return ("circ", round(self.center[0], 9), round(self.center[1], 9), round(lo, 9), round(hi, 9))

    def grid_demand(self):
        return self.radius

    def sample_local(self, h, grids):
        r_max = grids.get(self.grid_key(), self.radius) if grids else self.radius
        turn = abs(self.phi1 - self.phi0)
        n = _n_steps(r_max * turn, h, turn)
        # the same lattice for both traversal directions keeps parallel arcs paired
        lo, hi = sorted((self.phi0, self.phi1))
        phi = np.linspace(lo, hi, n + 1)
        if self.phi1 < self.phi0:
            phi = phi[::-1]
        pts = np.stack([self.center[0] + self.radius * np.cos(phi), self.center[1] + self.radius * np.sin(phi)], axis=1)
        sgn = 1.0 if self.phi1 > self.phi0 else -1.0
        tan = sgn * np.stack([-np.sin(phi), np.cos(phi)], axis=1)
        return pts, tan, np.full(n + 1, 1.0 / self.radius), self.radius * np.abs(phi - self.phi0)

    def reflected(self):
        return CircularArc((-self.center[0], self.center[1]), self.radius, math.pi - self.phi0, math.pi - self.phi1)

    def reversed_(self):
        return CircularArc(self.center, self.radius, self.phi1, self.phi0)


@dataclass(frozen=True)
class ClaspArc:
    """Side ``side`` of the clasp ``(tau_1, tau_2)`` between tangent values u_start, u_end.

    The point at tangent value u is ``tip + (sx x(u), sz z(u))`` pushed by
    ``offset`` along the convex-side normal.  ``sz = -1`` opens downward.
    """

    tau_1: float
    tau_2: float
    side: int
    u_start: float
    u_end: float
    tip: tuple
    sx: int = 1
    sz: int = 1
    offset: float = 0.0

    kind = "clasp"

    def __post_init__(self):
        p = self.params
        cc._check_range([self.u_start, self.u_end], self.side, p)
        if self.u_start == self.u_end:
            raise ValueError("clasp arc must have a nonempty u-range")
        if self.sx not in (1, -1) or self.sz not in (1, -1):
            raise ValueError("sx and sz must be +1 or -1")

    @property
    def params(self):
        return cc.ClaspParams(self.tau_1, self.tau_2)

    @property
    def direction(self):
        return 1.0 if self.u_end > self.u_start else -1.0

    def _local(self, u, x, z):
        c = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
        a = self.tip[0] + self.sx * x + self.offset * self.sx * u
        b = self.tip[1] + self.sz * z - self.offset * self.sz * c
        ta = self.direction * self.sx * c
        tb = self.direction * self.sz * u
        return np.stack([a, b], axis=-1), np.stack([ta, tb], axis=-1)

    def _at(self, u):
        p = self.params
        x = cc.clasp_x(u, self.side, p)
        z = cc.clasp_z(0.0, u, self.side, p, tol=1e-13)
        pt, tan = self._local(np.float64(u), np.float64(x), np.float64(z))
        return pt, tan

    @property
    def start(self):
        return self._at(self.u_start)[0]

    @property
    def end(self):
        return self._at(self.u_end)[0]

    @property
    def start_tangent(self):
        return self._at(self.u_start)[1]

    @property
    def end_tangent(self):
        return self._at(self.u_end)[1]

    def length(self):
        p = self.params
        s = cc.clasp_arclength(self.u_start, self.u_end, self.side, p, tol=1e-12)
        return s + self.offset * abs(math.asin(min(self.u_end, 1.0)) - math.asin(min(self.u_start, 1.0)))

    def grid_key(self):
        return ("clasp", float(self.tau_1), float(self.tau_2))

    def grid_demand(self):
        return (self.offset, 0.0) if self.side == 1 else (0.0, self.offset)

    def sample_local(self, h, grids):
        reach = grids.get(self.grid_key(), (0.0, 0.0)) if grids else self.grid_demand()
        tab = cc.clasp_table(float(self.tau_1), float(self.tau_2), float(h), float(reach[0]), float(reach[1]))
        i = self.side
        u_all, x_all, z_all, s_all, rho_all = tab.u[i], tab.x[i], tab.z[i], tab.s[i], tab.rho[i]
        lo, hi = sorted((self.u_start, self.u_end))
        sel = (u_all >= lo - 1e-14) & (u_all <= hi + 1e-14)
        u, x, z, s, rho = u_all[sel], x_all[sel], z_all[sel], s_all[sel], rho_all[sel]
        order = np.argsort(u)
        u, x, z, s, rho = u[order], x[order], z[order], s[order], rho[order]
        p = self.params
        # range ends off the shared grid get their own nodes
        for val in (lo, hi):
            if not np.any(np.abs(u - val) < 1e-14):
                j = np.searchsorted(u, val)
                u = np.insert(u, j, val)
                x = np.insert(x, j, cc.clasp_x(val, i, p))
                z = np.insert(z, j, cc.clasp_z(0.0, val, i, p, tol=1e-13))
                s = np.insert(s, j, cc.clasp_arclength(0.0, val, i, p, tol=1e-13))
                rho = np.insert(rho, j, cc.clasp_dxdu(val, i, p))
        if self.direction < 0:
            u, x, z, s, rho = u[::-1], x[::-1], z[::-1], s[::-1], rho[::-1]
        pts, tan = self._local(u, x, z)
        r = rho + self.offset
        kappa = np.where(r > 1.0 / cc.CURVATURE_SENTINEL, 1.0 / np.maximum(r, 1e-300), cc.CURVATURE_SENTINEL)
        theta = np.arcsin(np.minimum(u, 1.0))
        sloc = np.abs(s - s[0]) + self.offset * np.abs(theta - theta[0])
        return pts, tan, kappa, sloc

    def reflected(self):
        return ClaspArc(self.tau_1, self.tau_2, self.side, self.u_start, self.u_end,
                        (-self.tip[0], self.tip[1]), -self.sx, self.sz, self.offset)

    def reversed_(self):
        return ClaspArc(self.tau_1, self.tau_2, self.side, self.u_end, self.u_start,
                        self.tip, self.sx, self.sz, self.offset)


Piece = Segment | CircularArc | ClaspArc


# ---------------------------------------------------------------------------
# components and links


@dataclass(frozen=True)
class EndPlane:
    """Affine plane through ``point`` with unit ``normal`` constraining an endpoint."""

    point: np.ndarray
    normal: np.ndarray


@dataclass
class PlanarComponent:
    origin: np.ndarray
    e1: np.ndarray
    pieces: list
    weight: float = 1.0
    closed: bool = False
    endpoint_planes: tuple | None = None
    name: str = ""

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.e1 = np.asarray(self.e1, dtype=float)
        if abs(np.linalg.norm(self.e1) - 1) > 1e-12 or abs(self.e1[2]) > 1e-12:
            raise ValueError("e1 must be a horizontal unit vector")

    def to3d(self, ab):
        ab = np.asarray(ab, dtype=float)
        return self.origin + ab[..., :1] * self.e1 + ab[..., 1:2] * EZ

    def vec3d(self, ab):
        ab = np.asarray(ab, dtype=float)
        return ab[..., :1] * self.e1 + ab[..., 1:2] * EZ

    def junction_errors(self):
        """Position and tangent mismatch at every junction (C0, C1)."""
        pairs = list(zip(self.pieces[:-1], self.pieces[1:]))
        if self.closed:
            pairs.append((self.pieces[-1], self.pieces[0]))
        out = []
        for a, b in pairs:
            out.append((float(np.linalg.norm(np.subtract(a.end, b.start))),
                        float(np.linalg.norm(np.subtract(a.end_tangent, b.start_tangent)))))
        return out

    def check_junctions(self, tol=JUNCTION_TOL):
        for k, (d0, d1) in enumerate(self.junction_errors()):
            if d0 > tol or d1 > tol:
                raise ValueError(f"{self.name}: junction {k} not C1 (dp={d0:.2e}, dt={d1:.2e})")

    def length(self) -> float:
        return float(sum(p.length() for p in self.pieces))


@dataclass(frozen=True)
class HalfSpace:
    """Obstacle complement: admissible region ``normal . p + offset >= 0``."""

    normal: np.ndarray
    offset: float

    def __call__(self, p):
        return np.asarray(p) @ np.asarray(self.normal) + self.offset


@dataclass(frozen=True)
class Symmetry:
    """Isometry ``p -> matrix @ p + shift`` mapping component c onto ``perm[c]``."""

    name: str
    matrix: np.ndarray
    shift: np.ndarray
    perm: tuple

    @classmethod
    def plane(cls, name, normal, point, perm):
        n = np.asarray(normal, float)
        n = n / np.linalg.norm(n)
        m = np.eye(3) - 2 * np.outer(n, n)
        return cls(name, m, 2 * n * float(n @ np.asarray(point, float)), tuple(perm))


@dataclass
class Link:
    components: list
    obstacles: list = field(default_factory=list)
    label: dict = field(default_factory=dict)
    symmetries: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


@dataclass
class SampledCurve:
    points: np.ndarray
    tangents: np.ndarray
    u_values: np.ndarray
    arclengths: np.ndarray
    kappa: np.ndarray
    piece_ids: np.ndarray
    weight: float
    closed: bool
    curvature_force: np.ndarray
    endpoint_normals: tuple | None = None

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# sampling


def link_grids(link: Link) -> dict:
    grids: dict = {}
    for comp in link.components:
        for piece in comp.pieces:
            key = piece.grid_key()
            if key is None:
                continue
            d = piece.grid_demand()
            if key not in grids:
                grids[key] = d
            elif isinstance(d, tuple):
                grids[key] = tuple(max(a, b) for a, b in zip(grids[key], d))
            else:
                grids[key] = max(grids[key], d)
    return grids


def sample(c: PlanarComponent, h: float = DEFAULT_H, grids: dict | None = None) -> SampledCurve:
    """Sample a component with node spacing at most ``h``; junctions are always nodes."""
    if h <= 0:
        raise ValueError("h must be positive")
    pts, tans, kap, sl, pid = [], [], [], [], []
    s0 = 0.0
    for k, piece in enumerate(c.pieces):
        p, t, kappa, s = piece.sample_local(h, grids)
        total = float(s[-1])
        if k > 0:
            p, t, kappa, s = p[1:], t[1:], kappa[1:], s[1:]
        pts.append(p)
        tans.append(t)
        kap.append(kappa)
        sl.append(s0 + s)
        pid.append(np.full(len(p), k))
        s0 += total
    P = np.concatenate(pts)
    T = np.concatenate(tans)
    K = np.concatenate(kap)
    S = np.concatenate(sl)
    I = np.concatenate(pid)
    if c.closed:
        P, T, K, S, I = P[:-1], T[:-1], K[:-1], S[:-1], I[:-1]
    P3 = c.to3d(P)
    T3 = c.vec3d(T)
    T3 /= np.linalg.norm(T3, axis=1)[:, None]
    force = curvature_force_measure_points(P3, c.weight, c.closed)
    normals = None
    if not c.closed and c.endpoint_planes is not None:
        normals = tuple(np.asarray(pl.normal, float) for pl in c.endpoint_planes)
    return SampledCurve(P3, T3, T3[:, 2].copy(), S, K, I, c.weight, c.closed, force, normals)


def sample_link(link: Link, h: float = DEFAULT_H) -> list:
    grids = link_grids(link)
    return [sample(c, h, grids) for c in link.components]


def chord_tangents(points, closed):
    nxt = np.roll(points, -1, axis=0) if closed else points[1:]
    d = nxt - (points if closed else points[:-1])
    return d / np.linalg.norm(d, axis=1)[:, None]


def curvature_force_measure_points(points, w, closed):
    T = chord_tangents(points, closed)
    if closed:
        return w * (T - np.roll(T, 1, axis=0))
    F = np.zeros_like(points)
    F[1:-1] = T[1:] - T[:-1]
    F[0] = T[0]
    F[-1] = -T[-1]
    return w * F


def curvature_force_measure(s: SampledCurve, w: float | None = None) -> np.ndarray:
    """Per-node discrete curvature force ``w (T_next - T_prev)``.

    Open ends carry the tension term ``w T`` along the inward chord.  For
    any node field xi, ``-sum(xi . force)`` is the first variation of the
    weighted polyline length.
    """
    return curvature_force_measure_points(s.points, s.weight if w is None else w, s.closed)


def polyline_length(points, closed=False):
    d = np.diff(points, axis=0)
    total = float(np.linalg.norm(d, axis=1).sum())
    if closed:
        total += float(np.linalg.norm(points[0] - points[-1]))
    return total


def weighted_length(link: Link) -> float:
    """Sum of component weights times exact piece lengths."""
    return float(sum(c.weight * c.length() for c in link.components))


def check_symmetry(link: Link, sym: Symmetry, h: float = DEFAULT_H, samples=None) -> float:
    """Largest distance from an image node to the nearest node of its image component."""
    samples = samples if samples is not None else sample_link(link, h)
    worst = 0.0
    for c, s in enumerate(samples):
        img = s.points @ sym.matrix.T + sym.shift
        tree = cKDTree(samples[sym.perm[c]].points)
        d, _ = tree.query(img)
        worst = max(worst, float(d.max()))
    return worst


def obstacle_clearance(link: Link, samples) -> float:
    if not link.obstacles:
        return math.inf
    pts = np.concatenate([s.points for s in samples])
    return float(min(np.min(ob(pts)) for ob in link.obstacles))


def self_intersections(s: SampledCurve, tol: float = 1e-9) -> int:
    """Number of places where non-adjacent nodes coincide.

    Coincident pairs whose indices run consecutively (a tangential touch
    sampled by several nodes) count once.
    """
    pairs = cKDTree(s.points).query_pairs(tol, output_type="ndarray")
    n = len(s.points)
    hits = []
    for i, j in sorted(map(tuple, np.sort(pairs, axis=1).tolist())):
        gap = j - i
        if s.closed:
            gap = min(gap, n - gap)
        if gap > 1:
            hits.append((i, j))
    clusters: list = []
    for i, j in hits:
        if clusters and any(abs(i - a) <= 2 and abs(j - b) <= 2 for a, b in clusters[-1]):
            clusters[-1].append((i, j))
        else:
            clusters.append([(i, j)])
    return len(clusters)


def symmetric_chain(half: Sequence, middle: Sequence = ()) -> list:
    """Full chain from the half on the +a side, listed from its outer end to the axis.

    The result runs from the reflected half's outer end, through the optional
    ``middle`` pieces, and back out along ``half``.
    """
    return [p.reflected() for p in half] + list(middle) + [p.reversed_() for p in reversed(half)]
