"""Builders for the critical clasp families.

Placement conventions: ``P1`` is the x1z-plane and ``P2`` the x2z-plane.
The component attached to the floor opens downward (a cap) and the one
attached to the ceiling opens upward (a cup).  Straight ends follow the
end tangents out to bounding planes perpendicular to them, placed ``run``
units beyond the farthest curved feature of the whole link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import clasp_core as cc
from .geometry import (
    CircularArc,
    ClaspArc,
    EndPlane,
    HalfSpace,
    Link,
    PlanarComponent,
    Segment,
    Symmetry,
    sample,
    symmetric_chain,
)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
DEFAULT_RUN = 2.0
FAMILIES = ("simple_clasp", "weighted_clasp", "parallel_clasp", "split_config", "chained_clasp", "granny")


class InvalidParameter(ValueError):
    pass


class InvalidSeparation(InvalidParameter):
    pass


@dataclass
class FamilySpec:
    """In-memory form of a configuration request."""

    family: str
    params: dict = field(default_factory=dict)
    h: float | None = None
    run: float = DEFAULT_RUN

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}; expected one of {FAMILIES}")


@dataclass
class _Draft:
    origin: np.ndarray
    e1: np.ndarray
    middle: list
    weight: float = 1.0
    closed: bool = False
    name: str = ""


def _cap(p, side, tip, sx, offset=0.0, outward=False):
    """Side arc opening downward, from junction to tip (or tip to junction)."""
    tau = p.tau(side)
    u0, u1 = (0.0, tau) if outward else (tau, 0.0)
    return ClaspArc(p.tau_1, p.tau_2, side, u0, u1, tip, sx, -1, offset)


def _cup(p, side, tip, sx, offset=0.0, outward=False):
    tau = p.tau(side)
    u0, u1 = (0.0, tau) if outward else (tau, 0.0)
    return ClaspArc(p.tau_1, p.tau_2, side, u0, u1, tip, sx, 1, offset)


def _finish(drafts, run, label, symmetries=(), metadata=None) -> Link:
    """Attach straight ends and bounding planes, then validate joins."""
    # farthest curved extent along each end direction, over the whole link
    cloud = []
    for d in drafts:
        tmp = PlanarComponent(d.origin, d.e1, d.middle, d.weight, d.closed, None, d.name)
        cloud.append(sample(tmp, 0.05).points)
    cloud = np.concatenate(cloud)

    comps, obstacles = [], []
    levels: dict = {}
    for d in drafts:
        tmp = PlanarComponent(d.origin, d.e1, d.middle, d.weight, d.closed, None, d.name)
        if d.closed:
            tmp.check_junctions()
            comps.append(tmp)
            continue
        ends = []
        for which in ("start", "end"):
            piece = d.middle[0] if which == "start" else d.middle[-1]
            j2 = np.asarray(piece.start if which == "start" else piece.end, float)
            t2 = np.asarray(piece.start_tangent if which == "start" else piece.end_tangent, float)
            out2 = -t2 if which == "start" else t2
            o3 = tmp.vec3d(out2)
            o3 /= np.linalg.norm(o3)
            key = tuple(np.round(o3, 9))
            if key not in levels:
                levels[key] = (o3, float(np.max(cloud @ o3)) + run)
            # the group's first direction is the shared plane normal
            n3, level = levels[key]
            j3 = tmp.to3d(j2)
            length = (level - float(j3 @ n3)) / float(o3 @ n3)
            e2 = j2 + length * out2
            ends.append((which, j2, e2, n3, j3 + length * o3))
        (_, js, es, ns, ps), (_, je, ee, ne, pe) = ends
        pieces = [Segment(tuple(es), tuple(js))] + list(d.middle) + [Segment(tuple(je), tuple(ee))]
        planes = (EndPlane(ps, ns), EndPlane(pe, ne))
        comp = PlanarComponent(d.origin, d.e1, pieces, d.weight, False, planes, d.name)
        comp.check_junctions()
        comps.append(comp)
    for key in sorted(levels):
        n3, level = levels[key]
        obstacles.append(HalfSpace(-n3, level))
    return Link(comps, obstacles, dict(label), list(symmetries), dict(metadata or {}))


def _check_tau(tau, name="tau"):
    if not (0.0 < tau <= 1.0):
        raise InvalidParameter(f"{name} must lie in (0, 1], got {tau}")


def _mirrors(perm1=None, perm2=None, n=2):
    ident = tuple(range(n))
    return [
        Symmetry.plane("mirror_x1", E1, np.zeros(3), perm1 or ident),
        Symmetry.plane("mirror_x2", E2, np.zeros(3), perm2 or ident),
    ]


# ---------------------------------------------------------------------------
# two-component chains: weighted clasps and granny clasps


def _twin_chain(p: cc.ClaspParams, n: int, weights, run, label, extra_meta=None) -> Link:
    G = cc.tip_gap(p)
    tau = p.tau_1
    c = math.sqrt(max(1.0 - tau * tau, 0.0))
    a0 = math.atan2(c, tau)
    L = [j * G for j in range(2 * n + 2)]

    # floor component: cap at L1, then n lobes around the other component's crossings
    s = 1
    half = [_cap(p, 1, (0.0, L[1]), s)]
    for i in range(1, n + 1):
        half.append(_cup(p, 2, (0.0, L[2 * i - 1]), -s, outward=True))
        if c > 0:
            if s > 0:
                half.append(CircularArc((0.0, L[2 * i]), 1.0, math.pi + a0, math.pi - a0))
            else:
                half.append(CircularArc((0.0, L[2 * i]), 1.0, -a0, a0))
        half.append(_cap(p, 1, (0.0, L[2 * i + 1]), -s))
        s = -s
    beta = _Draft(np.zeros(3), E1, symmetric_chain(half), weights[0], name="beta")

    s = 1
    half = [_cup(p, 2, (0.0, L[2 * n]), s)]
    for i in range(1, n + 1):
        half.append(_cap(p, 1, (0.0, L[2 * n - 2 * i + 2]), -s, outward=True))
        if c > 0:
            if s > 0:
                half.append(CircularArc((0.0, L[2 * n - 2 * i + 1]), 1.0, math.pi - a0, math.pi + a0))
            else:
                half.append(CircularArc((0.0, L[2 * n - 2 * i + 1]), 1.0, a0, -a0))
        half.append(_cup(p, 2, (0.0, L[2 * n - 2 * i]), -s))
        s = -s
    gamma = _Draft(np.zeros(3), E2, symmetric_chain(half), weights[1], name="gamma")

    syms = _mirrors()
    if p.tau_1 == p.tau_2:
        m = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
        syms.append(Symmetry("swap_top_bottom", m, np.array([0.0, 0.0, L[2 * n + 1]]), (1, 0)))
    meta = {
        "tips": [[0.0, 0.0, L[2 * n + 1]], [0.0, 0.0, 0.0]],
        "tip_gap": G,
        "self_intersections": [n, n],
        "non_embedded": [n >= 1, n >= 1],
    }
    meta.update(extra_meta or {})
    return _finish([beta, gamma], run, label, syms, meta)


def build_weighted_clasp(tau_1: float, tau_2: float, weights=None, run: float = DEFAULT_RUN) -> Link:
    """Two-component clasp C(tau_1, tau_2) with tensions 1/tau_i.

    ``weights`` overrides the balanced tensions (used for negative controls).
    """
    _check_tau(tau_1, "tau_1")
    _check_tau(tau_2, "tau_2")
    p = cc.ClaspParams(tau_1, tau_2)
    w = tuple(weights) if weights is not None else (p.w_1, p.w_2)
    label = {"family": "weighted_clasp", "tau_1": tau_1, "tau_2": tau_2, "weights": list(w)}
    return _twin_chain(p, 0, w, run, label)


def build_simple_clasp(tau: float, run: float = DEFAULT_RUN) -> Link:
    """Unweighted tau-clasp; same curves as C(tau, tau)."""
    _check_tau(tau)
    p = cc.ClaspParams(tau, tau)
    return _twin_chain(p, 0, (1.0, 1.0), run, {"family": "simple_clasp", "tau": tau})


def build_granny(n: int, tau: float = 1.0, run: float = DEFAULT_RUN) -> Link:
    """Granny clasp G_n(tau): 2n+1 clasp arcs per half, n self-intersections per component."""
    if int(n) != n or n < 0:
        raise InvalidParameter("n must be a nonnegative integer")
    _check_tau(tau)
    p = cc.ClaspParams(tau, tau)
    return _twin_chain(p, int(n), (1.0, 1.0), run, {"family": "granny", "n": int(n), "tau": tau})


# ---------------------------------------------------------------------------
# clasps with parallels


def parallel_force_identity(k: int, l: int, tau: float) -> tuple[float, float]:
    """Downward force of the circular pieces on the topmost crossing, and 2k."""
    n = k + l
    return 2 * k * (1 - tau / l) + 2 * n * (tau / l - tau / n), 2.0 * k


def build_parallel_clasp(k: int, l: int, m: int, tau: float, run: float = DEFAULT_RUN) -> Link:
    """C_{k,l}^m(tau): k nested closed loops, l nested floor arcs, m nested ceiling arcs."""
    for name, v, lo in (("k", k, 0), ("l", l, 1), ("m", m, 1)):
        if int(v) != v or v < lo:
            raise InvalidParameter(f"{name} must be an integer >= {lo}")
    k, l, m = int(k), int(l), int(m)
    n = k + l
    if not (0.0 < tau <= min(l, m, n)):
        raise InvalidParameter(f"tau must lie in (0, min(l, m, n)] = (0, {min(l, m, n)}]")
    p = cc.ClaspParams(tau / n, tau / m)
    G = cc.tip_gap(p)
    t1 = p.tau_1
    phi_n = math.acos(t1)  # angle of the clasp junction on circles about the top crossing
    phi_l = math.acos(min(tau / l, 1.0))
    drop = float(m - 1)
    drafts = []

    for j in range(k):
        r = 1.0 + j
        right = [_cap(p, 1, (0.0, G), 1, j, outward=True)]
        if phi_l < phi_n:
            right.append(CircularArc((0.0, 0.0), r, phi_n, phi_l))
        if phi_l > 0:
            right.append(CircularArc((0.0, 0.0), r, phi_l, 0.0))
        if drop > 0:
            right.append(Segment((r, 0.0), (r, -drop)))
        right.append(CircularArc((0.0, -drop), r, 0.0, -math.pi / 2))
        loop = right + [q.reflected().reversed_() for q in reversed(right)]
        drafts.append(_Draft(np.zeros(3), E1, loop, 1.0, True, f"alpha{j}"))

    for j in range(k, n):
        r = 1.0 + j
        half = []
        if phi_l < phi_n:
            half.append(CircularArc((0.0, 0.0), r, phi_l, phi_n))
        half.append(_cap(p, 1, (0.0, G), 1, j))
        drafts.append(_Draft(np.zeros(3), E1, symmetric_chain(half), 1.0, name=f"beta{j - k}"))

    for j in range(m):
        half = [_cup(p, 2, (0.0, 0.0), 1, j)]
        drafts.append(_Draft(np.zeros(3), E2, symmetric_chain(half), 1.0, name=f"gamma{j}"))

    label = {"family": "parallel_clasp", "k": k, "l": l, "m": m, "tau": tau}
    meta = {
        "clasp": [p.tau_1, p.tau_2],
        "crossings": [[0.0, 0.0, -float(i)] for i in range(m)],
        "peel_u": tau / l,
        "clasp_u": tau / n,
        "tips": [[0.0, 0.0, G], [0.0, 0.0, 0.0]],
    }
    return _finish(drafts, run, label, _mirrors(n=k + l + m), meta)


# ---------------------------------------------------------------------------
# split configurations


def build_split_config(m: int, tau: float = 1.0, run: float = DEFAULT_RUN) -> Link:
    """L^m(tau) for m in {1, 2}: parallel-plane copies with unit segments at split tips."""
    if m not in (1, 2):
        raise InvalidParameter("m must be 1 or 2")
    _check_tau(tau)
    label = {"family": "split_config", "m": m, "tau": tau}
    if m == 2:
        p = cc.ClaspParams(tau, tau)
        G = cc.tip_gap(p)
        bhalf = [_cap(p, 1, (0.5, G), 1)]
        ghalf = [_cup(p, 2, (0.5, 0.0), 1)]
        bseg = [Segment((-0.5, G), (0.5, G))]
        gseg = [Segment((-0.5, 0.0), (0.5, 0.0))]
        drafts = [
            _Draft(np.array([0.0, 0.5, 0.0]), E1, symmetric_chain(bhalf, bseg), 1.0, name="beta+"),
            _Draft(np.array([0.0, -0.5, 0.0]), E1, symmetric_chain(bhalf, bseg), 1.0, name="beta-"),
            _Draft(np.array([0.5, 0.0, 0.0]), E2, symmetric_chain(ghalf, gseg), 1.0, name="gamma+"),
            _Draft(np.array([-0.5, 0.0, 0.0]), E2, symmetric_chain(ghalf, gseg), 1.0, name="gamma-"),
        ]
        syms = _mirrors(perm1=(0, 1, 3, 2), perm2=(1, 0, 2, 3), n=4)
        meta = {"clasp": [tau, tau], "expected_cycle_length": 8, "split_segments": {"beta+": 1, "beta-": 1, "gamma+": 1, "gamma-": 1}}
    else:
        p = cc.ClaspParams(tau / 2, tau)
        G = cc.tip_gap(p)
        bhalf = [_cap(p, 1, (0.0, G), 1)]
        ghalf = [_cup(p, 2, (0.5, 0.0), 1)]
        gseg = [Segment((-0.5, 0.0), (0.5, 0.0))]
        drafts = [
            _Draft(np.array([0.0, 0.5, 0.0]), E1, symmetric_chain(bhalf), 1.0, name="beta+"),
            _Draft(np.array([0.0, -0.5, 0.0]), E1, symmetric_chain(bhalf), 1.0, name="beta-"),
            _Draft(np.zeros(3), E2, symmetric_chain(ghalf, gseg), 1.0, name="gamma"),
        ]
        syms = _mirrors(perm1=(0, 1, 2), perm2=(1, 0, 2), n=3)
        meta = {"clasp": [tau / 2, tau], "expected_cycle_length": 6, "split_segments": {"gamma": 1}}
    return _finish(drafts, run, label, syms, meta)


# ---------------------------------------------------------------------------
# chained clasps


def build_chained_clasp(tau: float, d: float = 1.0, middles: int = 1, run: float = DEFAULT_RUN) -> Link:
    """Floor arc, ``middles`` closed loops, ceiling arc, joined end to end.

    ``d`` is the tip-to-tip distance of the end arcs across each middle loop.
    For tau < 1 it is forced to 1 and the tips carry an isolated strut.
    """
    _check_tau(tau)
    if int(middles) != middles or middles < 1:
        raise InvalidParameter("middles must be a positive integer")
    middles = int(middles)
    if tau < 1.0 and abs(d - 1.0) > 1e-12:
        raise InvalidSeparation("for tau < 1 the tips touch: d must equal 1")
    if d < 1.0:
        raise InvalidSeparation("tip separation d must be at least 1")
    p = cc.ClaspParams(tau, tau)
    G = cc.tip_gap(p)
    c = math.sqrt(max(1.0 - tau * tau, 0.0))
    a0 = math.atan2(c, tau)

    planes = [E1] + [E2 if i % 2 else E1 for i in range(1, middles + 1)]
    planes.append(E1 if middles % 2 else E2)
    drafts = [_Draft(np.zeros(3), planes[0], symmetric_chain([_cap(p, 1, (0.0, G), 1)]), 1.0, name="beta")]
    b = 0.0
    for i in range(1, middles + 1):
        right = [_cup(p, 2, (0.0, b), 1, outward=True)]
        if c > 0:
            right.append(CircularArc((0.0, b + G), 1.0, -a0, 0.0))
        right.append(Segment((1.0, b + G), (1.0, b + G + d)))
        if c > 0:
            right.append(CircularArc((0.0, b + G + d), 1.0, 0.0, a0))
        right.append(_cap(p, 1, (0.0, b + 2 * G + d), 1))
        loop = right + [q.reflected().reversed_() for q in reversed(right)]
        drafts.append(_Draft(np.zeros(3), planes[i], loop, 1.0, True, f"alpha{i}"))
        b += G + d
    drafts.append(_Draft(np.zeros(3), planes[-1], symmetric_chain([_cup(p, 2, (0.0, b), 1)]), 1.0, name="gamma"))

    ncomp = middles + 2
    zc = 0.5 * (G + b)
    perm = tuple(ncomp - 1 - i for i in range(ncomp))
    if middles % 2:
        swap = Symmetry.plane("reflect_horizontal", np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, zc]), perm)
    else:
        mat = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
        swap = Symmetry("swap_top_bottom", mat, np.array([0.0, 0.0, 2 * zc]), perm)
    # isolated struts join the upper tip of element i-1 to the lower tip of element i+1
    lower_tips = [G + (i - 1) * (G + d) for i in range(1, middles + 1)]
    label = {"family": "chained_clasp", "tau": tau, "d": d, "middles": middles}
    meta = {
        "clasp": [tau, tau],
        "tips": {"beta": [0.0, 0.0, G], "gamma": [0.0, 0.0, b]},
        "isolated_struts": [[[0.0, 0.0, z], [0.0, 0.0, z + d]] for z in lower_tips],
        "isolated_force": 2.0 - 2.0 * tau,
    }
    return _finish(drafts, run, label, _mirrors(n=ncomp) + [swap], meta)


# ---------------------------------------------------------------------------


def build(spec: FamilySpec) -> Link:
    q = dict(spec.params)
    run = spec.run
    f = spec.family
    try:
        if f == "simple_clasp":
            return build_simple_clasp(float(q["tau"]), run)
        if f == "weighted_clasp":
            return build_weighted_clasp(float(q["tau_1"]), float(q["tau_2"]), q.get("weights"), run)
        if f == "parallel_clasp":
            return build_parallel_clasp(q["k"], q["l"], q["m"], float(q["tau"]), run)
        if f == "split_config":
            return build_split_config(q["m"], float(q.get("tau", 1.0)), run)
        if f == "chained_clasp":
            return build_chained_clasp(float(q["tau"]), float(q.get("d", 1.0)), q.get("middles", 1), run)
        return build_granny(q["n"], float(q.get("tau", 1.0)), run)
    except KeyError as exc:
        raise InvalidParameter(f"{f}: missing parameter {exc.args[0]!r}") from None
