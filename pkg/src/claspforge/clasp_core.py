"""Closed-form clasp-arc mathematics.

Two planar curves lie in perpendicular vertical planes and stay at unit
distance.  Each is parametrized by ``u``, the z-component of its unit
tangent, and ``x`` is the horizontal distance of a point from the common
vertical axis.  Side ``i`` of a clasp with opening parameters
``(tau_1, tau_2)`` covers ``u_i in [0, tau_i]``; the two sides are paired
by the strut parameter ``t in [0, 1]`` with ``u_1 = tau_1 t`` and
``u_2 = tau_2 (1 - t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

# below this value of 1 - u^2 the height/length integrands are handled in theta = asin(u)
SINGULAR_BAND = 0.01
DEFAULT_QUAD_TOL = 1e-10
CURVATURE_SENTINEL = 1e12


class InconsistentInputs(ValueError):
    """Raised when a pair of strut parameters admits no real quadruple."""


class OutOfRange(ValueError):
    pass


class QuadratureFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ClaspParams:
    """Opening parameters and tension weights of a two-sided clasp."""

    tau_1: float
    tau_2: float
    w_1: float | None = None
    w_2: float | None = None

    def __post_init__(self):
        for tau in (self.tau_1, self.tau_2):
            if not (0.0 < tau <= 1.0):
                raise ValueError(f"opening parameter must lie in (0, 1], got {tau}")
        # balanced weights unless overridden
        if self.w_1 is None:
            object.__setattr__(self, "w_1", 1.0 / self.tau_1)
        if self.w_2 is None:
            object.__setattr__(self, "w_2", 1.0 / self.tau_2)
        if self.w_1 < 0 or self.w_2 < 0:
            raise ValueError("weights must be nonnegative")

    def tau(self, i: int) -> float:
        return self.tau_1 if i == 1 else self.tau_2

    def other_tau(self, i: int) -> float:
        return self.tau_2 if i == 1 else self.tau_1

    def weight(self, i: int) -> float:
        return self.w_1 if i == 1 else self.w_2

    @property
    def key(self) -> tuple[float, float]:
        return (float(self.tau_1), float(self.tau_2))


@dataclass(frozen=True)
class StrutQuadruple:
    x_1: float
    x_2: float
    u_1: float
    u_2: float


def _check_side(i: int) -> None:
    if i not in (1, 2):
        raise ValueError(f"side index must be 1 or 2, got {i}")


def _sqrt_nonneg(v, what):
    v = np.asarray(v, dtype=float)
    if np.any(v < -1e-14) or not np.all(np.isfinite(v)):
        raise InconsistentInputs(f"{what} would need the root of a negative number")
    return np.sqrt(np.clip(v, 0.0, None))


def transfer(*, x_1=None, x_2=None, u_1=None, u_2=None) -> StrutQuadruple:
    """Complete a unit-strut quadruple from any two of its four numbers.

    Works elementwise on arrays.  Nonnegative roots are taken throughout.
    """
    given = {k: v for k, v in (("x_1", x_1), ("x_2", x_2), ("u_1", u_1), ("u_2", u_2)) if v is not None}
    if len(given) != 2:
        raise ValueError("exactly two of x_1, x_2, u_1, u_2 must be given")
    for k, v in given.items():
        a = np.asarray(v, dtype=float)
        if np.any(a < 0) or np.any(a > 1):
            raise InconsistentInputs(f"{k} must lie in [0, 1]")

    with np.errstate(divide="ignore", invalid="ignore"):
        if u_1 is not None and u_2 is not None:
            a, b = np.asarray(u_1, float), np.asarray(u_2, float)
            den = 1.0 - a * a * b * b
            if np.any(den <= 0):
                raise InconsistentInputs("u_1 = u_2 = 1 does not determine x")
            x1 = _sqrt_nonneg(a * a * (1 - b * b) / den, "x_1")
            x2 = _sqrt_nonneg(b * b * (1 - a * a) / den, "x_2")
            u1, u2 = a, b
        elif x_1 is not None and x_2 is not None:
            a, b = np.asarray(x_1, float), np.asarray(x_2, float)
            d1, d2 = 1 - b * b, 1 - a * a
            if np.any(d1 <= 0) or np.any(d2 <= 0):
                raise InconsistentInputs("x_j = 1 leaves u_i undetermined")
            u1 = _sqrt_nonneg(a * a / d1, "u_1")
            u2 = _sqrt_nonneg(b * b / d2, "u_2")
            x1, x2 = a, b
        elif x_1 is not None and u_1 is not None:
            x1, u1, x2, u2 = _from_own(np.asarray(x_1, float), np.asarray(u_1, float))
        elif x_2 is not None and u_2 is not None:
            x2, u2, x1, u1 = _from_own(np.asarray(x_2, float), np.asarray(u_2, float))
        elif x_1 is not None and u_2 is not None:
            x1, u2, x2, u1 = _from_cross(np.asarray(x_1, float), np.asarray(u_2, float))
        else:
            x2, u1, x1, u2 = _from_cross(np.asarray(x_2, float), np.asarray(u_1, float))

    q = StrutQuadruple(*(_as_out(v) for v in (x1, x2, u1, u2)))
    for x, u in ((q.x_1, q.u_1), (q.x_2, q.u_2)):
        if np.any(np.asarray(u) > 1 + 1e-12) or np.any(np.asarray(x) > np.asarray(u) + 1e-12):
            raise InconsistentInputs("inputs violate 0 <= x_i <= u_i <= 1")
    return q


def _as_out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def _from_own(x, u):
    # x_j^2 = 1 - x_i^2/u_i^2, then u_j^2 = x_j^2 / (1 - x_i^2)
    if np.any((u == 0) & (x != 0)):
        raise InconsistentInputs("u_i = 0 with x_i != 0")
    if np.any(u == 0) or np.any(x >= 1):
        raise InconsistentInputs("u_i = 0 or x_i = 1 leaves the partner undetermined")
    xj = _sqrt_nonneg(1 - (x / u) ** 2, "x_j")
    uj = _sqrt_nonneg(xj * xj / (1 - x * x), "u_j")
    return x, u, xj, uj


def _from_cross(x_i, u_j):
    # x_j^2 = u_j^2 (1 - x_i^2), then u_i^2 = x_i^2 / (1 - x_j^2)
    x_j = _sqrt_nonneg(u_j * u_j * (1 - x_i * x_i), "x_j")
    d = 1 - x_j * x_j
    if np.any((d == 0) & (x_i != 0)) or np.any(d == 0):
        raise InconsistentInputs("division by zero")
    u_i = _sqrt_nonneg(x_i * x_i / d, "u_i")
    return x_i, u_j, x_j, u_i


def _check_range(u, i, p: ClaspParams, tol=1e-12):
    tau = p.tau(i)
    a = np.asarray(u, dtype=float)
    if np.any(a < -tol) or np.any(a > tau + tol):
        raise OutOfRange(f"u_{i} must lie in [0, {tau}] on the clasped range")
    return np.clip(a, 0.0, tau)


def balance_partner(u_1, p: ClaspParams):
    """Partner tangent ``u_2`` from the balance relation u_1/tau_1 + u_2/tau_2 = 1."""
    u = _check_range(u_1, 1, p)
    return _as_out(p.tau_2 * (1.0 - u / p.tau_1))


def partner_u(u, i: int, p: ClaspParams):
    """Tangent value on the other side that shares a strut with ``u`` on side ``i``."""
    _check_side(i)
    u = _check_range(u, i, p)
    return p.other_tau(i) * (1.0 - u / p.tau(i))


def _profile_terms(u, i, p):
    # g^2 = q = (1 - v^2) / (1 - u^2 v^2), v partner tangent; returns q and dq/du
    ti, tj = p.tau(i), p.other_tau(i)
    one_minus_v = (1.0 - tj) + tj * u / ti
    v = 1.0 - one_minus_v
    dv = -tj / ti
    a = one_minus_v * (1.0 + v)  # 1 - v^2 without cancellation near v = 1
    b = 1.0 - u * u * v * v
    q = a / b
    da = -2.0 * v * dv
    db = -(2.0 * u * v * v + 2.0 * u * u * v * dv)
    dq = (da * b - a * db) / (b * b)
    return q, dq


def clasp_x(u, i: int, p: ClaspParams):
    """Horizontal coordinate of side ``i`` at tangent value ``u``."""
    _check_side(i)
    u = _check_range(u, i, p)
    q, _ = _profile_terms(u, i, p)
    return _as_out(u * np.sqrt(np.clip(q, 0.0, None)))


def clasp_dxdu(u, i: int, p: ClaspParams):
    """Derivative dx/du of side ``i``; equals the radius of curvature."""
    _check_side(i)
    u = _check_range(u, i, p)
    q, dq = _profile_terms(u, i, p)
    g = np.sqrt(np.clip(q, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(g > 0, g + u * dq / (2.0 * np.where(g > 0, g, 1.0)), 0.0)
    return _as_out(out)


def clasp_curvature(u, i: int, p: ClaspParams):
    """Curvature du/dx of side ``i``; large sentinel where the radius vanishes."""
    rho = np.asarray(clasp_dxdu(u, i, p), dtype=float)
    with np.errstate(divide="ignore"):
        k = np.where(rho > 1.0 / CURVATURE_SENTINEL, 1.0 / np.maximum(rho, 1e-300), CURVATURE_SENTINEL)
    return _as_out(k)


def _integrate(kind, ua, ub, i, p, tol):
    u_star = math.sqrt(1.0 - SINGULAR_BAND)
    sign = 1.0
    if ub < ua:
        ua, ub, sign = ub, ua, -1.0
    if ub == ua:
        return 0.0

    def f_u(u):
        d = clasp_dxdu(u, i, p)
        w = 1.0 / math.sqrt(max(1.0 - u * u, 0.0)) if u < 1.0 else math.inf
        return (u * w * d) if kind == "z" else (w * d)

    def f_theta(th):
        s = math.sin(th)
        d = clasp_dxdu(min(s, p.tau(i)), i, p)
        return s * d if kind == "z" else d

    total = 0.0
    pieces = []
    if ua < u_star:
        pieces.append(("u", ua, min(ub, u_star)))
    if ub > u_star:
        pieces.append(("theta", math.asin(max(ua, u_star)), math.asin(min(ub, 1.0))))
    for var, a, b in pieces:
        if b <= a:
            continue
        fn = f_u if var == "u" else f_theta
        val, err = integrate.quad(fn, a, b, epsabs=tol, epsrel=0.0, limit=400)
        if not (err <= max(10 * tol, 1e-14)):
            raise QuadratureFailure(f"{kind}-integral on [{a}, {b}] reached only {err:.3g}")
        total += val
    return sign * total


def clasp_z(u_a, u_b, i: int, p: ClaspParams, tol: float = DEFAULT_QUAD_TOL) -> float:
    """Height gained by side ``i`` between tangent values u_a and u_b.

    Measured away from the tip, i.e. positive when u_b > u_a.
    """
    _check_side(i)
    _check_range([u_a, u_b], i, p)
    return _integrate("z", float(u_a), float(u_b), i, p, tol)


def clasp_arclength(u_a, u_b, i: int, p: ClaspParams, tol: float = DEFAULT_QUAD_TOL) -> float:
    _check_side(i)
    _check_range([u_a, u_b], i, p)
    return abs(_integrate("s", float(u_a), float(u_b), i, p, tol))


@lru_cache(maxsize=256)
def _height_cached(tau_1, tau_2, i, tol):
    p = ClaspParams(tau_1, tau_2)
    return clasp_z(0.0, p.tau(i), i, p, tol)


def clasp_height(i: int, p: ClaspParams, tol: float = 1e-13) -> float:
    """Height of side ``i`` from its tip to its junction at u_i = tau_i."""
    _check_side(i)
    return _height_cached(p.tau_1, p.tau_2, i, tol)


def tip_gap(p: ClaspParams, tol: float = 1e-13) -> float:
    """Vertical distance between the two tips of a clasp.

    The tip of side 1 faces the junction of side 2 across a strut of
    vertical extent sqrt(1 - tau_2^2) (and symmetrically).
    """
    return clasp_height(2, p, tol) + math.sqrt(1.0 - p.tau_2**2)


# ---------------------------------------------------------------------------
# Node tables on a shared strut-parameter grid

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _theta_integrals(theta_nodes, i, p, tau):
    """Cumulative height and arclength along theta nodes (composite Gauss-Legendre)."""
    a, b = theta_nodes[:-1], theta_nodes[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    th = mid[:, None] + half[:, None] * _GL_X[None, :]
    s = np.minimum(np.sin(th), tau)
    d = np.asarray(clasp_dxdu(s.ravel(), i, p)).reshape(s.shape)
    dz = (half[:, None] * _GL_W[None, :] * s * d).sum(axis=1)
    ds = (half[:, None] * _GL_W[None, :] * d).sum(axis=1)
    return np.concatenate([[0.0], np.cumsum(dz)]), np.concatenate([[0.0], np.cumsum(ds)])


@dataclass(frozen=True)
class ClaspTable:
    """Per-node data of both sides of a clasp on a shared t-grid."""

    params: ClaspParams
    t: np.ndarray
    u: dict
    x: dict
    z: dict
    s: dict
    rho: dict

    def side_u_to_t(self, u, i):
        return u / self.params.tau(i) if i == 1 else 1.0 - u / self.params.tau(i)


def _max_turn_ok(t0, t1, p, h, reach):
    for i in (1, 2):
        tau = p.tau(i)
        ua = tau * t0 if i == 1 else tau * (1 - t0)
        ub = tau * t1 if i == 1 else tau * (1 - t1)
        dth = abs(math.asin(min(ub, 1.0)) - math.asin(min(ua, 1.0)))
        um = 0.5 * (ua + ub)
        rho = max(float(clasp_dxdu(x, i, p)) for x in (ua, ub, um))
        if dth > 0.05 or dth * (rho + reach[i - 1]) > h:
            return False
    return True


def strut_grid(p: ClaspParams, h: float, reach=(0.0, 0.0)) -> np.ndarray:
    """Shared t-grid for both sides of a clasp.

    Every interval turns by at most 0.05 rad and has arclength at most ``h``
    on each side and on its outer parallels up to distance ``reach``.
    Singular tips (vanishing radius of curvature) are additionally refined
    until the node next to the tip has curvature at least 1/h.
    """
    h = float(h)
    stack = [(0.0, 1.0)]
    out = []
    while stack:
        a, b = stack.pop()
        if b - a > 1e-14 and not _max_turn_ok(a, b, p, h, reach):
            m = 0.5 * (a + b)
            stack.append((m, b))
            stack.append((a, m))
        else:
            out.append(a)
    out.append(1.0)
    t = np.array(sorted(out))
    # singular tips: side 1 at t=0 when tau_2 = 1, side 2 at t=1 when tau_1 = 1
    extra = []
    for i, end in ((1, 0.0), (2, 1.0)):
        if float(clasp_dxdu(0.0, i, p)) > 0:
            continue
        inner = t[1] if end == 0.0 else t[-2]
        while True:
            u = p.tau(i) * inner if i == 1 else p.tau(i) * (1 - inner)
            if float(clasp_curvature(u, i, p)) >= 1.0 / h or abs(inner - end) < 1e-15:
                break
            inner = 0.5 * (inner + end)
            extra.append(inner)
    if extra:
        t = np.unique(np.concatenate([t, extra]))
    if p.tau_1 == p.tau_2:
        t = np.unique(np.concatenate([t, 1.0 - t]))
        keep = np.concatenate([[True], np.diff(t) > 1e-13])
        t = t[keep]
        t[0], t[-1] = 0.0, 1.0
    return t


@lru_cache(maxsize=128)
def clasp_table(tau_1: float, tau_2: float, h: float, reach_1: float = 0.0, reach_2: float = 0.0) -> ClaspTable:
    p = ClaspParams(tau_1, tau_2)
    t = strut_grid(p, h, (reach_1, reach_2))
    u, x, z, s, rho = {}, {}, {}, {}, {}
    for i in (1, 2):
        tau = p.tau(i)
        ui = tau * t if i == 1 else tau * (1.0 - t)
        ui = np.clip(ui, 0.0, tau)
        order = np.argsort(ui, kind="stable")
        us = ui[order]
        th = np.arcsin(np.minimum(us, 1.0))
        zc, sc = _theta_integrals(th, i, p, tau)
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        u[i] = ui
        x[i] = np.asarray(clasp_x(ui, i, p), dtype=float)
        z[i] = zc[inv]
        s[i] = sc[inv]
        rho[i] = np.asarray(clasp_dxdu(ui, i, p), dtype=float)
    return ClaspTable(p, t, u, x, z, s, rho)
