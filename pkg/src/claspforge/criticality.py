"""Thickness, struts and force balance for sampled links.

A node is addressed by ``(component, index)``.  Forces follow one sign
convention throughout: ``F`` is the discrete curvature force with
``sum(xi . F) = -dLen^w``, a strut with measure ``mu`` pushes its two
endpoints apart, and the balance residual is ``F + A* mu``.
"""

from __future__ import annotations

import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear, nnls
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree

from .geometry import DEFAULT_H, Link, SampledCurve, sample_link

STRUT_TOL = 1e-4
MIN_SLACK = 1e-10
DENSE_LIMIT = 1000
_CHUNK = 2048


class SingleComponent(ValueError):
    pass


class IncompatibleField(ValueError):
    pass


class SolverFailure(RuntimeError):
    pass


class DegenerateField(ValueError):
    pass


@dataclass(frozen=True)
class Strut:
    a: tuple
    b: tuple
    length: float
    direction: tuple  # unit vector from b to a
    isolated: bool = False


@dataclass(frozen=True)
class WallStrut:
    node: tuple
    obstacle: int
    gradient: tuple


@dataclass
class BalanceReport:
    h: float
    thickness: float
    struts: list
    wall_struts: list
    measure: np.ndarray
    wall_measure: np.ndarray
    residual: list
    residual_max: float
    residual_l2: float
    clamped: int = 0
    epsilon_probe: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def residual_density(self) -> float:
        """Node residual per unit of nominal spacing; tends to a positive floor when unbalanced."""
        return self.residual_max / self.h

    @property
    def isolated(self):
        return [k for k, s in enumerate(self.struts) if s.isolated]

    def node_residual(self, node):
        return self.residual[node[0]][node[1]]


def thread_count(default: int | None = None) -> int:
    env = os.environ.get("CLASPFORGE_THREADS")
    n = default or os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            pass
    return max(1, n)


# ---------------------------------------------------------------------------
# thickness


def _brute_min(P, Q):
    best, bi, bj = math.inf, -1, -1
    qq = np.einsum("ij,ij->i", Q, Q)
    for lo in range(0, len(P), _CHUNK):
        blk = P[lo:lo + _CHUNK]
        d2 = np.einsum("ij,ij->i", blk, blk)[:, None] + qq[None, :] - 2.0 * blk @ Q.T
        k = int(np.argmin(d2))
        i, j = divmod(k, len(Q))
        # recompute exactly to avoid the cancellation in the expanded form
        d = float(np.linalg.norm(blk[i] - Q[j]))
        if d < best:
            best, bi, bj = d, lo + i, j
    # the expanded form can misrank near-ties; polish in a small window
    for i in range(max(bi - 3, 0), min(bi + 4, len(P))):
        dd = np.linalg.norm(Q - P[i], axis=1)
        j = int(np.argmin(dd))
        if dd[j] < best:
            best, bi, bj = float(dd[j]), i, j
    return best, bi, bj


def _tree_min(P, Q):
    d, j = cKDTree(Q).query(P)
    i = int(np.argmin(d))
    return float(d[i]), i, int(j[i])


def _parabola_min(x0, f0, x1, f1, x2, f2):
    """Vertex value of the parabola through three points, if it lies inside the bracket."""
    d0, d2 = x0 - x1, x2 - x1
    if d0 >= 0 or d2 <= 0:
        return f1
    g0, g2 = (f0 - f1) / d0, (f2 - f1) / d2
    c = (g2 - g0) / (d2 - d0)
    if c <= 0:
        return f1
    b = g0 - c * d0
    x = -b / (2 * c)
    if not (d0 < x < d2):
        return f1
    return f1 + b * x + c * x * x


def _neighbour(s: SampledCurve, k: int, step: int):
    m = k + step
    if s.closed:
        m %= len(s.points)
    elif not 0 <= m < len(s.points):
        return None, None
    return m, step * float(np.linalg.norm(s.points[m] - s.points[k]))


def _refine(sa: SampledCurve, sb: SampledCurve, i: int, j: int) -> float:
    d = float(np.linalg.norm(sa.points[i] - sb.points[j]))
    best = d
    for curve, k, other, fixed in ((sa, i, sb, j), (sb, j, sa, i)):
        lo, xlo = _neighbour(curve, k, -1)
        hi, xhi = _neighbour(curve, k, 1)
        if lo is None or hi is None:
            continue
        f0 = float(np.linalg.norm(curve.points[lo] - other.points[fixed]))
        f2 = float(np.linalg.norm(curve.points[hi] - other.points[fixed]))
        best = min(best, _parabola_min(xlo, f0, 0.0, d, xhi, f2))
    return best


def gehring_thickness(link: Link, h: float = DEFAULT_H, samples=None, method: str = "brute",
                      refine: bool = True, detail: bool = False):
    """Minimum distance between sample points on different components.

    ``method`` is ``"brute"`` (the all-pairs oracle) or ``"kdtree"``; both
    return the same node pair.  With ``refine`` the node minimum is polished
    by a parabola through its index neighbours.
    """
    if len(link.components) < 2:
        raise SingleComponent("thickness needs at least two components")
    samples = samples if samples is not None else sample_link(link, h)
    fn = {"brute": _brute_min, "kdtree": _tree_min}[method]
    best = (math.inf, None, None)
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            d, i, j = fn(samples[a].points, samples[b].points)
            if d < best[0]:
                best = (d, (a, i), (b, j))
    value = best[0]
    if refine:
        (a, i), (b, j) = best[1], best[2]
        value = _refine(samples[a], samples[b], i, j)
    if detail:
        return value, best[1], best[2]
    return value


# ---------------------------------------------------------------------------
# struts


def _shift(s: SampledCurve, idx: np.ndarray, step: int):
    """Neighbour indices and a mask of those that exist."""
    m = idx + step
    if s.closed:
        return m % len(s), np.ones(len(idx), bool)
    ok = (m >= 0) & (m < len(s))
    return np.clip(m, 0, len(s) - 1), ok


def _local_minima(sa: SampledCurve, sb: SampledCurve, I, J, d, slack):
    keep = np.ones(len(I), bool)
    for step in (-1, 1):
        m, ok = _shift(sa, I, step)
        dn = np.linalg.norm(sa.points[m] - sb.points[J], axis=1)
        keep &= ~ok | (dn >= d - slack)
        m, ok = _shift(sb, J, step)
        dn = np.linalg.norm(sa.points[I] - sb.points[m], axis=1)
        keep &= ~ok | (dn >= d - slack)
    return keep


def find_struts(link: Link, h: float = DEFAULT_H, tol: float = STRUT_TOL, samples=None,
                thickness: float | None = None, slack: float = MIN_SLACK) -> list:
    """Cross-component node pairs within ``tol`` of the thickness that are
    local distance minima along both curves.

    Each contact curve yields one strut per node pair; a strut without a
    neighbouring strut between the same two components is marked isolated.
    """
    samples = samples if samples is not None else sample_link(link, h)
    if thickness is None:
        thickness = gehring_thickness(link, samples=samples, refine=False)
    cut = thickness + tol
    trees = [cKDTree(s.points) for s in samples]
    struts = []
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            sa, sb = samples[a], samples[b]
            pairs = trees[a].sparse_distance_matrix(trees[b], cut, output_type="ndarray")
            if len(pairs) == 0:
                continue
            order = np.lexsort((pairs["j"], pairs["i"]))
            I, J = pairs["i"][order].astype(np.int64), pairs["j"][order].astype(np.int64)
            d = np.linalg.norm(sa.points[I] - sb.points[J], axis=1)
            sel = (d <= cut) & _local_minima(sa, sb, I, J, d, slack)
            I, J, d = I[sel], J[sel], d[sel]
            keyset = set(zip(I.tolist(), J.tolist()))
            vecs = (sa.points[I] - sb.points[J]) / d[:, None]
            for i, j, dd, v in zip(I.tolist(), J.tolist(), d.tolist(), vecs.tolist()):
                lonely = not any(
                    (i + di, j + dj) in keyset for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj
                )
                struts.append(Strut((a, i), (b, j), dd, tuple(v), lonely))
    return struts


def find_wall_struts(link: Link, samples, tol: float = 1e-9) -> list:
    walls = []
    for c, s in enumerate(samples):
        for k, ob in enumerate(link.obstacles):
            g = ob(s.points)
            for i in np.flatnonzero(np.abs(g) <= tol):
                walls.append(WallStrut((c, int(i)), k, tuple(np.asarray(ob.normal, float).tolist())))
    return walls


def endpoint_nodes(samples) -> dict:
    """Constrained open ends mapped to their plane normals."""
    out = {}
    for c, s in enumerate(samples):
        if s.closed or s.endpoint_normals is None:
            continue
        out[(c, 0)] = np.asarray(s.endpoint_normals[0], float)
        out[(c, len(s) - 1)] = np.asarray(s.endpoint_normals[1], float)
    return out


def check_compatible(samples, xi, tol: float = 1e-9):
    scale = max(max(float(np.abs(x).max()) for x in xi), 1.0)
    for (c, i), n in endpoint_nodes(samples).items():
        if abs(float(xi[c][i] @ n)) > tol * scale:
            raise IncompatibleField(f"field not tangent to the endpoint plane at component {c}, node {i}")


def _flat_index(xi, nodes):
    offs = np.concatenate([[0], np.cumsum([len(x) for x in xi])])
    return np.array([offs[c] + i for c, i in nodes], dtype=np.int64).reshape(-1)


def rigidity_apply(samples, xi, struts, wall_struts=(), check: bool = True):
    """First variation of every strut length and every wall function under ``xi``."""
    if check:
        check_compatible(samples, xi)
    X = np.concatenate(xi)
    if struts:
        ia = _flat_index(xi, [s.a for s in struts])
        ib = _flat_index(xi, [s.b for s in struts])
        D = np.array([s.direction for s in struts])
        sv = np.einsum("ij,ij->i", X[ia] - X[ib], D)
    else:
        sv = np.zeros(0)
    if wall_struts:
        iw = _flat_index(xi, [w.node for w in wall_struts])
        G = np.array([w.gradient for w in wall_struts])
        wv = np.einsum("ij,ij->i", X[iw], G)
    else:
        wv = np.zeros(0)
    return sv, wv


def rigidity_adjoint(samples, struts, mu, wall_struts=(), nu=None):
    """Node forces ``A* mu``: each strut pushes its endpoints apart."""
    out = [np.zeros_like(s.points) for s in samples]
    for s, m in zip(struts, mu):
        d = np.asarray(s.direction) * m
        out[s.a[0]][s.a[1]] += d
        out[s.b[0]][s.b[1]] -= d
    if nu is not None:
        for w, m in zip(wall_struts, nu):
            out[w.node[0]][w.node[1]] += np.asarray(w.gradient) * m
    return out


# ---------------------------------------------------------------------------
# balance


def _groups(nodes_of_column, ncols):
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for cols in nodes_of_column:
        r0 = find(cols[0])
        for n in cols[1:]:
            r = find(n)
            if r != r0:
                parent[r] = r0
    groups = defaultdict(list)
    for k in range(ncols):
        groups[find(nodes_of_column[k][0])].append(k)
    return [groups[g] for g in sorted(groups, key=lambda g: min(groups[g]))]


def _solve_group(cols, col_entries, forces, proj):
    nodes = sorted({n for k in cols for n, _ in col_entries[k]})
    row = {n: 3 * r for r, n in enumerate(nodes)}
    b = np.zeros(3 * len(nodes))
    for n in nodes:
        f = forces[n[0]][n[1]]
        P = proj.get(n)
        b[row[n]:row[n] + 3] = -(f if P is None else P @ f)
    ri, ci, vals = [], [], []
    for c, k in enumerate(cols):
        for n, vec in col_entries[k]:
            P = proj.get(n)
            v = vec if P is None else P @ vec
            for t in range(3):
                ri.append(row[n] + t)
                ci.append(c)
                vals.append(v[t])
    A = coo_matrix((vals, (ri, ci)), shape=(len(b), len(cols))).tocsc()
    # a wall column at a constrained end projects to zero; it carries nothing
    live = np.flatnonzero(np.sqrt(A.multiply(A).sum(axis=0)).A1 > 1e-12)
    x = np.zeros(len(cols))
    if len(live) == 0:
        return x, 0
    full, A = A, A[:, live]
    if len(live) <= DENSE_LIMIT:
        try:
            xl, _ = nnls(A.toarray(), b, maxiter=50 * len(live) + 1000)
        except RuntimeError as exc:
            raise SolverFailure(str(exc)) from exc
    else:
        res = lsq_linear(A.tocsr(), b, bounds=(0.0, np.inf), tol=1e-12, max_iter=10000)
        if res.status <= 0:
            raise SolverFailure(res.message)
        xl = res.x
    x[live] = xl
    grad = full.T @ (full @ x - b)
    clamped = int(np.sum((x <= 0) & (grad > 1e-8 * max(1.0, float(np.abs(b).max())))))
    return x, clamped


def balance_solve(link: Link, h: float = DEFAULT_H, tol: float = STRUT_TOL, samples=None,
                  struts=None, thickness: float | None = None) -> BalanceReport:
    """Nonnegative least-squares strut measure cancelling the curvature force.

    Rows at constrained open ends are projected onto the end plane, since
    the constraint absorbs any normal force there.  Struts that share no
    node decouple, so each connected strut cluster is solved on its own.
    """
    samples = samples if samples is not None else sample_link(link, h)
    if thickness is None:
        thickness = gehring_thickness(link, samples=samples)
    if struts is None:
        struts = find_struts(link, tol=tol, samples=samples, thickness=thickness)
    walls = find_wall_struts(link, samples)
    forces = [s.curvature_force for s in samples]
    proj = {n: np.eye(3) - np.outer(v, v) for n, v in endpoint_nodes(samples).items()}

    col_entries = []
    for s in struts:
        d = np.asarray(s.direction)
        col_entries.append([(s.a, d), (s.b, -d)])
    for w in walls:
        col_entries.append([(w.node, np.asarray(w.gradient))])
    x = np.zeros(len(col_entries))
    clamped = 0
    if col_entries:
        for cols in _groups([[n for n, _ in e] for e in col_entries], len(col_entries)):
            xs, cl = _solve_group(cols, col_entries, forces, proj)
            x[cols] = xs
            clamped += cl
    mu, nu = x[:len(struts)], x[len(struts):]
    push = rigidity_adjoint(samples, struts, mu, walls, nu)
    residual = []
    for c, s in enumerate(samples):
        r = s.curvature_force + push[c]
        for (cc, i), P in proj.items():
            if cc == c:
                r[i] = P @ r[i]
        residual.append(r)
    norms = np.concatenate([np.linalg.norm(r, axis=1) for r in residual])
    return BalanceReport(
        h=h,
        thickness=float(thickness),
        struts=struts,
        wall_struts=walls,
        measure=mu,
        wall_measure=nu,
        residual=residual,
        residual_max=float(norms.max()),
        residual_l2=float(np.sqrt(np.sum(norms ** 2))),
        clamped=clamped,
    )


# ---------------------------------------------------------------------------
# strut polygons


def strut_cycles(struts) -> list:
    """Connected clusters of the strut graph in which every node has degree two.

    Each is returned as its list of strut indices; its length is the number
    of edges.
    """
    adj = defaultdict(list)
    for k, s in enumerate(struts):
        adj[s.a].append(k)
        adj[s.b].append(k)
    seen, cycles = set(), []
    for start in sorted(adj):
        if start in seen:
            continue
        stack, comp_nodes, comp_edges = [start], [], set()
        seen.add(start)
        while stack:
            n = stack.pop()
            comp_nodes.append(n)
            for k in adj[n]:
                comp_edges.add(k)
                s = struts[k]
                m = s.b if s.a == n else s.a
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        if len(comp_edges) == len(comp_nodes) >= 3 and all(len(adj[n]) == 2 for n in comp_nodes):
            cycles.append(sorted(comp_edges))
    return cycles


def cycle_residuals(report: BalanceReport, cycles) -> np.ndarray:
    """Largest balance residual over the nodes of each strut polygon."""
    out = []
    for cyc in cycles:
        nodes = {report.struts[k].a for k in cyc} | {report.struts[k].b for k in cyc}
        out.append(max(float(np.linalg.norm(report.node_residual(n))) for n in nodes))
    return np.array(out)


# ---------------------------------------------------------------------------
# strong-criticality probe


@dataclass
class ProbeResult:
    value: float  # max over trials of the smallest strut derivative
    trial_minima: np.ndarray
    active: bool  # False when there is no strut or live wall to resist

    @property
    def all_negative(self) -> bool:
        return self.active and bool(np.all(self.trial_minima < 0))


def _basis(sig: np.ndarray, degree: int) -> np.ndarray:
    cols = [np.ones_like(sig)]
    for k in range(1, degree + 1):
        cols.append(np.cos(math.pi * k * sig))
        cols.append(np.sin(math.pi * k * sig))
    return np.stack(cols, axis=1)


def random_field(samples, rng: np.random.Generator, degree: int = 4) -> list:
    """Smooth per-component field, tangent to the end planes at constrained ends."""
    ends = endpoint_nodes(samples)
    xi = []
    for c, s in enumerate(samples):
        sig = s.arclengths / s.arclengths[-1] if s.arclengths[-1] > 0 else np.zeros(len(s))
        B = _basis(sig, degree)
        coef = rng.standard_normal((B.shape[1], 3)) / np.sqrt(1.0 + np.arange(B.shape[1]))[:, None]
        f = B @ coef
        if (c, 0) in ends:
            n0, n1 = ends[(c, 0)], ends[(c, len(s) - 1)]
            a0, a1 = f[0] @ n0, f[-1] @ n1
            f -= np.outer((1 - sig) ** 2 * a0, n0) + np.outer(sig ** 2 * a1, n1)
        xi.append(f)
    return xi


def length_variation(samples, xi) -> float:
    """First variation of the weighted polyline length."""
    return -float(sum(np.sum(x * s.curvature_force) for x, s in zip(xi, samples)))


def _probe_trial(samples, struts, walls, seed_seq, degree, attempts=20):
    rng = np.random.default_rng(seed_seq)
    for _ in range(attempts):
        xi = random_field(samples, rng, degree)
        dlen = length_variation(samples, xi)
        scale = sum(float(np.abs(x).sum()) for x in xi) * max(float(np.abs(s.curvature_force).max()) for s in samples)
        if abs(dlen) > 1e-9 * scale:
            break
    else:
        raise DegenerateField("every sampled field leaves the weighted length unchanged")
    xi = [x / -dlen for x in xi]  # now dLen^w = -1
    sv, wv = rigidity_apply(samples, xi, struts, walls, check=False)
    vals = np.concatenate([sv, wv])
    return float(vals.min()) if len(vals) else math.inf


def criticality_probe(link: Link, trials: int = 100, seed: int = 0, h: float = DEFAULT_H,
                      samples=None, struts=None, degree: int = 4, threads: int | None = None) -> ProbeResult:
    """Smallest strut (or live wall) derivative for random length-reducing fields.

    Fields are normalised to ``dLen^w = -1``.  A strongly critical link gives
    a negative minimum in every trial; the largest such minimum is an
    empirical stand-in for the unknown margin.
    """
    samples = samples if samples is not None else sample_link(link, h)
    if struts is None:
        struts = find_struts(link, samples=samples)
    ends = endpoint_nodes(samples)
    # walls at constrained ends see only tangential motion; their derivative is identically zero
    walls = [w for w in find_wall_struts(link, samples) if w.node not in ends]
    if not struts and not walls:
        return ProbeResult(math.inf, np.full(trials, math.inf), False)
    seqs = np.random.SeedSequence(seed).spawn(trials)
    workers = min(thread_count(threads), trials) if trials else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            mins = list(ex.map(lambda q: _probe_trial(samples, struts, walls, q, degree), seqs))
    else:
        mins = [_probe_trial(samples, struts, walls, q, degree) for q in seqs]
    mins = np.array(mins)
    return ProbeResult(float(mins.max()) if len(mins) else math.inf, mins, True)
