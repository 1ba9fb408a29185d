"""Outer polytope approximations of norm balls, projections and Hausdorff distances."""
from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .numerics import Lp, MixedInfOne, NormSpec, Stream, as_vector, dual_norm, norm


class NotOnSphere(ValueError):
    """Point handed to support_halfspace does not have unit norm."""


class MeshRefinementFailed(RuntimeError):
    """The sandwich test kept failing after the maximum number of refinements."""


class NotNested(ValueError):
    """Inner set is not contained in the outer polytope."""


class Infeasible(ValueError):
    """Projection onto an empty set."""


DEDUP_TOL = 1e-9
MAX_REFINEMENTS = 20
EXHAUSTIVE_PROJECTION_ROWS = 20


@dataclass(frozen=True)
class EpsSchedule:
    eps1: float = 0.5
    ratio: float = 0.5
    explicit: tuple | None = None

    def __post_init__(self):
        if self.explicit is not None:
            vals = list(self.explicit)
            if any(v <= 0 for v in vals) or any(b >= a for a, b in zip(vals, vals[1:])):
                raise ValueError("explicit schedule must be positive and strictly decreasing")
        elif not (self.eps1 > 0 and 0 < self.ratio < 1):
            raise ValueError("need eps1 > 0 and ratio in (0, 1)")

    def eps(self, j: int) -> float:
        """Level j >= 1."""
        if j < 1:
            raise ValueError("levels start at 1")
        if self.explicit is not None:
            if j > len(self.explicit):
                raise IndexError(f"schedule has only {len(self.explicit)} levels")
            return float(self.explicit[j - 1])
        return self.eps1 * self.ratio ** (j - 1)

    def __len__(self):
        return len(self.explicit) if self.explicit is not None else 10**9


class Polytope:
    """{z : G z <= h, E z = f}.  Ball approximations use h = 1 and keep the generators."""

    def __init__(self, G, h, E=None, f=None, eps=None, approximate=False):
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self.h = np.asarray(h, dtype=float).ravel()
        d = self.G.shape[1]
        self.E = np.zeros((0, d)) if E is None else np.atleast_2d(np.asarray(E, dtype=float))
        self.f = np.zeros(0) if f is None else np.asarray(f, dtype=float).ravel()
        self.eps = eps
        self.approximate = approximate
        self._vertices = None

    @classmethod
    def from_generators(cls, Gamma, eps=None, approximate=False):
        Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
        return cls(Gamma.T, np.ones(Gamma.shape[1]), eps=eps, approximate=approximate)

    @classmethod
    def box(cls, lo, hi):
        lo, hi = as_vector(lo), as_vector(hi)
        d = lo.size
        return cls(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([hi, -lo]))

    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @property
    def generators(self) -> np.ndarray:
        """Columns a^i of the generator matrix (only meaningful when h = 1)."""
        return self.G.T

    @property
    def count(self) -> int:
        return self.G.shape[0]

    def contains(self, z, tol=1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        ok = np.all(self.G @ z <= self.h + tol * (1 + np.abs(self.h)))
        if self.f.size:
            ok = ok and np.all(np.abs(self.E @ z - self.f) <= tol * (1 + np.abs(self.f)))
        return bool(ok)

    def vertices(self) -> np.ndarray:
        if self._vertices is None:
            self._vertices = _vertices(self)
        return self._vertices

    def to_json(self) -> str:
        gens = sorted(tuple(float(v) for v in a) for a in self.G / self.h[:, None])
        return json.dumps({"eps": self.eps, "dim": self.dim, "generators": [list(g) for g in gens]})

    @classmethod
    def from_json(cls, text: str) -> "Polytope":
        data = json.loads(text)
        return cls.from_generators(np.array(data["generators"]).T, eps=data.get("eps"))


def _vertices(P: Polytope) -> np.ndarray:
    if P.f.size:
        # parametrise the affine hull and enumerate in reduced coordinates
        z0, *_ = np.linalg.lstsq(P.E, P.f, rcond=None)
        _, s, vt = np.linalg.svd(P.E)
        r = int(np.sum(s > 1e-10 * max(s.max(initial=0), 1)))
        N = vt[r:].T
        if N.shape[1] == 0:
            return z0[None, :] if P.contains(z0) else np.zeros((0, P.dim))
        red = Polytope(P.G @ N, P.h - P.G @ z0)
        return z0 + red.vertices() @ N.T
    if P.count <= lp.MAX_VERTEX_ROWS:
        return lp.enumerate_vertices(P.G, P.h)
    if P.dim == 2:
        return _polygon_vertices(P.G, P.h)
    return _halfspace_vertices(P.G, P.h)


def _halfspace_vertices(G, h, tol=1e-9):
    """Vertices of a full-dimensional bounded polytope through qhull's dual hull."""
    from scipy.spatial import HalfspaceIntersection

    d = G.shape[1]
    norms = np.linalg.norm(G, axis=1)
    # Chebyshev centre: max r s.t. G z + r |g_i| <= h
    sol = lp.solve(lp.LpProblem(np.concatenate([np.zeros(d), [1.0]]), np.hstack([G, norms[:, None]]), h,
                                lb=np.concatenate([np.full(d, -np.inf), [0.0]]), ub=np.concatenate([np.full(d, np.inf), [1e6]]),
                                sense="max"))
    if not sol.optimal:
        return np.zeros((0, d))
    if sol.value <= 1e-9:
        raise lp.SizeLimit("polytope is not full-dimensional; enumeration needs <= 40 rows")
    if not lp.is_bounded(G, h):
        raise lp.Unbounded("polyhedron is unbounded")
    hs = HalfspaceIntersection(np.hstack([G, -h[:, None]]), sol.x[:d])
    pts = hs.intersections[np.all(np.isfinite(hs.intersections), axis=1)]
    return lp.dedup_points(pts, tol * 10)


def _polygon_vertices(G, h, tol=1e-9):
    # intersect each pair of lines; keep feasible points (O(K^2), vectorised)
    K = G.shape[0]
    i, j = np.triu_indices(K, 1)
    a, b = G[i], G[j]
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    good = np.abs(det) > 1e-12
    i, j, a, b, det = i[good], j[good], a[good], b[good], det[good]
    x = (h[i] * b[:, 1] - h[j] * a[:, 1]) / det
    y = (a[:, 0] * h[j] - b[:, 0] * h[i]) / det
    pts = np.stack([x, y], axis=1)
    feas = np.all(G @ pts.T <= (h + tol * (1 + np.abs(h)))[:, None], axis=0)
    return lp.dedup_points(pts[feas] + 0.0, tol)


# -- support half-spaces --------------------------------------------------

def support_halfspace(spec: NormSpec, x, tol: float = 1e-10) -> np.ndarray:
    """Normal a with phi*(a) = 1 and a^T x = 1 at a unit-norm point x."""
    x = as_vector(x)
    if abs(norm(x, spec) - 1.0) > tol:
        raise NotOnSphere(f"phi(x) = {norm(x, spec)!r}")
    ax = np.abs(x)
    if isinstance(spec, MixedInfOne):
        i = int(np.argmax(ax >= ax.max() - 1e-12))
        a = (1.0 - spec.alpha) * np.sign(x)
        a[i] += spec.alpha * np.sign(x[i])
        return a
    p = spec.p
    if math.isinf(p):
        i = int(np.argmax(ax >= 1.0 - 1e-12))
        a = np.zeros_like(x)
        a[i] = np.sign(x[i])
        return a
    if p == 1:
        return np.where(x >= 0, 1.0, -1.0)
    a = np.sign(x) * ax ** (p - 1.0)
    return a / dual_norm(a, spec)


def sphere_point(spec: NormSpec, direction) -> np.ndarray:
    d = as_vector(direction)
    return d / norm(d, spec)


# -- meshes -----------------------------------------------------------------

def _coordinate_generators(q):
    I = np.eye(q)
    return np.hstack([I, -I])


def _mesh_directions(q: int, level: int, seed: int = 0) -> tuple[np.ndarray, bool]:
    """Nested direction sets; level r+1 contains level r.  Returns (dirs, approximate)."""
    if q == 1:
        return np.array([[1.0], [-1.0]]), False
    if q == 2:
        K = 4 * 2**level
        t = 2 * np.pi * np.arange(K) / K
        return np.stack([np.cos(t), np.sin(t)], axis=1), False
    if q <= 4:
        g = 2**level + 1
        ticks = np.linspace(-1.0, 1.0, g)
        dirs = []
        for axis in range(q):
            for sgn in (1.0, -1.0):
                for rest in itertools.product(ticks, repeat=q - 1):
                    v = np.insert(np.array(rest), axis, sgn)
                    dirs.append(v)
        return np.array(dirs), False
    n = 2 * q * 2**level
    # one sub-stream per direction keeps coarser meshes a prefix of finer ones
    return np.array([Stream(seed, i).normal(q) for i in range(n)]), True


def dedup_generators(Gamma: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    return lp.dedup_points(Gamma.T, tol).T


def _exact_generators(spec: NormSpec, q: int):
    if isinstance(spec, Lp) and math.isinf(spec.p):
        return _coordinate_generators(q)
    if isinstance(spec, Lp) and spec.p == 1:
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=q))).T
        return np.hstack([_coordinate_generators(q), signs])
    if isinstance(spec, MixedInfOne):
        cols = [_coordinate_generators(q)]
        for s in itertools.product((1.0, -1.0), repeat=q):
            s = np.array(s)
            for i in range(q):
                a = (1.0 - spec.alpha) * s
                a[i] += spec.alpha * s[i]
                cols.append(a[:, None])
        return dedup_generators(np.hstack(cols))
    return None


def mesh_generators(spec: NormSpec, q: int, level: int) -> tuple[np.ndarray, bool]:
    dirs, approx = _mesh_directions(q, level)
    gens = [support_halfspace(spec, sphere_point(spec, d)) for d in dirs]
    Gamma = np.hstack([_coordinate_generators(q), np.array(gens).T])
    return dedup_generators(Gamma), approx


@functools.lru_cache(maxsize=256)
def mesh_level_for(spec: NormSpec, q: int, eps: float, samples: int = 2000) -> int:
    for level in range(MAX_REFINEMENTS + 1):
        Gamma, _ = mesh_generators(spec, q, level)
        if sandwich_check(Polytope.from_generators(Gamma), spec, eps, samples):
            return level
        if Gamma.shape[1] > 200_000:
            break
    raise MeshRefinementFailed(f"sandwich test still failing at eps={eps}")


def level_for(spec: NormSpec, j: int, sched: EpsSchedule, q: int) -> int:
    """Finest mesh level needed by any of the first j schedule entries."""
    return max(mesh_level_for(spec, q, sched.eps(i)) for i in range(1, j + 1))


def build_Q(spec: NormSpec, j: int, sched: EpsSchedule, q: int) -> Polytope:
    """Outer approximation at level j; the half-space set grows with j."""
    eps = sched.eps(j)
    exact = _exact_generators(spec, q)
    if exact is not None:
        return Polytope.from_generators(exact, eps=eps)
    Gamma, approx = mesh_generators(spec, q, level_for(spec, j, sched, q))
    return Polytope.from_generators(Gamma, eps=eps, approximate=approx)


def touch_points(spec: NormSpec, q: int, level: int) -> np.ndarray:
    """Unit-sphere points where the level's support half-spaces touch the ball."""
    dirs, _ = _mesh_directions(q, level)
    pts = [sphere_point(spec, d) for d in dirs]
    pts += list(np.eye(q)) + list(-np.eye(q))
    return lp.dedup_points(np.array(pts), DEDUP_TOL)


def inner_polytope(spec: NormSpec, q: int, level: int) -> Polytope:
    """Convex hull of sphere points; it sits inside the unit ball."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(touch_points(spec, q, level))
    G, h = hull.equations[:, :-1], -hull.equations[:, -1]
    keep = lp.dedup_points(np.hstack([G, h[:, None]]), 1e-10)
    return Polytope(keep[:, :-1], keep[:, -1])


def dense_tangent_generators(q2_count: int) -> np.ndarray:
    """Tangent directions of the Euclidean unit circle (used as a fine discretisation)."""
    t = 2 * np.pi * np.arange(q2_count) / q2_count
    return np.stack([np.cos(t), np.sin(t)])


def sample_sphere(spec: NormSpec, q: int, samples: int, seed: int = 12345) -> np.ndarray:
    rng = Stream(seed)
    if q == 2:
        t = rng.uniform(samples, 0.0, 2 * np.pi)
        dirs = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        dirs = rng.normal((samples, q))
    return np.array([sphere_point(spec, d) for d in dirs])


def sandwich_check(P: Polytope, spec: NormSpec, eps: float, samples: int, seed: int = 12345) -> bool:
    if samples < 1:
        raise ValueError("need at least one sample")
    Gamma = P.G / P.h[:, None]
    # (i) every half-space supports (contains) the unit ball
    if any(dual_norm(a, spec) > 1.0 + 1e-9 for a in Gamma):
        return False
    # (ii) every boundary direction is matched by some generator
    pts = sample_sphere(spec, P.dim, samples, seed)
    best = np.max(pts @ Gamma.T, axis=1)
    return bool(np.all(best >= 1.0 / (1.0 + eps) - 1e-9))


# -- projection ---------------------------------------------------------------

def _kkt_point(G, h, E, f, x, J):
    """Minimiser of ||z - x|| on {G_J z = h_J, E z = f} and its multipliers."""
    C = np.vstack([G[J], E]) if len(J) else E
    d = np.concatenate([h[J], f]) if len(J) else f
    if C.shape[0] == 0:
        return x.copy(), np.zeros(0), np.zeros(0)
    mult, *_ = np.linalg.lstsq(C @ C.T, C @ x - d, rcond=None)
    z = x - C.T @ mult
    if np.max(np.abs(C @ z - d), initial=0.0) > 1e-9 * (1 + np.max(np.abs(d), initial=0.0)):
        return None, None, None
    return z, mult[:len(J)], mult[len(J):]


def _accept(G, h, z, lam, scale, tol=1e-10):
    if z is None:
        return False
    if lam.size and lam.min() < -tol * scale:
        return False
    return bool(np.all(G @ z <= h + tol * (1 + np.abs(h)) * scale))


def _dual_active_set(G, h, E, f, x, max_iter=5000):
    """Goldfarb-Idnani dual active set for min ||z - x||^2 / 2 on {Gz <= h, Ez = f}.

    Starts at the unconstrained minimiser and repeatedly adds the most violated
    row, dropping rows whose multipliers would turn negative.  Returns None when
    the iteration breaks down numerically and raises Infeasible on a certificate.
    """
    n = x.size
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    if E.shape[0]:
        z = x - np.linalg.pinv(E) @ (E @ x - f)
        if np.max(np.abs(E @ z - f)) > 1e-9 * (1 + np.max(np.abs(f))):
            raise Infeasible("inconsistent equalities")
    else:
        z = x.copy()
    norms = np.linalg.norm(G, axis=1)
    norms[norms == 0] = 1.0
    W: list[int] = []
    u = np.zeros(0)
    ne = E.shape[0]
    for _ in range(max_iter):
        viol = (G @ z - h) / norms
        if W:
            viol[W] = -np.inf
        p = int(np.argmax(viol)) if viol.size else -1
        if p < 0 or viol[p] <= 1e-11 * scale:
            return z
        tp = 0.0
        while True:
            N = np.vstack([E, G[W]]).T if (W or ne) else np.zeros((n, 0))
            npv = G[p]
            if N.shape[1]:
                r, *_ = np.linalg.lstsq(N, npv, rcond=None)
                d = -(npv - N @ r)
            else:
                r, d = np.zeros(0), -npv
            ri = r[ne:]
            curv = -float(npv @ d)
            slack = float(npv @ z - h[p])
            t1 = slack / curv if curv > 1e-14 * float(npv @ npv) else np.inf
            t2, drop = np.inf, -1
            for j in np.nonzero(ri > 1e-14)[0]:
                t = u[j] / ri[j]
                if t < t2:
                    t2, drop = t, int(j)
            if not np.isfinite(t1) and not np.isfinite(t2):
                raise Infeasible("projection onto an empty polytope")
            t = min(t1, t2)
            if np.isfinite(t1):
                z = z + t * d
            u = u - t * ri
            tp += t
            if t1 <= t2:
                W.append(p)
                u = np.append(u, tp)
                break
            W.pop(drop)
            u = np.delete(u, drop)
    return None


def _exhaustive_projection(G, h, E, f, x):
    d = G.shape[1] - (np.linalg.matrix_rank(E) if E.shape[0] else 0)
    scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
    for size in range(0, min(d, G.shape[0]) + 1):
        for J in itertools.combinations(range(G.shape[0]), size):
            z, lam, _ = _kkt_point(G, h, E, f, x, list(J))
            if _accept(G, h, z, lam, scale, 1e-9):
                return z
    return None


def _dykstra(G, h, E, f, x, iters=20000, tol=1e-13):
    sets = [("ineq", i) for i in range(G.shape[0])]
    if E.shape[0]:
        sets.append(("eq", None))
        Epinv = np.linalg.pinv(E)
    z = x.copy()
    incr = [np.zeros_like(x) for _ in sets]
    for _ in range(iters):
        prev = z.copy()
        for k, (kind, i) in enumerate(sets):
            w = z + incr[k]
            if kind == "ineq":
                a = G[i]
                excess = a @ w - h[i]
                znew = w - max(excess, 0.0) / (a @ a) * a
            else:
                znew = w - Epinv @ (E @ w - f)
            incr[k] = w - znew
            z = znew
        if np.max(np.abs(z - prev)) < tol:
            break
    return z


def project(P: Polytope, x) -> np.ndarray:
    x = as_vector(x)
    G, h, E, f = P.G, P.h, P.E, P.f
    if P.contains(x, 0.0):
        return x.copy()
    z = _dual_active_set(G, h, E, f, x)
    if z is None:
        if P.count <= EXHAUSTIVE_PROJECTION_ROWS:
            z = _exhaustive_projection(G, h, E, f, x)
        else:
            z = _dykstra(G, h, E, f, x)
            J = [i for i in range(P.count) if G[i] @ z - h[i] >= -1e-7 * (1 + abs(h[i]))]
            zp, lam, _ = _kkt_point(G, h, E, f, x, J)
            if _accept(G, h, zp, lam, 1.0 + np.abs(x).max(), 1e-8):
                z = zp
    if z is None:
        ok, _ = lp.feasible(lp.LpProblem(np.zeros(P.dim), G, h, E if E.size else None, f if f.size else None))
        if not ok:
            raise Infeasible("projection onto an empty polytope")
        raise lp.NumericalBreakdown("projection did not converge")
    return z


def projection_kkt_gap(P: Polytope, x, z) -> float:
    """max over v in P of (x - z)^T (v - z); zero at the true projection."""
    x, z = as_vector(x), as_vector(z)
    g = x - z
    sol = lp.solve(lp.LpProblem(g, P.G, P.h, P.E if P.E.size else None, P.f if P.f.size else None,
                                sense="max"))
    if not sol.optimal:
        raise Infeasible(f"support problem is {sol.status}")
    return float(sol.value - g @ z)


def hausdorff_nested(inner: Polytope, outer: Polytope, tol: float = 1e-9) -> float:
    Vi = inner.vertices()
    for v in Vi:
        if not outer.contains(v, tol):
            raise NotNested("inner vertex lies outside the outer polytope")
    Vo = outer.vertices()
    return float(max(np.linalg.norm(v - project(inner, v)) for v in Vo))


def scaled(P: Polytope, t: float) -> Polytope:
    """t * P for t > 0."""
    return Polytope(P.G, P.h * t, P.E, P.f * t, eps=P.eps, approximate=P.approximate)


def projection_lemma_slacks(omega: Polytope, U: Polytope, T: Polytope, x, u) -> tuple[float, float]:
    """Slacks of the two projection inequalities for omega, U inside T and u in U.

    first:  d_H(omega, T) |x - P_omega x| - |P_omega x - P_T x|^2
    second: d_H(omega, T) + 2 |x - u| - |x - P_omega x|
    """
    x, u = as_vector(x), as_vector(u)
    dH = hausdorff_nested(omega, T)
    po, pt = project(omega, x), project(T, x)
    dist = float(np.linalg.norm(x - po))
    return dH * dist - float(np.sum((po - pt) ** 2)), dH + 2 * float(np.linalg.norm(x - u)) - dist
