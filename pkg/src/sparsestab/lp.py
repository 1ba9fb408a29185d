"""Dense two-phase tableau simplex with Bland's rule, plus vertex enumeration.

Problems are stated as

    min/max  c^T z   s.t.  G z <= h,  E z = f,  lb <= z <= ub

with ``lb``/``ub`` defaulting to -inf/+inf (free variables).  Multipliers are
reported with the sign convention of the minimisation Lagrangian
``c + G^T lam + E^T nu + mu_ub - mu_lb = 0`` (for ``max`` the same identity holds
with ``c`` on the right-hand side), so ``lam >= 0`` in both senses.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


class NumericalBreakdown(RuntimeError):
    """The simplex could not find a usable pivot."""


class Unbounded(ValueError):
    """Polyhedron has a recession direction."""


class SizeLimit(ValueError):
    """Problem exceeds the exhaustive-enumeration budget."""


@dataclass(frozen=True)
class Tolerances:
    primal: float = 1e-8
    dual: float = 1e-8
    pivot: float = 1e-13
    ratio: float = 1e-9
    cost: float = 1e-10
    max_iter: int = 100_000


DEFAULT_TOL = Tolerances()
UNBOUNDED_COST = 1e-7  # a ray is only reported for a clearly negative reduced cost


def _block(M, n):
    if M is None:
        return np.zeros((0, n))
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1) if M.size else np.zeros((0, n))
    return M


@dataclass
class LpProblem:
    c: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    E: np.ndarray | None = None
    f: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.G = _block(self.G, n)
        self.E = _block(self.E, n)
        self.h = np.asarray(self.h if self.h is not None else [], dtype=float).ravel()
        self.f = np.asarray(self.f if self.f is not None else [], dtype=float).ravel()
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).ravel().copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel().copy()
        if self.G.shape != (self.h.size, n) or self.E.shape != (self.f.size, n):
            raise ValueError("inconsistent LP dimensions")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound vectors must match the number of variables")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        for arr in (self.c, self.G, self.h, self.E, self.f):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")

    @property
    def n(self) -> int:
        return self.c.size

    def permuted(self, ineq_perm=None, eq_perm=None) -> "LpProblem":
        ip = np.arange(self.h.size) if ineq_perm is None else np.asarray(ineq_perm)
        ep = np.arange(self.f.size) if eq_perm is None else np.asarray(eq_perm)
        return LpProblem(self.c, self.G[ip], self.h[ip], self.E[ep], self.f[ep],
                         self.lb, self.ub, self.sense)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    value: float = float("nan")
    ineq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lb_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ub_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    active: tuple = ()
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def dual_value(p: LpProblem, s: LpSolution) -> float:
    lbt = np.where(np.isfinite(p.lb), p.lb, 0.0) @ s.lb_duals
    ubt = np.where(np.isfinite(p.ub), p.ub, 0.0) @ s.ub_duals
    val = -(p.h @ s.ineq_duals) - (p.f @ s.eq_duals) + lbt - ubt
    return float(-val if p.sense == "max" else val)


def kkt_residuals(p: LpProblem, s: LpSolution) -> dict:
    """Primal/dual feasibility, complementarity and gap of an optimal solution."""
    x = s.x
    sign = -1.0 if p.sense == "max" else 1.0
    stat = sign * p.c + p.G.T @ s.ineq_duals + p.E.T @ s.eq_duals + s.ub_duals - s.lb_duals
    slack = p.h - p.G @ x if p.h.size else np.zeros(0)
    lbs = np.where(np.isfinite(p.lb), x - p.lb, 0.0)
    ubs = np.where(np.isfinite(p.ub), p.ub - x, 0.0)
    prim = max(
        float(np.max(-slack, initial=0.0)),
        float(np.max(np.abs(p.E @ x - p.f), initial=0.0)),
        float(np.max(-lbs, initial=0.0)),
        float(np.max(-ubs, initial=0.0)),
    )
    dual = max(
        float(np.max(np.abs(stat), initial=0.0)),
        float(np.max(-s.ineq_duals, initial=0.0)),
        float(np.max(-s.lb_duals, initial=0.0)),
        float(np.max(-s.ub_duals, initial=0.0)),
    )
    comp = max(
        float(np.max(np.abs(s.ineq_duals * slack), initial=0.0)),
        float(np.max(np.abs(s.lb_duals * lbs), initial=0.0)),
        float(np.max(np.abs(s.ub_duals * ubs), initial=0.0)),
    )
    gap = abs(s.value - dual_value(p, s))
    return {"primal": prim, "dual": dual, "complementarity": comp, "gap": gap}


# -- canonicalisation ----------------------------------------------------

class _Canon:
    """z = offset + T w, w >= 0; rows A_std [w; s] = b with slacks on inequality rows."""

    def __init__(self, p: LpProblem):
        n = p.n
        cols, offset = [], np.zeros(n)
        ub_rows = []
        self.var_cols = []
        for j in range(n):
            lo, hi = p.lb[j], p.ub[j]
            if np.isfinite(lo):
                offset[j] = lo
                self.var_cols.append([(len(cols), 1.0)])
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    ub_rows.append((j, hi - lo))
            elif np.isfinite(hi):
                offset[j] = hi
                self.var_cols.append([(len(cols), -1.0)])
                cols.append((j, -1.0))
            else:
                self.var_cols.append([(len(cols), 1.0), (len(cols) + 1, -1.0)])
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        N = len(cols)
        T = np.zeros((n, N))
        for k, (j, sgn) in enumerate(cols):
            T[j, k] = sgn
        self.T, self.offset, self.N = T, offset, N
        Gb = p.G @ T
        hb = p.h - p.G @ offset
        if ub_rows:
            U = np.zeros((len(ub_rows), N))
            for r, (j, width) in enumerate(ub_rows):
                U[r, self.var_cols[j][0][0]] = 1.0
            Gb = np.vstack([Gb, U])
            hb = np.concatenate([hb, [w for _, w in ub_rows]])
        self.ub_rows = ub_rows
        Eb = p.E @ T
        fb = p.f - p.E @ offset
        self.mi, self.me = Gb.shape[0], Eb.shape[0]
        m = self.mi + self.me
        A = np.zeros((m, N + self.mi))
        A[:self.mi, :N] = Gb
        A[:self.mi, N:] = np.eye(self.mi)
        A[self.mi:, :N] = Eb
        b = np.concatenate([hb, fb])
        # row equilibration
        scale = np.max(np.abs(A), axis=1)
        scale[scale == 0] = 1.0
        A /= scale[:, None]
        b = b / scale
        sign = np.where(b < 0, -1.0, 1.0)
        A *= sign[:, None]
        b *= sign
        self.A, self.b, self.scale, self.sign = A, b, scale, sign
        cost = -p.c if p.sense == "max" else p.c
        self.cost = np.concatenate([T.T @ cost, np.zeros(self.mi)])


def _pivot(tab, basis, r, j):
    piv = tab[r, j]
    tab[r] /= piv
    col = tab[:, j].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = j


def _run_simplex(tab, basis, allowed, tol: Tolerances, it0=0):
    """Bland's-rule iterations on a tableau whose last row holds reduced costs."""
    m = tab.shape[0] - 1
    it = it0
    while True:
        red = tab[-1, :-1]
        cand = np.nonzero((red < -tol.cost) & allowed)[0]
        if cand.size == 0:
            return "optimal", it
        j = -1
        for c in cand:
            pos = tab[:m, c] > tol.ratio
            if np.any(pos):
                j = int(c)
                break
            if red[c] < -UNBOUNDED_COST:
                return "unbounded", it
            # otherwise a noise-level reduced cost on a column without pivots: skip it
        if j < 0:
            return "optimal", it
        col = tab[:m, j]
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
        r = int(min(ties, key=lambda i: basis[i]))
        if abs(tab[r, j]) < tol.pivot:
            raise NumericalBreakdown(f"pivot {tab[r, j]:.3e} below {tol.pivot:g}")
        _pivot(tab, basis, r, j)
        it += 1
        if it > tol.max_iter:
            raise NumericalBreakdown("iteration limit reached")
        if not np.all(np.isfinite(tab)):
            raise NumericalBreakdown("non-finite tableau entries")


def _phase_one(A, b, slack_start, mi, tol):
    """Returns (tableau, basis, kept_rows) or None when infeasible."""
    m, ncol = A.shape
    basis = np.full(m, -1)
    art_rows = []
    for i in range(m):
        if i < mi and A[i, slack_start + i] > 0:
            basis[i] = slack_start + i
        else:
            art_rows.append(i)
    na = len(art_rows)
    tab = np.zeros((m + 1, ncol + na + 1))
    tab[:m, :ncol] = A
    tab[:m, -1] = b
    for k, i in enumerate(art_rows):
        tab[i, ncol + k] = 1.0
        basis[i] = ncol + k
    # phase-one objective: sum of artificials, expressed in reduced form
    tab[-1, ncol:ncol + na] = 1.0
    for i in art_rows:
        tab[-1] -= tab[i]
    allowed = np.ones(ncol + na, dtype=bool)
    status, it = _run_simplex(tab, basis, allowed, tol)
    bscale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    if -tab[-1, -1] > tol.primal * bscale:
        return None, it
    # drive zero-level artificials out of the basis
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= ncol:
            row = tab[i, :ncol]
            cand = np.nonzero(np.abs(row) > tol.ratio)[0]
            if cand.size:
                _pivot(tab, basis, i, int(cand[0]))
            else:
                keep[i] = False
    return (tab, basis, keep), it


TALL_RATIO = 4
TALL_MIN_ROWS = 60


def solve(p: LpProblem, tol: Tolerances = DEFAULT_TOL) -> LpSolution:
    # tall problems (many rows, few variables) are far cheaper through the dual tableau
    rows = p.h.size + int(np.isfinite(p.lb).sum() + np.isfinite(p.ub).sum())
    if rows >= TALL_MIN_ROWS and rows > TALL_RATIO * (p.n + p.f.size):
        sol = _solve_via_dual(p, tol)
        if sol is not None:
            return sol
    return _solve_direct(p, tol)


def _solve_via_dual(p: LpProblem, tol: Tolerances):
    """Solve min g^T x, G'x <= h', Ex = f through its dual; None means "use the primal route"."""
    n = p.n
    g = -p.c if p.sense == "max" else p.c
    ub_idx = np.nonzero(np.isfinite(p.ub))[0]
    lb_idx = np.nonzero(np.isfinite(p.lb))[0]
    I = np.eye(n)
    Gp = np.vstack([p.G, I[ub_idx], -I[lb_idx]])
    hp = np.concatenate([p.h, p.ub[ub_idx], -p.lb[lb_idx]])
    ni, ne = hp.size, p.f.size
    dual = LpProblem(np.concatenate([hp, p.f]), E=np.hstack([Gp.T, p.E.T]), f=-g,
                     lb=np.concatenate([np.zeros(ni), np.full(ne, -np.inf)]))
    try:
        ds = _solve_direct(dual, tol)
    except NumericalBreakdown:
        return None
    if ds.status == UNBOUNDED:
        return LpSolution(INFEASIBLE, iterations=ds.iterations)
    if ds.status != OPTIMAL:
        return None
    x = -ds.eq_duals
    lam_all = np.maximum(ds.x[:ni], 0.0)
    nu = ds.x[ni:]
    scale = 1.0 + float(np.max(np.abs(hp), initial=0.0)) + float(np.max(np.abs(p.f), initial=0.0))
    if np.any(Gp @ x - hp > tol.primal * scale):
        return None
    if ne and np.max(np.abs(p.E @ x - p.f)) > tol.primal * scale:
        return None
    gap = abs(g @ x + ds.value)
    if gap > 1e-7 * (1.0 + abs(ds.value)):
        return None
    ng, nu_ = p.h.size, ub_idx.size
    mu_ub = np.zeros(n)
    mu_ub[ub_idx] = lam_all[ng:ng + nu_]
    mu_lb = np.zeros(n)
    mu_lb[lb_idx] = lam_all[ng + nu_:]
    slack = p.h - p.G @ x
    active = tuple(int(i) for i in np.nonzero(np.abs(slack) <= 1e-9 * (1.0 + np.abs(p.h)))[0])
    return LpSolution(OPTIMAL, x, float(p.c @ x), lam_all[:ng], nu, mu_lb, mu_ub, active, ds.iterations)


def _solve_direct(p: LpProblem, tol: Tolerances = DEFAULT_TOL) -> LpSolution:
    cn = _Canon(p)
    A, b = cn.A, cn.b
    m, ncol = A.shape
    if m == 0:
        # only bounds: optimum at a bound for each variable
        return _bounds_only(p, cn)
    res, it = _phase_one(A, b, cn.N, cn.mi, tol)
    if res is None:
        return LpSolution(INFEASIBLE, iterations=it)
    tab1, basis, keep = res
    rows = np.nonzero(keep)[0]
    tab = np.zeros((rows.size + 1, ncol + 1))
    tab[:-1, :ncol] = tab1[rows, :ncol]
    tab[:-1, -1] = tab1[rows, -1]
    basis = basis[rows].copy()
    tab[-1, :ncol] = cn.cost
    for i, j in enumerate(basis):
        tab[-1] -= cn.cost[j] * tab[i]
    status, it = _run_simplex(tab, basis, np.ones(ncol, dtype=bool), tol, it)
    if status == "unbounded":
        return LpSolution(UNBOUNDED, iterations=it)
    return _finish(p, cn, rows, basis, it, tol)


def _bounds_only(p, cn):
    cost = cn.cost[:cn.N]
    if np.any(cost < 0):
        return LpSolution(UNBOUNDED)
    w = np.zeros(cn.N)
    x = cn.offset + cn.T @ w
    sign = -1.0 if p.sense == "max" else 1.0
    g = sign * p.c
    lbd = np.where(np.isfinite(p.lb), np.maximum(g, 0.0), 0.0)
    ubd = np.where(np.isfinite(p.ub) & ~np.isfinite(p.lb), np.maximum(-g, 0.0), 0.0)
    val = float(p.c @ x)
    return LpSolution(OPTIMAL, x, val, np.zeros(0), np.zeros(0), lbd, ubd, ())


def _finish(p, cn, rows, basis, it, tol):
    A = cn.A[rows]
    b = cn.b[rows]
    B = A[:, basis]
    try:
        xb = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, cn.cost[basis])
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("final basis is singular") from exc
    xb[np.abs(xb) < 1e-14] = 0.0
    if np.any(xb < -1e-7 * max(1.0, np.max(np.abs(b), initial=0.0))):
        raise NumericalBreakdown("recomputed basic solution is infeasible")
    wfull = np.zeros(A.shape[1])
    wfull[basis] = np.maximum(xb, 0.0)
    x = cn.offset + cn.T @ wfull[:cn.N]
    yfull = np.zeros(cn.A.shape[0])
    yfull[rows] = y
    yorig = yfull * cn.sign / cn.scale
    lam_all = -yorig[:cn.mi]
    nu = -yorig[cn.mi:]
    ng = p.h.size
    lam = np.maximum(lam_all[:ng], 0.0)
    lam_ub_rows = np.maximum(lam_all[ng:], 0.0)
    sign = -1.0 if p.sense == "max" else 1.0
    g = sign * p.c + p.G.T @ lam + p.E.T @ nu
    n = p.n
    mu_ub = np.zeros(n)
    for r, (j, _) in enumerate(cn.ub_rows):
        mu_ub[j] = lam_ub_rows[r]
    mu_lb = np.zeros(n)
    for j in range(n):
        lo, hi = np.isfinite(p.lb[j]), np.isfinite(p.ub[j])
        if lo:
            mu_lb[j] = max(g[j] + mu_ub[j], 0.0)
        elif hi:
            mu_ub[j] = max(-g[j], 0.0)
    value = float(p.c @ x)
    slack = p.h - p.G @ x
    active = tuple(int(i) for i in np.nonzero(np.abs(slack) <= 1e-9 * (1.0 + np.abs(p.h)))[0])
    return LpSolution(OPTIMAL, x, value, lam, nu, mu_lb, mu_ub, active, it)


def feasible(p: LpProblem, tol: Tolerances = DEFAULT_TOL):
    """Phase-one feasibility test; returns (ok, witness or None)."""
    q = LpProblem(np.zeros(p.n), p.G, p.h, p.E, p.f, p.lb, p.ub, "min")
    sol = solve(q, tol)
    if sol.status != OPTIMAL:
        return False, None
    return True, sol.x


def to_text(p: LpProblem, names=None) -> str:
    """Human-readable listing of an LP, used in failure reports."""
    names = names or [f"z{j}" for j in range(p.n)]

    def expr(row):
        terms = [f"{v:+.6g}*{names[j]}" for j, v in enumerate(row) if v != 0]
        return " ".join(terms) if terms else "0"

    lines = [f"{p.sense} {expr(p.c)}", "subject to"]
    for i in range(p.h.size):
        lines.append(f"  r{i}: {expr(p.G[i])} <= {p.h[i]:.17g}")
    for i in range(p.f.size):
        lines.append(f"  e{i}: {expr(p.E[i])} = {p.f[i]:.17g}")
    for j in range(p.n):
        lo, hi = p.lb[j], p.ub[j]
        if np.isfinite(lo) or np.isfinite(hi):
            lines.append(f"  {lo:.17g} <= {names[j]} <= {hi:.17g}")
    return "\n".join(lines) + "\n"


# -- vertex enumeration --------------------------------------------------

MAX_VERTEX_DIM = 8
MAX_VERTEX_ROWS = 40
MAX_VERTEX_COMBOS = 2_000_000


def is_bounded(G, h) -> bool:
    """True when {z: Gz <= h} has no recession direction (assumes non-empty)."""
    G = np.asarray(G, dtype=float)
    d = G.shape[1]
    for i in range(d):
        for sgn in (1.0, -1.0):
            c = np.zeros(d)
            c[i] = sgn
            sol = solve(LpProblem(c, G, np.zeros(G.shape[0]), lb=-np.ones(d), ub=np.ones(d), sense="max"))
            if sol.optimal and sol.value > 1e-9:
                return False
    return True


def dedup_points(pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if len(pts) == 0:
        return pts
    pts = pts[np.lexsort(pts.T[::-1])]
    out = []
    lo = 0  # kept points are sorted by first coordinate; only a window can match
    for p in pts:
        while lo < len(out) and out[lo][0] < p[0] - tol:
            lo += 1
        if lo < len(out) and np.any(np.max(np.abs(np.array(out[lo:]) - p), axis=1) <= tol):
            continue
        out.append(p)
    return np.array(out)


def enumerate_vertices(G, h, tol: float = 1e-9) -> np.ndarray:
    """All vertices of the bounded polyhedron {z: Gz <= h}, lexicographically sorted."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    rows, d = G.shape
    if d > MAX_VERTEX_DIM or rows > MAX_VERTEX_ROWS:
        raise SizeLimit(f"vertex enumeration limited to d <= {MAX_VERTEX_DIM}, rows <= {MAX_VERTEX_ROWS}")
    ok, _ = feasible(LpProblem(np.zeros(d), G, h))
    if not ok:
        return np.zeros((0, d))
    if not is_bounded(G, h):
        raise Unbounded("polyhedron is unbounded")
    combos = np.array(list(itertools.combinations(range(rows), d)), dtype=int)
    if len(combos) > MAX_VERTEX_COMBOS:
        raise SizeLimit("too many active-set combinations")
    found = []
    scale = 1.0 + np.abs(h)
    for start in range(0, len(combos), 20000):
        cb = combos[start:start + 20000]
        Gs = G[cb]
        hs = h[cb]
        det = np.linalg.det(Gs)
        norms = np.prod(np.linalg.norm(Gs, axis=2), axis=1)
        good = np.abs(det) > 1e-10 * np.maximum(norms, 1e-300)
        if not np.any(good):
            continue
        z = np.linalg.solve(Gs[good], hs[good][..., None])[..., 0]
        feas = np.all(G @ z.T <= (h + tol * scale)[:, None], axis=0)
        found.append(z[feas])
    if not found:
        return np.zeros((0, d))
    pts = np.vstack(found) + 0.0
    return dedup_points(pts, tol)
