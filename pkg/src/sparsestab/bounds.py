"""Hoffman/Robinson constants, the constant c, and stability-bound evaluators."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import nnls

from . import lp
from .geometry import Polytope, project
from .numerics import Stream
from .numerics import (
    as_matrix,
    as_vector,
    best_k_term_error,
    gram_solve,
    induced_norm_inf_to_1,
    norm,
    numerical_rank,
)

EXACT = "ExactTiny"
SAMPLED = "SampledLowerBound"
MAX_EXACT_ROWS = 10
MAX_EXACT_VARS = 5
MAX_EXACT_COMBOS = 400_000
MAX_SIGMA_ROWS = 6
MAX_C_SUBSETS = 10_000

BOUND_IDS = ("T3.2-INQ-AA", "T3.2-INQ-new", "C3.4-E2", "T4.5-ll2", "T4.5-45",
             "T5.3-l2", "T5.3-1616", "C5.4-FFNN")


class EmptyPolyhedron(ValueError):
    pass


class NoInvertibleSubmatrix(ValueError):
    pass


class MissingConstant(ValueError):
    pass


@dataclass
class RobinsonEstimate:
    value: float
    mode: str
    certificate: dict = field(default_factory=dict)
    samples: int = 0

    def to_dict(self):
        return {"value": self.value, "mode": self.mode, "samples": self.samples,
                "certificate": {k: np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
                                for k, v in self.certificate.items()}}


# -- inner problem: min ||u||_inf s.t. M'u <= d', M''u = d'' ----------------------

def min_inf_norm(Mp, Mpp, dp, dpp):
    q = Mp.shape[1] if Mp.size else Mpp.shape[1]
    p1, p2 = Mp.shape[0], Mpp.shape[0]
    c = np.zeros(q + 1)
    c[-1] = 1.0
    I = np.eye(q)
    one = np.ones((q, 1))
    G = np.vstack([np.hstack([I, -one]), np.hstack([-I, -one]), np.hstack([Mp, np.zeros((p1, 1))])])
    h = np.concatenate([np.zeros(2 * q), dp])
    E = np.hstack([Mpp, np.zeros((p2, 1))]) if p2 else None
    sol = lp.solve(lp.LpProblem(c, G, h, E, dpp if p2 else None))
    if not sol.optimal:
        return math.inf, None
    return sol.value, sol.x[:q]


def _cone_generators(Mp, Mpp):
    p1, p2 = Mp.shape[0], Mpp.shape[0]
    top = np.hstack([Mp, -Mp, np.eye(p1)])
    bottom = np.hstack([Mpp, -Mpp, np.zeros((p2, p1))])
    return np.vstack([top, bottom])


def project_feasible_rhs(Mp, Mpp, g):
    """Euclidean projection onto the cone of right-hand sides that admit a solution."""
    G = _cone_generators(Mp, Mpp)
    if G.shape[1] == 0:
        return np.zeros_like(g)
    coef, _ = nnls(G, g, maxiter=50 * G.shape[1])
    return G @ coef


def _shape(Mp, Mpp, q=None):
    Mp = np.zeros((0, q or 0)) if Mp is None else np.atleast_2d(np.asarray(Mp, dtype=float))
    Mpp = np.zeros((0, Mp.shape[1])) if Mpp is None else np.atleast_2d(np.asarray(Mpp, dtype=float))
    if Mp.shape[0] == 0:
        Mp = np.zeros((0, Mpp.shape[1]))
    if Mpp.shape[0] == 0:
        Mpp = np.zeros((0, Mp.shape[1]))
    if Mp.shape[1] != Mpp.shape[1]:
        raise ValueError("M' and M'' need the same number of columns")
    return Mp, Mpp


def _dual_points(Mp, Mpp):
    """Basic solutions of the lifted dual; their (-lambda, nu) images include every extreme point."""
    p1, q = Mp.shape
    p2 = Mpp.shape[0]
    if p2:
        U, s, _ = np.linalg.svd(Mpp, full_matrices=False)
        r = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
        B = U[:, :r]
    else:
        B, r = np.zeros((0, 0)), 0
    Theta = Mpp.T @ B
    nonneg = np.vstack([np.hstack([-Mp.T, np.eye(q), -np.eye(q)]),
                        np.concatenate([np.zeros(p1), np.ones(2 * q)])[None, :]])
    free = np.vstack([Theta, np.zeros((1, r))])
    rhs = np.zeros(q + 1)
    rhs[-1] = 1.0
    pick = q + 1 - r
    ncols = nonneg.shape[1]
    combos = math.comb(ncols, pick)
    if combos > MAX_EXACT_COMBOS:
        raise lp.SizeLimit(f"{combos} bases exceed the exact enumeration cap")
    out = []
    for chunk in _chunks(itertools.combinations(range(ncols), pick), 20_000):
        idx = np.array(chunk, dtype=int)
        mats = np.concatenate([np.broadcast_to(free, (len(idx),) + free.shape),
                               np.transpose(nonneg[:, idx], (1, 0, 2))], axis=2)
        det = np.abs(np.linalg.det(mats))
        good = det > 1e-12
        if not np.any(good):
            continue
        sol = np.linalg.solve(mats[good], np.broadcast_to(rhs, (int(good.sum()), q + 1))[..., None])[..., 0]
        ok = np.all(sol[:, r:] >= -1e-10, axis=1)
        for row, cols in zip(sol[ok], idx[good][ok]):
            theta = row[:r]
            lam = np.zeros(p1)
            for val, col in zip(row[r:], cols):
                if col < p1:
                    lam[col] = max(val, 0.0)
            out.append(np.concatenate([-lam, B @ theta]))
    if not out:
        return np.zeros((0, p1 + p2))
    return lp.dedup_points(np.array(out), 1e-10)


def _chunks(it, size):
    buf = []
    for item in it:
        buf.append(item)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf


def _exact_mu(Mp, Mpp):
    p1, p2 = Mp.shape[0], Mpp.shape[0]
    if p1 + p2 == 0:
        return 0.0, {}
    best, arg = 0.0, None
    for g in _dual_points(Mp, Mpp):
        pg = project_feasible_rhs(Mp, Mpp, g)
        val = float(np.linalg.norm(pg))
        if val > best:
            best, arg = val, pg
    cert = {}
    if arg is not None:
        d = arg / best
        _, u = min_inf_norm(Mp, Mpp, d[:p1], d[p1:])
        cert = {"d": d, "u": u}
    return best, cert


def _nearest_feasible_rhs(Mp, Mpp, d):
    """l1-nearest right-hand side that admits a solution (LP)."""
    p1, q = Mp.shape
    p2 = Mpp.shape[0]
    P = p1 + p2
    # variables: u (q, free), s (p1), e+ (P), e- (P)
    c = np.concatenate([np.zeros(q + p1), np.ones(2 * P)])
    top = np.hstack([Mp, np.eye(p1), -np.eye(P)[:p1], np.eye(P)[:p1]])
    bottom = np.hstack([Mpp, np.zeros((p2, p1)), -np.eye(P)[p1:], np.eye(P)[p1:]])
    E = np.vstack([top, bottom])
    lb = np.concatenate([np.full(q, -np.inf), np.zeros(p1 + 2 * P)])
    sol = lp.solve(lp.LpProblem(c, E=E, f=d, lb=lb))
    u, s = sol.x[:q], sol.x[q:q + p1]
    return np.concatenate([Mp @ u + s, Mpp @ u])


def _sampled_mu(Mp, Mpp, samples, rng):
    p1, p2 = Mp.shape[0], Mpp.shape[0]
    P = p1 + p2
    if P == 0:
        return 0.0, {}
    best, cert = 0.0, {}
    dirs = list(np.eye(P)) + list(-np.eye(P)) + list(rng.normal((samples, P)))
    for raw in dirs:
        d = _nearest_feasible_rhs(Mp, Mpp, raw)
        nd = np.linalg.norm(d)
        if nd < 1e-12:
            continue
        d = d / nd
        val, u = min_inf_norm(Mp, Mpp, d[:p1], d[p1:])
        if np.isfinite(val) and val > best:
            best, cert = val, {"d": d, "u": u}
    return best, cert


def hoffman_mu(Mp, Mpp, mode: str = EXACT, samples: int = 200, seed: int = 0,
               strict: bool = True) -> RobinsonEstimate:
    Mp, Mpp = _shape(Mp, Mpp)
    if mode == EXACT:
        rows, cols = Mp.shape[0] + Mpp.shape[0], Mp.shape[1]
        if strict and (rows > MAX_EXACT_ROWS or cols > MAX_EXACT_VARS):
            raise lp.SizeLimit("exact mode needs <= 10 rows and <= 5 variables")
        val, cert = _exact_mu(Mp, Mpp)
        return RobinsonEstimate(val, EXACT, cert, 0)
    if mode == SAMPLED:
        val, cert = _sampled_mu(Mp, Mpp, samples, Stream(seed))
        return RobinsonEstimate(val, SAMPLED, cert, samples)
    raise ValueError(f"unknown mode {mode!r}")


def robinson_pair(M1, M2, S):
    """The (M', M'') pair whose Hoffman constant enters the max over row subsets S."""
    m1, ell = M1.shape
    m2 = M2.shape[0]
    I = np.eye(m1)
    Mp = np.vstack([np.hstack([I[list(S)], np.zeros((len(S), m2))]), np.hstack([-I, np.zeros((m1, m2))])])
    Mpp = np.vstack([M1, M2]).T
    return Mp, Mpp


def robinson_sigma(M1, M2, mode: str = EXACT, samples: int = 200, seed: int = 0) -> RobinsonEstimate:
    M1 = np.zeros((0, np.shape(M2)[1])) if M1 is None or np.size(M1) == 0 else np.atleast_2d(np.asarray(M1, float))
    M2 = np.zeros((0, M1.shape[1])) if M2 is None or np.size(M2) == 0 else np.atleast_2d(np.asarray(M2, float))
    m1 = M1.shape[0]
    if mode == EXACT and m1 > MAX_SIGMA_ROWS:
        raise lp.SizeLimit(f"exact mode needs m1 <= {MAX_SIGMA_ROWS}")
    best = RobinsonEstimate(0.0, mode, {}, 0)
    for size in range(m1 + 1):
        for S in itertools.combinations(range(m1), size):
            Mp, Mpp = robinson_pair(M1, M2, S)
            est = hoffman_mu(Mp, Mpp, mode, samples, seed, strict=False)
            if est.value > best.value or not best.certificate:
                best = RobinsonEstimate(est.value, mode, dict(est.certificate, S=list(S)), est.samples)
    return best


def hoffman_residual(M1, M2, d1, d2, x) -> float:
    r1 = np.maximum(M1 @ x - d1, 0.0) if M1.size else np.zeros(0)
    r2 = M2 @ x - d2 if M2.size else np.zeros(0)
    return float(np.abs(r1).sum() + np.abs(r2).sum())


def verify_hoffman_lemma(M1, M2, d1, d2, probes: int = 1000, seed: int = 0, sigma: float | None = None,
                         scale: float = 3.0) -> dict:
    M1 = np.atleast_2d(np.asarray(M1, float)) if M1 is not None and np.size(M1) else None
    M2 = np.atleast_2d(np.asarray(M2, float)) if M2 is not None and np.size(M2) else None
    ell = (M1 if M1 is not None else M2).shape[1]
    M1 = np.zeros((0, ell)) if M1 is None else M1
    M2 = np.zeros((0, ell)) if M2 is None else M2
    d1 = np.asarray(d1 if d1 is not None else [], float).ravel()
    d2 = np.asarray(d2 if d2 is not None else [], float).ravel()
    ok, _ = lp.feasible(lp.LpProblem(np.zeros(ell), M1, d1, M2 if M2.size else None, d2 if M2.size else None))
    if not ok:
        raise EmptyPolyhedron("the linear system has no solution")
    if sigma is None:
        sigma = robinson_sigma(M1, M2, EXACT).value
    P = Polytope(M1, d1, M2 if M2.size else None, d2 if M2.size else None)
    rng = Stream(seed)
    worst_ratio, min_slack, failures = 0.0, math.inf, 0
    for _ in range(probes):
        x = scale * rng.normal(ell)
        xs = project(P, x)
        lhs = float(np.linalg.norm(x - xs))
        res = hoffman_residual(M1, M2, d1, d2, x)
        slack = sigma * res - lhs
        min_slack = min(min_slack, slack)
        if slack < -1e-7:
            failures += 1
        if res > 1e-12:
            worst_ratio = max(worst_ratio, lhs / res)
    return {"sigma": sigma, "probes": probes, "worst_ratio": worst_ratio, "min_slack": min_slack,
            "failures": failures, "holds": failures == 0 and worst_ratio <= sigma + 1e-9}


# -- constant c ----------------------------------------------------------------

def constant_c(M, A) -> float:
    M, A = as_matrix(M), as_matrix(A)
    m, q = M.shape
    if A.shape[1] > 24:
        raise lp.SizeLimit("n exceeds the induced-norm cap")
    if math.comb(q, m) > MAX_C_SUBSETS:
        raise lp.SizeLimit(f"C({q},{m}) exceeds {MAX_C_SUBSETS}")
    core = gram_solve(A, A)
    best, found = 0.0, False
    for G in itertools.combinations(range(q), m):
        MG = M[:, G]
        if numerical_rank(MG) < m:
            continue
        found = True
        best = max(best, induced_norm_inf_to_1(np.linalg.solve(MG, core)))
    if not found:
        raise NoInvertibleSubmatrix("M has no invertible m x m submatrix")
    return best


# -- bound evaluation -------------------------------------------------------------

@dataclass
class BoundReport:
    theorem: str
    constants: dict
    rhs: float
    rhs_tight: float
    error: float
    satisfied: bool
    ratio: float
    kernel: float
    offset: float

    def to_dict(self):
        return asdict(self)


def bound_rhs(theorem: str, K: dict):
    """(rhs, tighter intermediate rhs, additive offset, gamma-free kernel) from stored constants."""
    g, c, sk = K["gamma"], K.get("c"), K["sigma_k"]

    def need(*names):
        for nm in names:
            if K.get(nm) is None:
                raise MissingConstant(f"{theorem} needs {nm}")

    if theorem == "T3.2-INQ-AA":
        need("c", "tau", "alpha")
        a, tau = K["alpha"], K["tau"]
        viol = max(a * K["res_inf"] + (1 - a) * K["res_one"] - tau, 0.0)
        kern = viol + 2 * sk + c * (tau + K["res_inf"])
        return g * kern, g * kern, 0.0, kern
    if theorem in ("T3.2-INQ-new", "C3.4-E2"):
        need("c", "tau")
        tau = K["tau"]
        tight = g * (2 * sk + c * tau + c * K["res_inf"])
        kern = 2 * (sk + c * tau)
        return g * kern, tight, 0.0, kern
    if theorem == "T4.5-ll2":
        need("c", "tau", "delta", "nhat")
        tau, phi = K["tau"], K["res_phi"]
        kern = 2 * (K["nhat"] * max(phi - tau, 0.0) + 2 * sk + c * tau + c * phi)
        return K["delta"] + g * kern, K["delta"] + g * kern, K["delta"], kern
    if theorem == "T4.5-45":
        need("c", "tau", "delta")
        tau, phi = K["tau"], K["res_phi"]
        tight = K["delta"] + 2 * g * (2 * sk + c * tau + c * phi)
        kern = 4 * (sk + c * tau)
        return K["delta"] + g * kern, tight, K["delta"], kern
    if theorem in ("T5.3-l2", "T5.3-1616"):
        need("c", "mu", "delta")
        mu, l1, phi = K["mu"], K["l1"], K["res_phi"]
        over = max(l1 - mu, 0.0) if theorem == "T5.3-l2" else 0.0
        kern = 2 * (over + 2 * phi + (abs(mu - l1) + 2 * sk) / c)
        return K["delta"] + g * kern, K["delta"] + g * kern, K["delta"], kern
    if theorem == "C5.4-FFNN":
        need("c", "delta")
        kern = 4 * (K["res_phi"] + sk / c)
        return K["delta"] + g * kern, K["delta"] + g * kern, K["delta"], kern
    raise ValueError(f"unknown bound {theorem!r}")


def nearest_solution(inst, solve, xhat):
    """Projection of xhat onto the optimal set when it is polyhedral, else the solver output."""
    from .solvers import ds_solution_set

    if solve.kind.startswith("linear") or solve.kind.endswith("(linear)") or solve.kind.endswith("(equality)"):
        return project(ds_solution_set(inst, solve.value), xhat)
    return solve.xstar


def bound_constants(theorem, inst, xhat, k, gamma, c=None, delta=None, nhat=None):
    xhat = as_vector(xhat)
    r = inst.residual(xhat)
    g_val = gamma.value if isinstance(gamma, RobinsonEstimate) else gamma
    if g_val is None:
        raise MissingConstant("gamma is required")
    mode = gamma.mode if isinstance(gamma, RobinsonEstimate) else "empirical"
    if c is None:
        c = constant_c(inst.M, inst.A)
    return {"gamma": float(g_val), "gamma_mode": mode, "c": float(c), "sigma_k": best_k_term_error(xhat, k),
            "k": k, "tau": inst.tau, "mu": inst.mu, "alpha": inst.alpha, "delta": delta, "nhat": nhat,
            "res_inf": float(np.abs(r).max()), "res_one": float(np.abs(r).sum()),
            "res_phi": norm(r, inst.phi), "l1": float(np.abs(xhat).sum())}


def evaluate_bound(theorem, inst, xhat, solve, k: int, gamma, extras: dict | None = None) -> BoundReport:
    extras = dict(extras or {})
    if theorem not in BOUND_IDS:
        raise ValueError(f"unknown bound {theorem!r}")
    nhat = extras.get("nhat", solve.halfspace_count if solve is not None and solve.polytope is not None else None)
    K = bound_constants(theorem, inst, xhat, k, gamma, extras.get("c"), extras.get("delta"), nhat)
    rhs, tight, offset, kern = bound_rhs(theorem, K)
    xs = extras.get("xstar")
    if xs is None:
        if solve is None:
            raise MissingConstant("need a solver result or an explicit nearby solution")
        xs = nearest_solution(inst, solve, xhat)
    err = float(np.linalg.norm(as_vector(xhat) - as_vector(xs)))
    ratio = err / rhs if rhs > 0 else (0.0 if err == 0 else math.inf)
    return BoundReport(theorem, K, rhs, tight, err, err <= rhs * (1 + 1e-9) + 1e-12, ratio, kern, offset)


def recompute_rhs(report: BoundReport) -> float:
    return bound_rhs(report.theorem, report.constants)[0]


def kernel_ratio(error: float, kernel: float, offset: float = 0.0) -> float:
    excess = max(error - offset, 0.0)
    if excess == 0.0:
        return 0.0
    return excess / kernel if kernel > 0 else math.inf


def empirical_gamma(reports) -> tuple[float, int]:
    """Running max of error / kernel over bound reports; returns (value, argmax index)."""
    best, arg = 0.0, -1
    for i, rep in enumerate(reports):
        r = kernel_ratio(rep.error, rep.kernel, rep.offset)
        if r > best:
            best, arg = r, i
    return best, arg
