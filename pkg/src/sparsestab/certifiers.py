"""Exhaustive certifiers for range-space, null-space, RIP and coherence conditions."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .numerics import Stream, as_matrix, symmetric_eigs

MAX_PATTERN_COLUMNS = 16
MAX_NULL_DIM = 12
MAX_RIP_SUBSETS = 100_000
STRICT_GAP = 1e-6
NSP_MARGIN = 1e-9
RIP_THRESHOLD = 1 / math.sqrt(2)
ROBUST_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


class PatternMissing(ValueError):
    """No failing sign pattern is available for the necessity experiment."""


@dataclass
class CertificateReport:
    prop: str
    k: int
    holds: bool
    certificates: list = field(default_factory=list)
    counterexample: dict | None = None
    patterns: int = 0
    value: float | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(obj):
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items()}
            if isinstance(obj, (list, tuple)):
                return [clean(v) for v in obj]
            if isinstance(obj, np.ndarray):
                return obj.tolist()
            if isinstance(obj, (np.floating, np.integer)):
                return obj.item()
            return obj

        return clean({"property": self.prop, "k": self.k, "holds": self.holds,
                      "patterns": self.patterns, "value": self.value,
                      "certificates": self.certificates, "counterexample": self.counterexample,
                      "notes": self.notes})


def sign_patterns(n: int, k: int):
    """Disjoint (S1, S2) with |S1| + |S2| <= k, ordered by (size, S1, S2)."""
    out = []
    for size in range(min(k, n) + 1):
        for support in itertools.combinations(range(n), size):
            for r in range(size + 1):
                for S1 in itertools.combinations(support, r):
                    S2 = tuple(i for i in support if i not in S1)
                    out.append((S1, S2))
    out.sort(key=lambda p: (len(p[0]) + len(p[1]), p[0], p[1]))
    return out


def pattern_count(n: int, k: int) -> int:
    return sum(math.comb(n, j) * 2**j for j in range(min(k, n) + 1))


def _pattern_lp(A, S1, S2, bound):
    m, n = A.shape
    S = list(S1) + list(S2)
    off = [i for i in range(n) if i not in S]
    E = A[:, S].T
    f = np.concatenate([np.ones(len(S1)), -np.ones(len(S2))])
    Aoff = A[:, off].T
    G = np.vstack([Aoff, -Aoff])
    h = np.full(2 * len(off), bound)
    return lp.LpProblem(np.zeros(m), G, h, E if S else None, f if S else None)


def check_range_certificate(A, S1, S2, u, bound=1.0, tol=1e-8) -> bool:
    zeta = A.T @ np.asarray(u, dtype=float)
    S = set(S1) | set(S2)
    off = [i for i in range(A.shape[1]) if i not in S]
    return bool(np.all(np.abs(zeta[list(S1)] - 1) <= tol) and np.all(np.abs(zeta[list(S2)] + 1) <= tol)
                and np.all(np.abs(zeta[off]) <= bound + tol))


def _range_property(A, k, bound, name, stop_at_first=True) -> CertificateReport:
    A = as_matrix(A)
    n = A.shape[1]
    if n > MAX_PATTERN_COLUMNS:
        raise lp.SizeLimit(f"{n} columns exceeds the cap of {MAX_PATTERN_COLUMNS}")
    if k > n:
        raise ValueError("k must not exceed n")
    certs, counter, examined = [], None, 0
    for S1, S2 in sign_patterns(n, k):
        examined += 1
        ok, u = lp.feasible(_pattern_lp(A, S1, S2, bound))
        if ok and check_range_certificate(A, S1, S2, u, bound):
            certs.append({"S1": list(S1), "S2": list(S2), "u": u, "zeta": A.T @ u})
        else:
            counter = {"S1": list(S1), "S2": list(S2)}
            if stop_at_first:
                break
    return CertificateReport(name, k, counter is None, certs if counter is None else [], counter, examined,
                             notes={"off_support_bound": bound})


def weak_rsp(A, k: int) -> CertificateReport:
    return _range_property(A, k, 1.0, "weak-rsp")


def rsp(A, k: int, strictgap: float = STRICT_GAP) -> CertificateReport:
    return _range_property(A, k, 1.0 - strictgap, "rsp")


def null_basis(A) -> np.ndarray:
    A = as_matrix(A)
    _, s, vt = np.linalg.svd(A)
    r = int(np.sum(s > 1e-10 * s[0]))
    return vt[r:].T


def _nsp_value(N, S):
    """max ||z_S||_1 over z in range(N) with ||z_off||_1 <= 1; returns (value, maximiser or ray)."""
    n, d = N.shape
    S = list(S)
    off = [i for i in range(n) if i not in S]
    NS, No = N[S], N[off]
    # a null vector vanishing off S makes the ratio infinite
    if off:
        _, s, vt = np.linalg.svd(No)
        r = int(np.sum(s > 1e-10 * max(s.max(initial=0.0), 1e-300)))
        ker = vt[r:].T
    else:
        ker = np.eye(d)
    if ker.shape[1] and np.linalg.norm(NS @ ker) > 1e-9:
        j = int(np.argmax(np.linalg.norm(NS @ ker, axis=0)))
        z = N @ ker[:, j]
        return math.inf, z / np.abs(z).sum()
    best, arg = -math.inf, None
    no = len(off)
    for signs in itertools.product((1.0, -1.0), repeat=max(len(S) - 1, 0)):
        s = np.concatenate([[1.0], signs]) if S else np.zeros(0)
        # variables theta (d, free), r (no, >= 0)
        c = np.concatenate([s @ NS, np.zeros(no)])
        G = np.vstack([np.hstack([No, -np.eye(no)]), np.hstack([-No, -np.eye(no)]),
                       np.concatenate([np.zeros(d), np.ones(no)])[None, :]])
        h = np.concatenate([np.zeros(2 * no), [1.0]])
        lb = np.concatenate([np.full(d, -np.inf), np.zeros(no)])
        sol = lp.solve(lp.LpProblem(c, G, h, lb=lb, sense="max"))
        if sol.status == lp.UNBOUNDED:
            return math.inf, None
        if sol.value > best:
            best, arg = sol.value, N @ sol.x[:d]
    return best, arg


def nsp(A, k: int, variant: str = "plain", probes: int = 2000, seed: int = 7) -> CertificateReport:
    A = as_matrix(A)
    m, n = A.shape
    if n - m > MAX_NULL_DIM:
        raise lp.SizeLimit(f"null-space dimension {n - m} exceeds {MAX_NULL_DIM}")
    if k > n:
        raise ValueError("k must not exceed n")
    variant = variant.lower()
    N = null_basis(A)
    worst, worst_S, worst_z, examined = 0.0, None, None, 0
    if k > 0 and N.shape[1] > 0:
        # the ratio only grows with S, so |S| = k suffices
        for S in itertools.combinations(range(n), k):
            examined += 1
            v, z = _nsp_value(N, S)
            if v > worst:
                worst, worst_S, worst_z = v, S, z
            if variant == "plain" and worst >= 1 - NSP_MARGIN:
                break
    counter = None
    if worst >= 1 - NSP_MARGIN:
        counter = {"S": list(worst_S), "zeta": worst_z, "ratio": worst}
    if variant == "plain":
        return CertificateReport("nsp", k, counter is None, [], counter, examined, worst if counter is None else None)
    if variant == "stable":
        return CertificateReport("stable-nsp", k, worst < 1, [], counter, examined, worst)
    if variant == "robust":
        return _robust_nsp(A, k, worst, counter, examined, probes, seed)
    raise ValueError(f"unknown variant {variant!r}")


def _robust_nsp(A, k, stable_const, counter, examined, probes, seed):
    m, n = A.shape
    Z = Stream(seed).normal((probes, n))
    R = np.linalg.norm(Z @ A.T, axis=1)
    mags = np.sort(np.abs(Z), axis=1)[:, ::-1]
    head = mags[:, :k].sum(axis=1)
    tail = mags[:, k:].sum(axis=1)
    for rho1 in ROBUST_GRID:
        if rho1 <= stable_const:
            continue
        rho2 = float(np.max(np.maximum(head - rho1 * tail, 0.0) / R))
        return CertificateReport("robust-nsp", k, True, [], None, examined, rho1,
                                 notes={"rho1": rho1, "rho2_estimate": rho2, "probes": probes,
                                        "stable_constant": stable_const, "residual_norm": "l2"})
    return CertificateReport("robust-nsp", k, False, [], counter, examined, None,
                             notes={"stable_constant": stable_const})


def rip_delta(A, k: int) -> float:
    A = as_matrix(A)
    n = A.shape[1]
    if k <= 0:
        return 0.0
    if k > n:
        raise ValueError("k must not exceed n")
    if math.comb(n, k) > MAX_RIP_SUBSETS:
        raise lp.SizeLimit(f"C({n},{k}) exceeds {MAX_RIP_SUBSETS}")
    G = A.T @ A
    worst = 0.0
    for S in itertools.combinations(range(n), k):
        ev = symmetric_eigs(G[np.ix_(S, S)])
        worst = max(worst, ev[-1] - 1.0, 1.0 - ev[0])
    return float(worst)


def rip_gate(A, k: int) -> bool:
    return rip_delta(A, 2 * k) < RIP_THRESHOLD


def normalize_columns(A):
    A = as_matrix(A)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero column")
    rescaled = bool(np.max(np.abs(norms - 1.0)) > 1e-12)
    return A / norms, rescaled


def mutual_coherence_mu1(A, k: int) -> float:
    An, _ = normalize_columns(A)
    if k <= 0:
        return 0.0
    G = np.abs(An.T @ An)
    np.fill_diagonal(G, -np.inf)
    top = -np.sort(-G, axis=1)[:, :k]
    top[~np.isfinite(top)] = 0.0
    return float(top.sum(axis=1).max())


def coherence_gate(A, k: int) -> bool:
    return mutual_coherence_mu1(A, k) + mutual_coherence_mu1(A, k - 1) < 1.0


# -- necessity experiment -------------------------------------------------------

def necessity_probe(A, k: int, taus, pattern=None, report: CertificateReport | None = None,
                    floor: float | None = None) -> dict:
    """Realise a failing sign pattern as x_hat, solve with y = A x_hat, and measure how far x_hat is
    from the optimal set.  Success means the error stays above ``floor`` (default 0.1 min |x_hat_i|)."""
    from .geometry import project
    from .numerics import MixedInfOne
    from .solvers import Instance, ds_solution_set, solve_ds_linear

    A = as_matrix(A)
    n = A.shape[1]
    if pattern is None:
        report = report or weak_rsp(A, k)
        if report.holds or report.counterexample is None:
            raise PatternMissing("weak RSP holds, there is no failing pattern to realise")
        pattern = (report.counterexample["S1"], report.counterexample["S2"])
    S1, S2 = pattern
    if not (S1 or S2):
        raise PatternMissing("empty pattern")
    xhat = np.zeros(n)
    xhat[list(S1)] = 1.0
    xhat[list(S2)] = -1.0
    y = A @ xhat
    rows = []
    if floor is None:
        floor = 0.1 * float(np.min(np.abs(xhat[xhat != 0])))
    for tau in taus:
        inst = Instance(A, y, MixedInfOne(1.0), "same-as-A", tau=float(tau))
        res = solve_ds_linear(inst)
        near = project(ds_solution_set(inst, res.value), xhat)
        err = float(np.linalg.norm(xhat - near))
        rows.append({"tau": float(tau), "value": res.value, "xstar": res.xstar.tolist(),
                     "nearest": near.tolist(), "error": err})
    return {"pattern": {"S1": list(S1), "S2": list(S2)}, "xhat": xhat.tolist(), "runs": rows,
            "threshold": floor, "success": all(r["error"] > floor for r in rows)}
