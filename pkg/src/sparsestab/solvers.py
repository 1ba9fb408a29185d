"""Dantzig-selector and LASSO solvers, their KKT systems and dual certificates."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .geometry import (
    EpsSchedule,
    Polytope,
    build_Q,
    dedup_generators,
    hausdorff_nested,
    inner_polytope,
    level_for,
    support_halfspace,
    _exact_generators,
)
from .numerics import (
    Lp,
    MixedInfOne,
    NormSpec,
    as_matrix,
    as_vector,
    norm,
    numerical_rank,
    top_k_indices,
)


class BadInstance(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


class SingularWeight(ValueError):
    pass


class PatternInfeasible(ValueError):
    """zeta does not carry the sign pattern of the top-k support."""


FEASTOL = 1e-6
MAX_LEVELS = 30
MAX_CUTS = 400
HAUSDORFF_LAG = 3


# -- instances ------------------------------------------------------------------

def phi_from_json(obj) -> NormSpec:
    kind = obj.get("kind", "lp")
    if kind == "mixed":
        return MixedInfOne(float(obj["alpha"]))
    p = obj["p"]
    return Lp(math.inf if str(p).lower() in ("inf", "infinity") else float(p))


def phi_to_json(spec: NormSpec) -> dict:
    if isinstance(spec, MixedInfOne):
        return {"kind": "mixed", "alpha": spec.alpha}
    return {"kind": "lp", "p": "inf" if math.isinf(spec.p) else spec.p}


@dataclass
class Instance:
    A: np.ndarray
    y: np.ndarray
    phi: NormSpec
    M_spec: object = "identity"
    tau: float | None = None
    mu: float | None = None

    def __post_init__(self):
        self.A = as_matrix(self.A)
        self.y = as_vector(self.y)
        m, n = self.A.shape
        if self.y.size != m:
            raise BadInstance("y has the wrong length")
        if isinstance(self.M_spec, str):
            if self.M_spec == "identity":
                self.M = np.eye(m)
            elif self.M_spec == "same-as-A":
                self.M = self.A.copy()
            else:
                raise BadInstance(f"unknown M spec {self.M_spec!r}")
        else:
            self.M = as_matrix(self.M_spec)
            self.M_spec = self.M
        if not m < n:
            raise BadInstance("need m < n")
        if self.M.shape[0] != m or self.M.shape[1] < m:
            raise BadInstance("M must be m x q with q >= m")
        if numerical_rank(self.A) != m or numerical_rank(self.M) != m:
            raise BadInstance("A and M must both have rank m")
        if self.tau is not None and self.tau < 0:
            raise BadInstance("tau must be non-negative")
        if self.mu is not None and not self.mu > 0:
            raise BadInstance("mu must be positive")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def q(self):
        return self.M.shape[1]

    @property
    def alpha(self) -> float | None:
        if isinstance(self.phi, MixedInfOne):
            return self.phi.alpha
        if math.isinf(self.phi.p):
            return 1.0
        if self.phi.p == 1:
            return 0.0
        return None

    @property
    def MtA(self):
        return self.M.T @ self.A

    @property
    def Mty(self):
        return self.M.T @ self.y

    def residual(self, x) -> np.ndarray:
        return self.M.T @ (self.A @ np.asarray(x, dtype=float) - self.y)

    def replace(self, **kw) -> "Instance":
        data = dict(A=self.A, y=self.y, phi=self.phi, M_spec=self.M_spec, tau=self.tau, mu=self.mu)
        data.update(kw)
        return Instance(**data)

    def to_dict(self) -> dict:
        M = self.M_spec if isinstance(self.M_spec, str) else self.M.tolist()
        out = {"A": self.A.tolist(), "M": M, "y": self.y.tolist(), "phi": phi_to_json(self.phi)}
        if self.tau is not None:
            out["tau"] = self.tau
        if self.mu is not None:
            out["mu"] = self.mu
        return out

    @classmethod
    def from_dict(cls, d) -> "Instance":
        return cls(np.array(d["A"], dtype=float), np.array(d["y"], dtype=float),
                   phi_from_json(d.get("phi", {"kind": "mixed", "alpha": 1.0})),
                   d.get("M", "identity") if isinstance(d.get("M", "identity"), str) else np.array(d["M"]),
                   d.get("tau"), d.get("mu"))

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


@dataclass
class SolveResult:
    xstar: np.ndarray
    value: float
    duals: dict
    trace: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    polytope: Polytope | None = None
    kind: str = "linear-ds"

    @property
    def halfspace_count(self) -> int:
        return 0 if self.polytope is None else self.polytope.count

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "xstar": self.xstar.tolist(),
            "value": self.value,
            "duals": {k: np.atleast_1d(v).tolist() for k, v in self.duals.items()},
            "extras": {k: np.atleast_1d(v).tolist() for k, v in self.extras.items()},
            "halfspaces": self.halfspace_count,
            "trace": self.trace,
        }


# -- linear Dantzig selector ------------------------------------------------------

def _ds_lp(inst: Instance, alpha: float, tau: float) -> lp.LpProblem:
    n, q = inst.n, inst.q
    B, c = inst.MtA, inst.Mty
    I, Z = np.eye(n), np.zeros
    e = np.ones((q, 1))
    rows = [
        (np.hstack([I, -I, Z((n, 1)), Z((n, q))]), Z(n)),
        (np.hstack([-I, -I, Z((n, 1)), Z((n, q))]), Z(n)),
        (np.hstack([Z((1, n)), Z((1, n)), [[alpha]], (1 - alpha) * np.ones((1, q))]), [tau]),
        (np.hstack([B, Z((q, n)), -e, Z((q, q))]), c),
        (np.hstack([-B, Z((q, n)), -e, Z((q, q))]), -c),
        (np.hstack([B, Z((q, n)), Z((q, 1)), -np.eye(q)]), c),
        (np.hstack([-B, Z((q, n)), Z((q, 1)), -np.eye(q)]), -c),
    ]
    G = np.vstack([r for r, _ in rows])
    h = np.concatenate([np.ravel(b) for _, b in rows])
    cost = np.concatenate([Z(n), np.ones(n), Z(1 + q)])
    lb = np.concatenate([np.full(n, -np.inf), Z(n + 1 + q)])
    return lp.LpProblem(cost, G, h, lb=lb)


def solve_ds_linear(inst: Instance) -> SolveResult:
    alpha = inst.alpha
    if alpha is None:
        raise BadInstance("linear DS needs a polyhedral norm (mixed inf/1)")
    if inst.tau is None:
        raise BadInstance("tau is required")
    n, q = inst.n, inst.q
    prob = _ds_lp(inst, alpha, inst.tau)
    sol = lp.solve(prob)
    if sol.status == lp.INFEASIBLE:
        raise lp.NumericalBreakdown("DS program reported infeasible although x with Ax = y exists")
    if not sol.optimal:
        raise lp.NumericalBreakdown(f"DS program status {sol.status}")
    z = sol.x
    x, t, xi, v = z[:n], z[n:2 * n], z[2 * n], z[2 * n + 1:]
    lam = sol.ineq_duals
    cuts = np.cumsum([0, n, n, 1, q, q, q, q])
    parts = [lam[cuts[i]:cuts[i + 1]] for i in range(7)]
    # the dual program lists the two xi-rows in the opposite order from the primal rows
    duals = {"w1": parts[0], "w2": parts[1], "w3": parts[2], "w4": parts[4],
             "w5": parts[3], "w6": parts[5], "w7": parts[6]}
    return SolveResult(x, float(t.sum()), duals, extras={"t": t, "xi": np.array([xi]), "v": v},
                       kind="linear-ds", trace=[{"iterations": sol.iterations}])


# -- relaxations -----------------------------------------------------------------

def _relaxed_ds_lp(inst: Instance, Gamma: np.ndarray) -> lp.LpProblem:
    n = inst.n
    I = np.eye(n)
    K = Gamma.shape[1]
    GtB = Gamma.T @ inst.MtA
    G = np.vstack([np.hstack([I, -I]), np.hstack([-I, -I]), np.hstack([GtB, np.zeros((K, n))])])
    h = np.concatenate([np.zeros(2 * n), inst.tau * np.ones(K) + Gamma.T @ inst.Mty])
    cost = np.concatenate([np.zeros(n), np.ones(n)])
    lb = np.concatenate([np.full(n, -np.inf), np.zeros(n)])
    return lp.LpProblem(cost, G, h, lb=lb)


def _relaxed_lasso_lp(inst: Instance, Gamma: np.ndarray) -> lp.LpProblem:
    n = inst.n
    I = np.eye(n)
    K = Gamma.shape[1]
    GtB = Gamma.T @ inst.MtA
    G = np.vstack([
        np.hstack([I, -I, np.zeros((n, 1))]),
        np.hstack([-I, -I, np.zeros((n, 1))]),
        np.concatenate([np.zeros(n), np.ones(n), [0.0]])[None, :],
        np.hstack([GtB, np.zeros((K, n)), -np.ones((K, 1))]),
    ])
    h = np.concatenate([np.zeros(2 * n), [inst.mu], Gamma.T @ inst.Mty])
    cost = np.concatenate([np.zeros(2 * n), [1.0]])
    lb = np.concatenate([np.full(n, -np.inf), np.zeros(n + 1)])
    return lp.LpProblem(cost, G, h, lb=lb)


def _split(lam, sizes):
    cuts = np.cumsum([0] + list(sizes))
    return [lam[cuts[i]:cuts[i + 1]] for i in range(len(sizes))]


def _mesh_gap(spec, j, sched, q):
    """Hausdorff distance between the level-j outer polytope and an inner hull from level j+3."""
    if q == 1 or (isinstance(spec, Lp) and spec.is_polyhedral):
        return 0.0
    if q > 4:
        return float("nan")
    outer = build_Q(spec, j, sched, q)
    inner = inner_polytope(spec, q, level_for(spec, j + HAUSDORFF_LAG, sched, q))
    return hausdorff_nested(inner, outer, tol=1e-7)


def _check_nonlinear(inst: Instance):
    if not isinstance(inst.phi, Lp) or inst.phi.is_polyhedral:
        raise BadInstance("nonlinear solver expects an lp norm with 1 < p < inf")


def solve_ds_nonlinear(inst: Instance, sched: EpsSchedule | None = None, delta: float | None = None,
                       feastol: float = FEASTOL) -> SolveResult:
    if inst.tau is None:
        raise BadInstance("tau is required")
    if isinstance(inst.phi, MixedInfOne) or inst.phi.is_polyhedral:
        res = solve_ds_linear(inst)
        res.kind = "nonlinear-ds(linear)"
        return res
    if inst.tau == 0:
        # phi(r) <= 0 means r = 0 for any norm
        res = solve_ds_linear(inst.replace(phi=MixedInfOne(1.0)))
        res.kind = "nonlinear-ds(equality)"
        return res
    sched = sched or EpsSchedule()
    tau = inst.tau
    delta = min(0.01, tau / 10) if delta is None else delta
    n, q = inst.n, inst.q
    cuts: list[np.ndarray] = []
    trace = []
    for j in range(1, MAX_LEVELS + 1):
        mesh = build_Q(inst.phi, j, sched, q)
        while True:
            Gamma = mesh.generators if not cuts else dedup_generators(np.hstack([mesh.generators, np.array(cuts).T]))
            sol = lp.solve(_relaxed_ds_lp(inst, Gamma))
            if not sol.optimal:
                raise lp.NumericalBreakdown(f"relaxed DS status {sol.status}")
            x = sol.x[:n]
            r = inst.residual(x)
            phr = norm(r, inst.phi)
            if phr - tau <= feastol * tau:
                break
            if len(cuts) >= MAX_CUTS:
                raise NoConvergence("cutting-plane budget exhausted")
            cuts.append(support_halfspace(inst.phi, r / phr))
        stat = tau * _mesh_gap(inst.phi, j, sched, q)
        trace.append({"j": j, "eps": sched.eps(j), "value": float(sol.x[n:].sum()),
                      "halfspaces": int(Gamma.shape[1]), "mesh_halfspaces": mesh.count,
                      "cuts": len(cuts), "violation": float(max(phr - tau, 0.0)), "hausdorff": stat})
        if not (stat > delta):
            w1, w2, w3 = _split(sol.ineq_duals, [n, n, Gamma.shape[1]])
            return SolveResult(x, float(sol.x[n:].sum()), {"w1": w1, "w2": w2, "w3": w3}, trace,
                               {"t": sol.x[n:]}, Polytope.from_generators(Gamma, eps=sched.eps(j)),
                               kind="nonlinear-ds")
    raise NoConvergence(f"Hausdorff statistic still above {delta} after {MAX_LEVELS} levels")


def solve_lasso(inst: Instance, sched: EpsSchedule | None = None, delta: float = 0.01,
                gaptol: float = FEASTOL) -> SolveResult:
    if inst.mu is None or not inst.mu > 0:
        raise BadInstance("mu must be positive")
    sched = sched or EpsSchedule()
    n, q = inst.n, inst.q
    exact = _exact_generators(inst.phi, q)
    cuts: list[np.ndarray] = []
    trace = []
    best_upper = math.inf
    for j in range(1, MAX_LEVELS + 1):
        mesh = Polytope.from_generators(exact) if exact is not None else build_Q(inst.phi, j, sched, q)
        while True:
            Gamma = mesh.generators if not cuts else dedup_generators(np.hstack([mesh.generators, np.array(cuts).T]))
            sol = lp.solve(_relaxed_lasso_lp(inst, Gamma))
            if not sol.optimal:
                raise lp.NumericalBreakdown(f"relaxed LASSO status {sol.status}")
            x, rho = sol.x[:n], float(sol.x[-1])
            r = inst.residual(x)
            phr = norm(r, inst.phi)
            if phr - rho <= gaptol * max(rho, 1e-9) or exact is not None:
                break
            if len(cuts) >= MAX_CUTS:
                raise NoConvergence("cutting-plane budget exhausted")
            cuts.append(support_halfspace(inst.phi, r / phr))
        best_upper = min(best_upper, phr)
        gap = 0.0 if exact is not None else _mesh_gap(inst.phi, j, sched, q)
        stat = best_upper * gap
        trace.append({"j": j, "eps": sched.eps(j), "value": rho, "halfspaces": int(Gamma.shape[1]),
                      "cuts": len(cuts), "gap": float(phr - rho), "hausdorff": stat})
        if not (stat > delta):
            w1, w2, w3, w4 = _split(sol.ineq_duals, [n, n, 1, Gamma.shape[1]])
            return SolveResult(x, rho, {"w1": w1, "w2": w2, "w3": w3, "w4": w4}, trace,
                               {"t": sol.x[n:2 * n], "rho": np.array([rho])},
                               Polytope.from_generators(Gamma, eps=sched.eps(j)), kind="lasso")
    raise NoConvergence(f"Hausdorff statistic still above {delta} after {MAX_LEVELS} levels")


def ds_solution_set(inst: Instance, value: float, slack: float = 1e-9) -> Polytope:
    """H-representation of the optimal set of a polyhedral DS instance (2^n sign rows)."""
    n = inst.n
    if n > 14:
        raise lp.SizeLimit("solution-set description needs n <= 14")
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    Gamma = _exact_generators(MixedInfOne(inst.alpha), inst.q)
    G = np.vstack([signs, Gamma.T @ inst.MtA])
    h = np.concatenate([np.full(len(signs), value + slack), inst.tau + slack + Gamma.T @ inst.Mty])
    return Polytope(G, h)


def weighted_ds_transform(inst: Instance, W) -> Instance:
    """Substitute u = W x; the correlation matrix keeps the original columns."""
    W = np.asarray(W, dtype=float)
    d = np.diag(W) if W.ndim == 2 else W
    if W.ndim == 2 and np.any(W - np.diag(d) != 0):
        raise SingularWeight("W must be diagonal")
    if np.any(d == 0):
        raise SingularWeight("W has a zero on the diagonal")
    return inst.replace(A=inst.A / d[None, :], M_spec=inst.M.copy())


# -- KKT systems -------------------------------------------------------------------

@dataclass(frozen=True)
class LinearDS:
    pass


@dataclass(frozen=True)
class NonlinearDS:
    polytope: Polytope


@dataclass(frozen=True)
class Lasso:
    polytope: Polytope
    c: float | None = None


@dataclass
class KktSystem:
    M1: np.ndarray
    M2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    layout: dict

    @property
    def size(self) -> int:
        return self.M1.shape[1]

    def pack(self, **parts) -> np.ndarray:
        z = np.zeros(self.size)
        for name, sl in self.layout.items():
            if name in parts:
                z[sl] = np.ravel(parts[name])
        return z

    def unpack(self, z) -> dict:
        return {k: np.asarray(z)[s] for k, s in self.layout.items()}

    def residual(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.concatenate([np.maximum(self.M1 @ z - self.b1, 0.0), self.M2 @ z - self.b2])

    def max_residual(self, z) -> float:
        return float(np.max(np.abs(self.residual(z)), initial=0.0))


def _layout(names_sizes):
    out, pos = {}, 0
    for name, size in names_sizes:
        out[name] = slice(pos, pos + size)
        pos += size
    return out, pos


def _assemble(blocks, layout, total):
    """blocks: list of row-blocks, each a dict name -> matrix; returns the stacked matrix."""
    rows = []
    for blk in blocks:
        height = next(np.atleast_2d(v).shape[0] for v in blk.values())
        R = np.zeros((height, total))
        for name, val in blk.items():
            R[:, layout[name]] = np.atleast_2d(val)
        rows.append(R)
    return np.vstack(rows)


def build_kkt(inst: Instance, variant) -> KktSystem:
    n, q = inst.n, inst.q
    I = np.eye(n)
    e_n = np.ones((1, n))
    if isinstance(variant, LinearDS):
        a, tau = inst.alpha, inst.tau
        B = inst.MtA
        BT = B.T
        yM = inst.Mty[None, :]
        eq = np.ones((q, 1))
        Iq = np.eye(q)
        layout, total = _layout([("x", n), ("t", n), ("xi", 1), ("v", q), ("w1", n), ("w2", n),
                                 ("w3", 1), ("w4", q), ("w5", q), ("w6", q), ("w7", q)])
        M1 = _assemble([
            {"x": I, "t": -I},
            {"x": -I, "t": -I},
            {"xi": [[a]], "v": (1 - a) * np.ones((1, q))},
            {"x": B, "xi": -eq},
            {"x": -B, "xi": -eq},
            {"x": B, "v": -Iq},
            {"x": -B, "v": -Iq},
            {"w1": I, "w2": I},
            {"w3": [[-a]], "w4": np.ones((1, q)), "w5": np.ones((1, q))},
            {"w3": -(1 - a) * eq, "w6": Iq, "w7": Iq},
            {"w1": -I}, {"w2": -I}, {"w3": [[-1.0]]},
            {"w4": -Iq}, {"w5": -Iq}, {"w6": -Iq}, {"w7": -Iq},
        ], layout, total)
        c = inst.Mty
        b1 = np.concatenate([np.zeros(2 * n), [tau], c, -c, c, -c, np.ones(n), [0.0], np.zeros(q),
                             np.zeros(2 * n + 1 + 4 * q)])
        M2 = _assemble([
            {"w1": -I, "w2": I, "w4": BT, "w5": -BT, "w6": -BT, "w7": BT},
            {"t": e_n, "w3": [[tau]], "w4": -yM, "w5": yM, "w6": yM, "w7": -yM},
        ], layout, total)
        return KktSystem(M1, M2, b1, np.zeros(n + 1), layout)

    Gamma = variant.polytope.generators
    K = Gamma.shape[1]
    MG = inst.M @ Gamma
    C = MG.T @ inst.A
    IK = np.eye(K)
    eK = np.ones((1, K))
    yMG = (inst.y @ MG)[None, :]
    if isinstance(variant, NonlinearDS):
        tau = inst.tau
        layout, total = _layout([("x", n), ("t", n), ("w1", n), ("w2", n), ("w3", K)])
        M1 = _assemble([
            {"x": I, "t": -I},
            {"x": -I, "t": -I},
            {"w1": I, "w2": I},
            {"x": C},
            {"t": -I}, {"w1": -I}, {"w2": -I}, {"w3": -IK},
        ], layout, total)
        b1 = np.concatenate([np.zeros(2 * n), np.ones(n), MG.T @ inst.y + tau, np.zeros(3 * n + K)])
        M2 = _assemble([
            {"w1": I, "w2": -I, "w3": C.T},
            {"t": e_n, "w3": tau * eK + yMG},
        ], layout, total)
        return KktSystem(M1, M2, b1, np.zeros(n + 1), layout)
    if isinstance(variant, Lasso):
        mu = inst.mu
        layout, total = _layout([("x", n), ("t", n), ("rho", 1), ("w1", n), ("w2", n), ("w3", 1), ("w4", K)])
        M1 = _assemble([
            {"x": I, "t": -I},
            {"x": -I, "t": -I},
            {"t": e_n},
            {"x": C, "rho": -eK.T},
            {"w1": I, "w2": I, "w3": -np.ones((n, 1))},
            {"w4": eK},
            {"t": -I}, {"rho": [[-1.0]]}, {"w1": -I}, {"w2": -I}, {"w3": [[-1.0]]}, {"w4": -IK},
        ], layout, total)
        b1 = np.concatenate([np.zeros(2 * n), [mu], MG.T @ inst.y, np.zeros(n), [1.0],
                             np.zeros(n + 1 + 2 * n + 1 + K)])
        M2 = _assemble([
            {"w1": I, "w2": -I, "w4": C.T},
            {"rho": [[1.0]], "w3": [[mu]], "w4": yMG},
        ], layout, total)
        return KktSystem(M1, M2, b1, np.zeros(n + 1), layout)
    raise TypeError(f"unknown variant {variant!r}")


def kkt_point(inst: Instance, res: SolveResult, variant) -> np.ndarray:
    """Solver optimum packed into the variant's variable vector."""
    K = build_kkt(inst, variant)
    return K.pack(x=res.xstar, **res.extras, **res.duals)


# -- dual certificates -----------------------------------------------------------

@dataclass
class DualCertificate:
    variant: str
    w: dict
    h: np.ndarray
    J: tuple
    support: tuple


def first_invertible_columns(M: np.ndarray) -> tuple:
    m, q = M.shape
    for J in itertools.combinations(range(q), m):
        sub = M[:, J]
        if numerical_rank(sub) == m and np.linalg.cond(sub) < 1e12:
            return J
    raise BadInstance("M has no invertible m x m submatrix")


def sign_pattern(x, k: int):
    x = as_vector(x)
    S = top_k_indices(x, k)
    return tuple(int(i) for i in S if x[i] > 0), tuple(int(i) for i in S if x[i] < 0)


def check_pattern(A, x, k, zeta, ustar, tol=1e-9):
    zeta, ustar = as_vector(zeta), as_vector(ustar)
    S1, S2 = sign_pattern(x, k)
    scale = 1.0 + np.max(np.abs(zeta))
    if np.max(np.abs(A.T @ ustar - zeta)) > tol * scale * 10:
        raise PatternInfeasible("zeta is not A^T u*")
    if np.any(np.abs(zeta[list(S1)] - 1) > tol) or np.any(np.abs(zeta[list(S2)] + 1) > tol):
        raise PatternInfeasible("zeta misses the sign pattern on the support")
    if np.any(np.abs(zeta) > 1 + tol):
        raise PatternInfeasible("|zeta| exceeds 1 off the support")
    return S1, S2


def _split_zeta(zeta, S1, S2, scale=1.0):
    zeta = np.clip(zeta, -1.0, 1.0)
    w1 = (np.abs(zeta) + zeta) / 2
    w2 = (np.abs(zeta) - zeta) / 2
    w1[list(S1)], w2[list(S1)] = 1.0, 0.0
    w1[list(S2)], w2[list(S2)] = 0.0, 1.0
    return w1 / scale, w2 / scale


def _signed_columns(Gamma, i, tol=1e-12):
    q = Gamma.shape[0]
    e = np.zeros(q)
    e[i] = 1.0
    plus = np.nonzero(np.max(np.abs(Gamma - e[:, None]), axis=0) <= tol)[0]
    minus = np.nonzero(np.max(np.abs(Gamma + e[:, None]), axis=0) <= tol)[0]
    if plus.size == 0 or minus.size == 0:
        raise ValueError("generator matrix must contain the coordinate directions")
    return int(plus[0]), int(minus[0])


def construct_dual_certificate(inst: Instance, x, k: int, zeta, ustar, variant) -> DualCertificate:
    x = as_vector(x)
    zeta, ustar = as_vector(zeta), as_vector(ustar)
    S1, S2 = check_pattern(inst.A, x, k, zeta, ustar)
    J = first_invertible_columns(inst.M)
    hJ = np.linalg.solve(inst.M[:, J], ustar)
    h = np.zeros(inst.q)
    h[list(J)] = hJ
    if isinstance(variant, LinearDS):
        a = inst.alpha
        w1, w2 = _split_zeta(zeta, S1, S2)
        pos, neg = np.maximum(h, 0.0), np.minimum(h, 0.0)
        w = {"w1": w1, "w2": w2, "w3": np.array([np.abs(h).sum()]),
             "w4": a * pos, "w5": -a * neg, "w6": -(1 - a) * neg, "w7": (1 - a) * pos}
        return DualCertificate("linear-ds", w, h, J, (S1, S2))
    Gamma = variant.polytope.generators
    K = Gamma.shape[1]
    if isinstance(variant, NonlinearDS):
        h = -h
        w1, w2 = _split_zeta(zeta, S1, S2)
        w3 = np.zeros(K)
        for i in range(inst.q):
            plus, minus = _signed_columns(Gamma, i)
            if h[i] >= 0:
                w3[plus] += h[i]
            else:
                w3[minus] += -h[i]
        return DualCertificate("nonlinear-ds", {"w1": w1, "w2": w2, "w3": w3}, h, J, (S1, S2))
    if isinstance(variant, Lasso):
        c = variant.c
        if c is None:
            from .bounds import constant_c
            c = constant_c(inst.M, inst.A)
        w1, w2 = _split_zeta(zeta, S1, S2, scale=c)
        w4 = np.zeros(K)
        for i in range(inst.q):
            plus, minus = _signed_columns(Gamma, i)
            if h[i] >= 0:
                w4[minus] += h[i] / c
            else:
                w4[plus] += -h[i] / c
        return DualCertificate("lasso", {"w1": w1, "w2": w2, "w3": np.array([1.0 / c]), "w4": w4},
                               h, J, (S1, S2))
    raise TypeError(f"unknown variant {variant!r}")


def dual_residual(inst: Instance, variant, w: dict) -> float:
    """Largest violation of the dual program's constraints (objective ignored)."""
    B = inst.MtA
    viol = [np.minimum(np.ravel(v), 0.0) for v in w.values()]
    if isinstance(variant, LinearDS):
        a = inst.alpha
        comb = w["w4"] - w["w5"] - w["w6"] + w["w7"]
        viol += [
            np.maximum(w["w1"] + w["w2"] - 1.0, 0.0),
            -w["w1"] + w["w2"] + B.T @ comb,
            np.maximum([-a * w["w3"][0] + w["w4"].sum() + w["w5"].sum()], 0.0),
            np.maximum(-(1 - a) * w["w3"][0] + w["w6"] + w["w7"], 0.0),
        ]
    else:
        Gamma = variant.polytope.generators
        C = B.T @ Gamma
        if isinstance(variant, NonlinearDS):
            viol += [C @ w["w3"] + w["w1"] - w["w2"], np.maximum(w["w1"] + w["w2"] - 1.0, 0.0)]
        else:
            viol += [C @ w["w4"] + w["w1"] - w["w2"],
                     np.maximum(w["w1"] + w["w2"] - w["w3"][0], 0.0),
                     np.maximum([w["w4"].sum() - 1.0], 0.0)]
    return float(max(np.max(np.abs(v), initial=0.0) for v in viol))


def dual_objective(inst: Instance, variant, w: dict) -> float:
    if isinstance(variant, LinearDS):
        comb = w["w4"] - w["w5"] - w["w6"] + w["w7"]
        return float(-inst.tau * w["w3"][0] + inst.y @ inst.M @ comb)
    MG = inst.M @ variant.polytope.generators
    if isinstance(variant, NonlinearDS):
        return float(-(inst.tau + inst.y @ MG) @ w["w3"])
    return float(-inst.mu * w["w3"][0] - (inst.y @ MG) @ w["w4"])


def certificate_point(inst: Instance, x, cert: DualCertificate, variant) -> np.ndarray:
    """The primal-dual point used in the stability argument: (x, |x|, residual data, w)."""
    x = as_vector(x)
    K = build_kkt(inst, variant)
    r = inst.residual(x)
    if isinstance(variant, LinearDS):
        return K.pack(x=x, t=np.abs(x), xi=[np.abs(r).max()], v=np.abs(r), **cert.w)
    if isinstance(variant, NonlinearDS):
        return K.pack(x=x, t=np.abs(x), **cert.w)
    return K.pack(x=x, t=np.abs(x), rho=[norm(r, inst.phi)], **cert.w)
