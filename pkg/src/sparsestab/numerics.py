"""Dense vector/matrix helpers, norms and small linear-algebra kernels."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np


class ColumnLimitExceeded(ValueError):
    """Sign enumeration requested on too many columns."""


class SingularGram(ValueError):
    """QQ^T is not invertible."""


class NotSymmetric(ValueError):
    """Matrix handed to the Jacobi solver is not symmetric."""


MAX_SIGN_COLUMNS = 24
MAX_JACOBI_SIZE = 32


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def as_matrix(Q) -> np.ndarray:
    arr = np.asarray(Q, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


@dataclass(frozen=True)
class Lp:
    p: float

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError(f"p must lie in [1, inf], got {self.p}")

    @property
    def conjugate(self) -> float:
        if self.p == 1:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    @property
    def is_polyhedral(self) -> bool:
        return self.p == 1 or math.isinf(self.p)


@dataclass(frozen=True)
class MixedInfOne:
    """alpha * ||.||_inf + (1 - alpha) * ||.||_1"""

    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def is_polyhedral(self) -> bool:
        return True


NormSpec = Lp | MixedInfOne


def check_normalized(spec: NormSpec, dim: int = 3, tol: float = 1e-12) -> None:
    """Assert phi(e_i) = 1 and phi*(e_i) = 1 on every basis vector."""
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        if abs(norm(e, spec) - 1.0) > tol or abs(dual_norm(e, spec) - 1.0) > 1e-9:
            raise ValueError(f"{spec} does not satisfy phi(e_i) = phi*(e_i) = 1")


def lp_norm(v: np.ndarray, p: float) -> float:
    a = np.abs(v)
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(a @ a))
    top = a.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


def norm(v, spec: NormSpec) -> float:
    v = as_vector(v)
    if isinstance(spec, Lp):
        return lp_norm(v, spec.p)
    a = np.abs(v)
    return float(spec.alpha * a.max() + (1.0 - spec.alpha) * a.sum())


def dual_norm(v, spec: NormSpec) -> float:
    v = as_vector(v)
    if isinstance(spec, Lp):
        return lp_norm(v, spec.conjugate)
    return _mixed_dual_lp(v, spec.alpha)


def _mixed_dual_lp(v: np.ndarray, alpha: float) -> float:
    # max v^T u  s.t.  alpha*s + (1-alpha)*sum(r) <= 1,  |u| <= s,  |u| <= r
    from .lp import LpProblem, solve

    n = v.size
    # variables: u (n, free), s (1), r (n)
    nv = 2 * n + 1
    c = np.concatenate([v, [0.0], np.zeros(n)])
    rows, rhs = [], []
    row = np.zeros(nv)
    row[n] = alpha
    row[n + 1:] = 1.0 - alpha
    rows.append(row)
    rhs.append(1.0)
    for i in range(n):
        for sgn in (1.0, -1.0):
            r1 = np.zeros(nv)
            r1[i] = sgn
            r1[n] = -1.0
            rows.append(r1)
            rhs.append(0.0)
            r2 = np.zeros(nv)
            r2[i] = sgn
            r2[n + 1 + i] = -1.0
            rows.append(r2)
            rhs.append(0.0)
    lb = np.concatenate([np.full(n, -np.inf), np.zeros(n + 1)])
    sol = solve(LpProblem(c=c, G=np.array(rows), h=np.array(rhs), lb=lb, sense="max"))
    return float(sol.value)


def induced_norm_inf_to_1(Q) -> float:
    """max ||Qx||_1 over x in {-1, +1}^n (exact, exhaustive)."""
    Q = as_matrix(Q)
    n = Q.shape[1]
    if n > MAX_SIGN_COLUMNS:
        raise ColumnLimitExceeded(f"{n} columns exceeds the cap of {MAX_SIGN_COLUMNS}")
    # fix x_0 = +1; the objective is even in x
    free = n - 1
    base = Q[:, 0]
    if free == 0:
        return float(np.abs(base).sum())
    lo = min(free, 16)
    hi = free - lo
    bits = (np.arange(1 << lo)[:, None] >> np.arange(lo)) & 1
    partial = (1.0 - 2.0 * bits) @ Q[:, 1:1 + lo].T
    best = 0.0
    for h in range(1 << hi):
        hs = 1.0 - 2.0 * ((h >> np.arange(hi)) & 1)
        shift = base + Q[:, 1 + lo:] @ hs
        best = max(best, float(np.abs(partial + shift).sum(axis=1).max()))
    return best


def top_k_indices(x, k: int) -> np.ndarray:
    """Indices of the k largest |x_i|; ties keep the lower index."""
    x = as_vector(x)
    order = sorted(range(x.size), key=lambda i: (-abs(x[i]), i))
    return np.array(sorted(order[:max(k, 0)]), dtype=int)


def best_k_term_error(x, k: int) -> float:
    x = as_vector(x)
    if k < 0:
        raise ValueError("k must be non-negative")
    keep = top_k_indices(x, k)
    mask = np.ones(x.size, dtype=bool)
    mask[keep] = False
    return float(np.abs(x[mask]).sum())


def positive_part(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def negative_part(x) -> np.ndarray:
    # signed: (x)^- = min(x, 0)
    return np.minimum(np.asarray(x, dtype=float), 0.0)


def complement(index_set, n: int) -> tuple:
    s = set(index_set)
    return tuple(i for i in range(n) if i not in s)


class GramFactor:
    """Cholesky factor of Q Q^T for repeated solves."""

    def __init__(self, Q: np.ndarray):
        self.Q = Q
        try:
            self.L = np.linalg.cholesky(Q @ Q.T)
        except np.linalg.LinAlgError as exc:
            raise SingularGram("Q Q^T is not positive definite") from exc

    def solve(self, b) -> np.ndarray:
        z = np.linalg.solve(self.L, np.asarray(b, dtype=float))
        return np.linalg.solve(self.L.T, z)


def numerical_rank(Q, rtol: float = 1e-10) -> int:
    Q = as_matrix(Q)
    s = np.linalg.svd(Q, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def rank_and_pinv_factor(Q, rtol: float = 1e-10):
    Q = as_matrix(Q)
    r = numerical_rank(Q, rtol)
    factor = GramFactor(Q) if r == Q.shape[0] else None
    return r, factor


def gram_solve(Q, b) -> np.ndarray:
    r, factor = rank_and_pinv_factor(Q)
    if factor is None:
        raise SingularGram(f"rank {r} < {np.shape(Q)[0]} rows")
    return factor.solve(b)


def symmetric_eigs(Q, tol: float = 1e-12, max_sweeps: int = 100, vectors: bool = False):
    """Cyclic Jacobi eigenvalues (ascending) of a small symmetric matrix."""
    A = as_matrix(Q).copy()
    n = A.shape[0]
    if A.shape[1] != n:
        raise NotSymmetric("matrix is not square")
    if n > MAX_JACOBI_SIZE:
        raise ValueError(f"size {n} exceeds {MAX_JACOBI_SIZE}")
    scale = np.linalg.norm(A)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(scale, 1.0):
        raise NotSymmetric("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = tol * scale
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-150 * max(abs(diff), 1e-300):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    if vectors:
        return w[order], V[:, order]
    return w[order]


# -- text formats ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def matrix_to_csv(Q) -> str:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return "".join(",".join(_fmt(v) for v in row) + "\n" for row in Q)


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [[float(v) for v in row] for row in csv.reader(io.StringIO(text)) if row]
    return as_matrix(rows)


def matrix_to_json(Q) -> str:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return "[" + ",".join("[" + ",".join(_fmt(v) for v in row) + "]" for row in Q) + "]"


def matrix_from_json(text: str) -> np.ndarray:
    return as_matrix(json.loads(text))


def vector_to_csv(v) -> str:
    return ",".join(_fmt(x) for x in as_vector(v)) + "\n"


def vector_from_csv(text: str) -> np.ndarray:
    return as_vector([float(x) for x in text.strip().split(",") if x.strip()])


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return matrix_from_json(text)
    return matrix_from_csv(text)


def write_matrix(path, Q) -> None:
    text = matrix_to_json(Q) if str(path).endswith(".json") else matrix_to_csv(Q)
    with open(path, "w") as fh:
        fh.write(text)


# -- seeded streams -----------------------------------------------------------

class Stream:
    """PCG64 words -> 53-bit uniforms -> Box-Muller normals.

    Only the raw 64-bit output of PCG64 is used, so the numbers do not depend on
    numpy's higher-level sampling routines (which may change between releases).
    Sub-streams are keyed by SeedSequence entropy ``(seed, *key)``.
    """

    def __init__(self, seed: int, *key: int):
        self.seed, self.key = int(seed), tuple(int(k) for k in key)
        ss = np.random.SeedSequence([self.seed, *self.key])
        self._bits = np.random.PCG64(ss)

    def child(self, *key: int) -> "Stream":
        return Stream(self.seed, *self.key, *key)

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        count = 1 if size is None else int(np.prod(size))
        raw = self._bits.random_raw(count)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53  # open interval (0, 1)
        u = low + (high - low) * u
        return float(u[0]) if size is None else u.reshape(size)

    def normal(self, size=None):
        count = 1 if size is None else int(np.prod(size))
        pairs = (count + 1) // 2
        u1, u2 = self.uniform(pairs), self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2 * math.pi * u2)
        z[1::2] = r * np.sin(2 * math.pi * u2)
        return float(z[0]) if size is None else z[:count].reshape(size)

    def integers(self, low: int, high: int) -> int:
        return int(low + min(int(self.uniform() * (high - low)), high - low - 1))
