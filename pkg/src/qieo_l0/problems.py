"""Bitstring fitness oracles for the two l0-constrained objectives.

A problem exposes ``m`` (bitstring length), ``budget`` (exact popcount after
repair, or ``None``), ``evaluate`` (batched fitness of feasible bitstrings,
lower is better) and ``decode`` (reference-precision fit of one bitstring).

``evaluate`` is the search path and trades a little floating-point accuracy
for throughput; ``decode`` always goes through :mod:`qieo_l0.numerics`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .numerics import ContractError, least_squares, restricted_least_squares

ORACLE_LIMIT = 2_000_000


class InfeasibleBudgetError(ValueError):
    pass


class OracleGuardError(RuntimeError):
    def __init__(self, count: int, limit: int = ORACLE_LIMIT):
        super().__init__(f"enumeration needs {count} supports, above the guard of {limit}")
        self.count = count
        self.limit = limit


@dataclass
class FitnessOutcome:
    fitness: float
    weights: np.ndarray
    corruption: np.ndarray | None = None
    support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def support_of(bits) -> np.ndarray:
    return np.flatnonzero(np.asarray(bits)).astype(np.int64)


def bits_of(support, m: int) -> np.ndarray:
    bits = np.zeros(m, dtype=np.uint8)
    bits[np.asarray(support, dtype=np.int64)] = 1
    return bits


def repair(bits, budget: int, stream: kernels.Substream) -> np.ndarray:
    """Return a copy of ``bits`` with exactly ``budget`` ones.

    Excess ones are cleared, or missing ones set, uniformly at random using
    ``m`` draws from ``stream``. Feasible input is returned unchanged and
    consumes no draws.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    m = bits.shape[0]
    if not 0 <= budget <= m:
        raise ContractError(f"budget {budget} outside [0, {m}]")
    if int(bits.sum()) == budget:
        return bits.copy()
    out = kernels.repair_population(bits[None, :], budget, stream.seed, stream.stream, offset=stream.position)
    stream.position += m
    return out[0]


class _Problem:
    kind = ""
    m: int
    budget: int | None

    def _check_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits)
        if bits.ndim == 1:
            bits = bits[None, :]
        if bits.shape[1] != self.m:
            raise ContractError(f"bitstrings must have length {self.m}, got {bits.shape[1]}")
        return bits.astype(bool)

    def fitness(self, bits, stream: kernels.Substream) -> FitnessOutcome:
        """Repair ``bits`` to the budget and decode the result."""
        return self.decode(repair(bits, self.budget, stream))


class SparseRecoveryProblem(_Problem):
    """min ||y - X w||^2 subject to ||w||_0 <= s, searched over feature supports.

    Fitness of a support is the restricted least-squares MSE, ``sse / n``.
    """

    kind = "sparse"

    def __init__(self, X, y, s: int):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        n, p = self.X.shape
        if self.y.shape != (n,):
            raise ContractError(f"y must have length {n}")
        if n < 1 or not 1 <= s <= p:
            raise ContractError(f"need n >= 1 and 1 <= s <= p; got n={n}, p={p}, s={s}")
        self.n, self.p, self.s = n, p, int(s)
        self.m = p
        self.budget = self.s
        self._yy = float(self.y @ self.y)

    def decode(self, bits) -> FitnessOutcome:
        bits = self._check_bits(bits)[0]
        fit = restricted_least_squares(self.X, self.y, support_of(bits))
        return FitnessOutcome(fit.sse / self.n, fit.weights, None, fit.support)

    def evaluate(self, bits, anchor=None) -> np.ndarray:
        bits = self._check_bits(bits)
        if bits.shape[0] == 0:
            return np.zeros(0)
        counts = bits.sum(axis=1)
        out = np.empty(bits.shape[0])
        for c in np.unique(counts):
            rows = np.flatnonzero(counts == c)
            out[rows] = self._evaluate_fixed(bits[rows], int(c))
        return out

    def _evaluate_fixed(self, bits, c):
        if c == 0:
            return np.full(bits.shape[0], self._yy / self.n)
        if c > self.n:
            return np.array([self.decode(b).fitness for b in bits])
        idx = np.nonzero(bits)[1].reshape(bits.shape[0], c)
        A = np.transpose(self.X[:, idx], (1, 0, 2))  # (B, n, c)
        q, r = np.linalg.qr(A)
        diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
        ok = diag.min(axis=1) > 1e-10 * diag.max(axis=1)
        out = np.empty(bits.shape[0])
        if ok.any():
            qty = np.einsum("bnc,n->bc", q[ok], self.y)
            coef = np.linalg.solve(r[ok], qty[..., None])[..., 0]
            res = self.y[None, :] - np.einsum("bnc,bc->bn", A[ok], coef)
            out[ok] = np.einsum("bn,bn->b", res, res) / self.n
        for i in np.flatnonzero(~ok):
            out[i] = self.decode(bits[i]).fitness
        return out


class RobustRegressionProblem(_Problem):
    """min ||y - X w - b||^2 subject to ||b||_0 <= k, searched over row supports.

    With ``b`` free on the selected rows ``S`` those rows fit exactly, so the
    fitness of ``S`` is the OLS MSE on the complement: ``sse / (n - k)``.
    """

    kind = "robust"
    # samples differing from the anchor in more rows use the direct path
    max_update_rank = 32

    def __init__(self, X, y, k: int):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        n, p = self.X.shape
        if self.y.shape != (n,):
            raise ContractError(f"y must have length {n}")
        if not 0 <= k < n - p:
            raise InfeasibleBudgetError(f"need 0 <= k < n - p; got n={n}, p={p}, k={k}")
        self.n, self.p, self.k = n, p, int(k)
        self.m = n
        self.budget = self.k
        self._G = self.X.T @ self.X
        self._Xty = self.X.T @ self.y
        self._anchor_key = None
        self._anchor = None
        self._hat = None

    def decode(self, bits) -> FitnessOutcome:
        bits = self._check_bits(bits)[0]
        clean = ~bits
        n_clean = int(clean.sum())
        if n_clean < self.p:
            raise InfeasibleBudgetError(f"{n_clean} clean rows cannot identify {self.p} weights")
        w, sse = least_squares(self.X[clean], self.y[clean])
        b = np.zeros(self.n)
        b[bits] = self.y[bits] - self.X[bits] @ w
        return FitnessOutcome(sse / n_clean, w, b, support_of(bits))

    # search path -----------------------------------------------------------

    def evaluate(self, bits, anchor=None) -> np.ndarray:
        bits = self._check_bits(bits)
        B = bits.shape[0]
        out = np.empty(B)
        if B == 0:
            return out
        n_clean = self.n - bits.sum(axis=1)
        if np.any(n_clean < self.p):
            raise InfeasibleBudgetError("a bitstring leaves fewer clean rows than weights")
        far = np.ones(B, dtype=bool)
        if anchor is not None:
            state = self._anchor_state(np.asarray(anchor, dtype=bool))
            diff = bits != state["bits"][None, :]
            nd = diff.sum(axis=1)
            near = nd <= self.max_update_rank
            if near.any():
                out[near] = self._evaluate_near(bits[near], diff[near], nd[near], state)
            far = ~near
        rows = np.flatnonzero(far)
        if rows.size:
            out[rows] = self._evaluate_direct(bits[rows])
        return out / n_clean

    def _anchor_state(self, anchor):
        key = anchor.tobytes()
        if key != self._anchor_key:
            clean = ~anchor
            G0 = self.X[clean].T @ self.X[clean]
            h0 = self.X[clean].T @ self.y[clean]
            Ginv = np.linalg.inv(G0)
            self._anchor = {"bits": anchor.copy(), "Ginv": Ginv, "w": Ginv @ h0, "h": h0}
            self._anchor_key = key
        return self._anchor

    def _evaluate_near(self, bits, diff, nd, state):
        # Clean-set Gram matrix of each sample is a signed rank-d update of
        # the anchor's: rows leaving S join the clean set (+), rows entering
        # S leave it (-). Woodbury gives the new weights in O(p^2 d).
        B = bits.shape[0]
        d = int(nd.max())
        out = np.empty(B)
        if d == 0:
            res = self.y - self.X @ state["w"]
            sse = float(res[~state["bits"]] @ res[~state["bits"]])
            return np.full(B, sse)
        rows = np.zeros((B, d), dtype=np.int64)
        sign = np.zeros((B, d))
        for i in range(B):
            idx = np.flatnonzero(diff[i])
            rows[i, : idx.size] = idx
            # +1: joins the clean set (was selected in the anchor)
            sign[i, : idx.size] = np.where(state["bits"][idx], 1.0, -1.0)
        U = self.X[rows] * (sign != 0)[..., None]  # (B, d, p), padded rows zero
        s = np.where(sign == 0, 1.0, sign)
        Z = U @ state["Ginv"]  # (B, d, p) == (Ginv U^T)^T
        M = U @ np.swapaxes(Z, 1, 2)
        M[:, np.arange(d), np.arange(d)] += s  # inv(diag(s)) == diag(s)
        h = state["h"][None, :] + ((s * self.y[rows] * (sign != 0))[:, None, :] @ U)[:, 0]
        w0 = h @ state["Ginv"]
        corr = np.linalg.solve(M, Z @ h[..., None])
        w = w0 - (np.swapaxes(Z, 1, 2) @ corr)[..., 0]
        res = self.y[None, :] - w @ self.X.T
        res[bits] = 0.0
        np.einsum("bn,bn->b", res, res, out=out)
        return out

    def _evaluate_direct(self, bits, chunk: int = 64):
        B = bits.shape[0]
        out = np.empty(B)
        counts = bits.sum(axis=1)
        for c in np.unique(counts):
            rows_c = np.flatnonzero(counts == c)
            for start in range(0, rows_c.size, chunk):
                sel = rows_c[start : start + chunk]
                out[sel] = self._direct_fixed(bits[sel], int(c))
        return out

    def _direct_fixed(self, bits, c):
        B = bits.shape[0]
        if c == 0:
            w = np.linalg.solve(self._G, self._Xty)
            r = self.y - self.X @ w
            return np.full(B, float(r @ r))
        S = np.nonzero(bits)[1].reshape(B, c)
        if c <= 96:
            # deletion identity: sse_C = sse_full - r_S^T (I - H_SS)^{-1} r_S
            hat, r_full, sse_full = self._full_fit()
            A = np.eye(c)[None] - hat[S[:, :, None], S[:, None, :]]
            rs = r_full[S]
            z = np.linalg.solve(A, rs[..., None])[..., 0]
            sse = sse_full - np.einsum("bc,bc->b", rs, z)
            # cancellation guard: recompute small values from residuals
            tiny = sse < 1e-6 * max(sse_full, 1e-300)
            if tiny.any():
                sse[tiny] = self._clean_sse_gram(bits[tiny], S[tiny])
            return sse
        return self._clean_sse_gram(bits, S)

    def _clean_sse_gram(self, bits, S):
        XS = self.X[S]  # (B, c, p)
        G = self._G[None] - np.swapaxes(XS, 1, 2) @ XS
        h = self._Xty[None] - (self.y[S][:, None, :] @ XS)[:, 0]
        w = np.linalg.solve(G, h[..., None])[..., 0]
        res = self.y[None, :] - w @ self.X.T
        res[bits] = 0.0
        return np.einsum("bn,bn->b", res, res)

    def _full_fit(self):
        if self._hat is None:
            Ginv = np.linalg.inv(self._G)
            w = Ginv @ self._Xty
            r = self.y - self.X @ w
            self._hat = (self.X @ Ginv @ self.X.T, r, float(r @ r))
        return self._hat


def sparse_fitness(problem: SparseRecoveryProblem, bits, stream: kernels.Substream) -> FitnessOutcome:
    return problem.fitness(bits, stream)


def robust_fitness(problem: RobustRegressionProblem, bits, stream: kernels.Substream) -> FitnessOutcome:
    return problem.fitness(bits, stream)


def brute_force_oracle(problem, exact_budget: int, limit: int = ORACLE_LIMIT):
    """Exhaustive minimizer over all supports with exactly ``exact_budget`` ones.

    Every support is scored with the reference ``decode`` path; ties keep the
    lexicographically first support.

    Returns
    -------
    support : ndarray of int
    fitness : float
    """
    m = problem.m
    if not 0 <= exact_budget <= m:
        raise ContractError(f"budget {exact_budget} outside [0, {m}]")
    count = math.comb(m, exact_budget)
    if count > limit:
        raise OracleGuardError(count, limit)
    best_support, best_fit = None, math.inf
    for combo in itertools.combinations(range(m), exact_budget):
        f = problem.decode(bits_of(combo, m)).fitness
        if f < best_fit:
            best_support, best_fit = np.array(combo, dtype=np.int64), f
    return best_support, best_fit
