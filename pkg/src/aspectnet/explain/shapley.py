"""Shapley values over token coalitions: exact enumeration and KernelSHAP.

A value function takes a boolean mask matrix ``(M, n)`` (True = token kept)
and returns ``(M,)`` values. Both estimators evaluate every coalition they
need in one batched call, so results do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, factorial
from typing import Callable

import numpy as np

ValueFunction = Callable[[np.ndarray], np.ndarray]

MAX_EXACT_TOKENS = 14


class ShapleyError(ValueError):
    pass


@dataclass
class ShapleyResult:
    values: np.ndarray
    base_value: float
    full_value: float
    evaluations: int

    @property
    def efficiency_gap(self) -> float:
        return float(self.values.sum() - (self.full_value - self.base_value))


def all_coalitions(n: int) -> np.ndarray:
    """(2^n, n) masks; row k is the binary expansion of k (bit i = token i)."""
    codes = np.arange(2 ** n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def exact_shapley(fn: ValueFunction, n: int, max_tokens: int = MAX_EXACT_TOKENS) -> ShapleyResult:
    if n > max_tokens:
        raise ShapleyError(f"exact enumeration needs 2^{n} evaluations; limit is n <= {max_tokens}")
    if n == 0:
        v = float(np.asarray(fn(np.zeros((1, 0), dtype=bool)))[0])
        return ShapleyResult(np.zeros(0), v, v, 1)
    masks = all_coalitions(n)
    v = np.asarray(fn(masks), dtype=np.float64)
    if v.shape != (2 ** n,):
        raise ShapleyError(f"value function returned shape {v.shape}, expected ({2 ** n},)")
    sizes = masks.sum(axis=1)
    # weight for a coalition of size s that excludes the player
    w_by_size = np.array([factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)])
    codes = np.arange(2 ** n)
    phi = np.zeros(n)
    for i in range(n):
        without = codes[((codes >> i) & 1) == 0]
        marginal = v[without | (1 << i)] - v[without]
        phi[i] = np.sum(w_by_size[sizes[without]] * marginal)
    return ShapleyResult(phi, float(v[0]), float(v[-1]), 2 ** n)


def _coalition_design(n: int, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Coalitions and regression weights for KernelSHAP.

    Subset sizes are taken in pairs (s, n - s) from the ends inward; a size
    pair is enumerated completely while the remaining budget covers it in
    proportion to its kernel mass. Leftover budget is spent on paired random
    samples from the remaining sizes, each weighted by its share of the
    remaining kernel mass.
    """
    n_sizes = n // 2
    n_paired = (n - 1) // 2
    size_mass = np.array([(n - 1) / (s * (n - s)) for s in range(1, n_sizes + 1)])
    size_mass[:n_paired] *= 2
    size_mass /= size_mass.sum()

    masks: list[np.ndarray] = []
    weights: list[float] = []
    left = budget
    complete = 0
    for k in range(n_sizes):
        s = k + 1
        paired = k < n_paired
        count = comb(n, s) * (2 if paired else 1)
        share = size_mass[k] / size_mass[k:].sum()
        if left * share + 1e-9 < count:
            break
        per = size_mass[k] / count
        for idx in combinations(range(n), s):
            m = np.zeros(n, dtype=bool)
            m[list(idx)] = True
            masks.append(m)
            weights.append(per)
            if paired:
                masks.append(~m)
                weights.append(per)
        left -= count
        complete += 1

    if complete < n_sizes and left > 0:
        rest = size_mass[complete:]
        mass = rest.sum()
        probs = rest / mass
        seen: dict[bytes, int] = {}
        samples: list[np.ndarray] = []
        counts: list[float] = []
        while left > 0:
            s = complete + 1 + int(rng.choice(len(rest), p=probs))
            m = np.zeros(n, dtype=bool)
            m[rng.permutation(n)[:s]] = True
            for mm in ((m, ~m) if s <= n_paired and left > 1 else (m,)):
                key = mm.tobytes()
                if key in seen:
                    counts[seen[key]] += 1
                else:
                    seen[key] = len(samples)
                    samples.append(mm)
                    counts.append(1.0)
                left -= 1
        total = sum(counts)
        masks.extend(samples)
        weights.extend(c * mass / total for c in counts)
    return np.array(masks, dtype=bool).reshape(-1, n), np.array(weights)


def _constrained_wls(Z: np.ndarray, y: np.ndarray, w: np.ndarray, total: float) -> np.ndarray | None:
    """Weighted least squares for phi subject to sum(phi) = total.

    The last coordinate is eliminated: phi_n = total - sum(phi_<n).
    Returns None when the reduced system is rank deficient.
    """
    n = Z.shape[1]
    if n == 1:
        return np.array([total])
    A = Z[:, :-1].astype(np.float64) - Z[:, -1:].astype(np.float64)
    b = y - Z[:, -1].astype(np.float64) * total
    sw = np.sqrt(w)
    sol, _, rank, _ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    if rank < n - 1:
        return None
    return np.append(sol, total - sol.sum())


def kernel_shap(fn: ValueFunction, n: int, budget: int, seed: int = 0) -> ShapleyResult:
    """KernelSHAP with the efficiency constraint enforced exactly.

    ``budget`` counts coalitions besides the empty and full ones. With
    ``budget >= 2^n - 2`` every coalition is enumerated and the result is the
    exact Shapley value. A rank-deficient design is re-drawn once with twice
    the budget before raising.
    """
    if budget < 2 * n + 2:
        raise ShapleyError(f"budget {budget} below minimum {2 * n + 2} for n={n}")
    ends = np.asarray(fn(np.array([np.zeros(n, bool), np.ones(n, bool)])), dtype=np.float64)
    base, full = float(ends[0]), float(ends[1])
    if n <= 1:
        return ShapleyResult(np.full(n, full - base), base, full, 2)
    rng = np.random.default_rng(seed)
    for b in (budget, 2 * budget):
        Z, w = _coalition_design(n, min(b, 2 ** n - 2), rng)
        y = np.asarray(fn(Z), dtype=np.float64) - base
        phi = _constrained_wls(Z, y, w, full - base)
        if phi is not None:
            return ShapleyResult(phi, base, full, len(Z) + 2)
    raise ShapleyError("singular KernelSHAP regression after re-sampling with doubled budget")
