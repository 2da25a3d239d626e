"""LIME-style local linear surrogate over token-presence features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shapley import ValueFunction, all_coalitions


class DegeneratePerturbations(ValueError):
    pass


@dataclass
class SurrogateResult:
    coefficients: np.ndarray  # zero outside the selected features
    intercept: float
    r2: float
    selected: np.ndarray
    samples: int


def perturbation_masks(n: int, num_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Row 0 is the unperturbed instance; the rest switch off a uniform number of random tokens.

    When ``num_samples >= 2^n`` every mask is enumerated instead.
    """
    if num_samples >= 2 ** n:
        return all_coalitions(n)[::-1]
    masks = np.ones((num_samples, n), dtype=bool)
    for r in range(1, num_samples):
        k = int(rng.integers(1, n + 1))
        masks[r, rng.permutation(n)[:k]] = False
    return masks


def proximity_kernel(masks: np.ndarray, width: float) -> np.ndarray:
    """exp(-d^2 / width^2) with d the fraction of tokens switched off."""
    d = 1.0 - masks.mean(axis=1)
    if np.isinf(width):
        return np.ones(len(masks))
    return np.exp(-(d ** 2) / width ** 2)


def weighted_ridge(X: np.ndarray, y: np.ndarray, w: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    """Ridge with an unpenalized intercept, solved on weighted-centered data."""
    sw = w / w.sum()
    xm, ym = sw @ X, sw @ y
    Xc, yc = X - xm, y - ym
    A = Xc.T @ (Xc * w[:, None]) + alpha * np.eye(X.shape[1])
    coef = np.linalg.solve(A, Xc.T @ (w * yc))
    return coef, float(ym - xm @ coef)


def weighted_r2(X: np.ndarray, y: np.ndarray, w: np.ndarray, coef: np.ndarray, intercept: float) -> float:
    resid = y - (X @ coef + intercept)
    ym = (w @ y) / w.sum()
    ss_tot = float(w @ (y - ym) ** 2)
    ss_res = float(w @ resid ** 2)
    return 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot


def lime_explain(fn: ValueFunction, n: int, num_samples: int = 1000, num_features: int | None = None,
                 kernel_width: float = 0.25, seed: int = 0, alpha: float = 1e-3) -> SurrogateResult:
    """Fit a weighted ridge surrogate on random token maskings.

    The top ``num_features`` coefficients by magnitude are kept and the
    surrogate is refitted on those features alone.
    """
    num_features = n if num_features is None else num_features
    if not 0 < num_features <= n:
        raise ValueError(f"num_features must be in 1..{n}")
    masks = perturbation_masks(n, num_samples, np.random.default_rng(seed))
    if len(np.unique(masks, axis=0)) < 2:
        raise DegeneratePerturbations("all perturbation masks are identical")
    X = masks.astype(np.float64)
    y = np.asarray(fn(masks), dtype=np.float64)
    w = proximity_kernel(masks, kernel_width)
    coef, _ = weighted_ridge(X, y, w, alpha)
    # stable sort: equal magnitudes keep token order
    selected = np.sort(np.argsort(-np.abs(coef), kind="stable")[:num_features])
    sub, intercept = weighted_ridge(X[:, selected], y, w, alpha)
    full = np.zeros(n)
    full[selected] = sub
    return SurrogateResult(full, intercept, weighted_r2(X[:, selected], y, w, sub, intercept), selected, len(masks))
