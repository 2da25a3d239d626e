"""Ensemble weights on the simplex: combination and validation-set learning.

Weights are softmax-parameterized, so every coefficient vector is
nonnegative and sums to one by construction. Three modes:

* ``static``   one coefficient vector shared by all inputs;
* ``bucketed`` one vector per length bucket (short / medium / long);
* ``gated``    a two-layer network mapping the input features to a vector.

The learning objective is validation cross-entropy of the mixture minus
``lambda_diversity`` times a diversity term
``D(w) = sum_{i != j} w_i w_j (1 - rho_ij)``, where ``rho_ij`` is the Pearson
correlation between the probability outputs of components i and j.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..encoders.model import COMPONENTS, ModelPrediction
from ..encoders.optim import Adam
from ..gradcore import Tensor, no_grad, ops
from .features import BUCKETS, InputFeatures

MODES = ("static", "bucketed", "gated")
SIMPLEX_TOL = 1e-9

# Published dynamic weight table, columns in COMPONENTS order
# (transformer, bilstm, lstm, gru).
PUBLISHED_BUCKET_WEIGHTS = np.array([
    [0.25, 0.30, 0.25, 0.20],
    [0.40, 0.25, 0.20, 0.15],
    [0.45, 0.20, 0.20, 0.15],
])


class SimplexError(ValueError):
    pass


def check_simplex(w: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < -tol) or np.any(np.abs(w.sum(axis=-1) - 1.0) > tol):
        raise SimplexError(f"weights off the simplex: {w}")


@dataclass
class EnsembleWeights:
    mode: str
    params: dict[str, np.ndarray]
    components: tuple[str, ...] = COMPONENTS
    trace: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown ensemble mode {self.mode!r}")

    @classmethod
    def uniform(cls, mode: str = "static", components=COMPONENTS, hidden: int = 8,
                rng: np.random.Generator | None = None) -> "EnsembleWeights":
        k = len(components)
        if mode == "static":
            params = {"logits": np.zeros(k)}
        elif mode == "bucketed":
            params = {"logits": np.zeros((len(BUCKETS), k))}
        else:
            rng = rng or np.random.default_rng(0)
            params = {"w1": rng.normal(0, 0.5, size=(3, hidden)), "b1": np.zeros(hidden),
                      "w2": np.zeros((hidden, k)), "b2": np.zeros(k)}
        return cls(mode, params, tuple(components))

    @classmethod
    def from_coefficients(cls, coefficients, mode: str = "static", components=COMPONENTS) -> "EnsembleWeights":
        c = np.asarray(coefficients, dtype=np.float64)
        check_simplex(c)
        return cls(mode, {"logits": np.log(np.clip(c, 1e-300, None))}, tuple(components))

    @classmethod
    def published(cls) -> "EnsembleWeights":
        return cls.from_coefficients(PUBLISHED_BUCKET_WEIGHTS, mode="bucketed")

    def _tensor_coefficients(self, params: dict[str, Tensor], features: InputFeatures | None, n: int) -> Tensor:
        if self.mode == "static":
            return ops.softmax(params["logits"])
        if features is None:
            raise ValueError(f"{self.mode} weights need input features")
        if self.mode == "bucketed":
            return ops.softmax(ops.embedding_lookup(params["logits"], features.bucket), axis=-1)
        hidden = ops.tanh(ops.add(ops.matmul(Tensor(features.matrix()), params["w1"]), params["b1"]))
        return ops.softmax(ops.add(ops.matmul(hidden, params["w2"]), params["b2"]), axis=-1)

    def coefficients(self, features: InputFeatures | None = None, n: int | None = None) -> np.ndarray:
        """(K,) for static mode, (N, K) otherwise."""
        with no_grad():
            c = self._tensor_coefficients({k: Tensor(v) for k, v in self.params.items()}, features, n).data
        return c

    def per_sample(self, features: InputFeatures | None, n: int) -> np.ndarray:
        c = self.coefficients(features, n)
        return np.broadcast_to(c, (n, len(self.components))) if c.ndim == 1 else c

    def to_dict(self) -> dict:
        return {"mode": self.mode, "components": list(self.components),
                "params": {k: np.asarray(v).tolist() for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleWeights":
        return cls(d["mode"], {k: np.array(v, dtype=np.float64) for k, v in d["params"].items()},
                   tuple(d["components"]))

    def table_csv(self) -> str:
        """Bucket x component weight table (one row for static mode)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["input_characteristics", *self.components])
        if self.mode == "static":
            w.writerow(["all", *(f"{x:.6f}" for x in self.coefficients())])
        elif self.mode == "bucketed":
            for name, row in zip(BUCKETS, self.coefficients(_bucket_probe())):
                w.writerow([name, *(f"{x:.6f}" for x in row)])
        else:
            raise ValueError("gated weights depend on every feature; no fixed table")
        return buf.getvalue()


def _bucket_probe() -> InputFeatures:
    return InputFeatures(np.array([5.0, 15.0, 25.0]), np.zeros(3), np.zeros(3))


# -- combination -----------------------------------------------------------------


def stack_probs(predictions) -> np.ndarray:
    """List of K ModelPredictions (or arrays) -> (K, N, A, C)."""
    return np.stack([p.probs if isinstance(p, ModelPrediction) else np.asarray(p) for p in predictions])


def combine(predictions, weights, space: str = "prob") -> ModelPrediction:
    """Weighted average of component outputs.

    ``weights`` is (K,) or per-sample (N, K) and must lie on the simplex.
    ``space="prob"`` averages probabilities (weighted voting); ``"logit"``
    averages log-probabilities and renormalizes.
    """
    P = stack_probs(predictions)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[-1] != P.shape[0]:
        raise ValueError(f"{w.shape[-1]} weights for {P.shape[0]} components")
    check_simplex(w)
    if w.ndim == 1:
        wk = w.reshape((-1,) + (1,) * (P.ndim - 1))
    else:
        wk = w.T.reshape(w.shape[::-1] + (1,) * (P.ndim - 2))
    if space == "prob":
        return ModelPrediction.from_probs((wk * P).sum(axis=0))
    if space == "logit":
        logits = (wk * np.log(np.clip(P, 1e-300, None))).sum(axis=0)
        return ModelPrediction.from_logits(logits)
    raise ValueError(f"unknown combination space {space!r}")


# -- learning ----------------------------------------------------------------------


def correlation_matrix(P: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Pearson correlation between components' probability vectors on annotated cells."""
    sel = mask.astype(bool)
    flat = np.stack([p[sel].reshape(-1) for p in P])
    k = flat.shape[0]
    rho = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            a, b = flat[i], flat[j]
            sa, sb = a.std(), b.std()
            if sa == 0 or sb == 0:
                r = 1.0 if np.array_equal(a, b) else 0.0
            else:
                r = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
            rho[i, j] = rho[j, i] = r
    return rho


def ensemble_objective(weights: EnsembleWeights, params: dict[str, Tensor], P: np.ndarray, labels: np.ndarray,
                       mask: np.ndarray, lambda_diversity: float, features: InputFeatures | None,
                       rho: np.ndarray | None = None) -> tuple[Tensor, Tensor, Tensor]:
    """(objective, cross_entropy, diversity) as tensors."""
    K, N = P.shape[:2]
    truth = np.take_along_axis(P, np.broadcast_to(labels[None, ..., None], (K, *labels.shape, 1)), axis=-1)[..., 0]
    truth = np.clip(np.moveaxis(truth, 0, -1), 1e-300, None)  # (N, A, K)
    coef = weights._tensor_coefficients(params, features, N)
    if coef.ndim == 1:
        q = ops.sum(ops.mul(Tensor(truth), coef), axis=-1)
    else:
        q = ops.sum(ops.mul(Tensor(truth), ops.reshape(coef, (N, 1, K))), axis=-1)
    m = mask.astype(np.float64)
    ce = ops.mul(ops.sum(ops.mul(ops.log(q), m)), -1.0 / m.sum())
    if rho is None:
        rho = correlation_matrix(P, mask)
    dis = 1.0 - rho
    np.fill_diagonal(dis, 0.0)
    if coef.ndim == 1:
        div = ops.sum(ops.mul(ops.matmul(ops.reshape(coef, (1, K)), Tensor(dis)), ops.reshape(coef, (1, K))))
    else:
        div = ops.mean(ops.sum(ops.mul(ops.matmul(coef, Tensor(dis)), coef), axis=-1))
    return ops.sub(ce, ops.mul(div, lambda_diversity)), ce, div


def learn_weights(predictions, labels: np.ndarray, mask: np.ndarray, lambda_diversity: float = 0.1,
                  mode: str = "static", features: InputFeatures | None = None, steps: int = 300,
                  lr: float = 0.05, seed: int = 0, components=COMPONENTS,
                  init: EnsembleWeights | None = None, shrinkage: float = 0.01) -> EnsembleWeights:
    """Fit ensemble weights on cached validation predictions by Adam on the softmax logits.

    ``shrinkage`` adds an L2 penalty on the logits (the gate's output layer in
    gated mode), pulling the coefficients toward uniform; small validation
    sets otherwise let the most confident member take nearly all the weight.
    The simplex invariant is asserted after every step; the per-step
    objective is kept in ``trace``.
    """
    P = stack_probs(predictions)
    if P.shape[1] == 0 or np.asarray(mask).sum() == 0:
        raise ValueError("validation set is empty")
    weights = init if init is not None else EnsembleWeights.uniform(mode, components, rng=np.random.default_rng(seed))
    weights = EnsembleWeights(weights.mode, {k: np.array(v) for k, v in weights.params.items()}, weights.components)
    params = {k: Tensor(v.copy(), requires_grad=True) for k, v in weights.params.items()}
    opt = Adam(list(params.items()), lr=lr)
    rho = correlation_matrix(P, mask)
    trace = []
    for _ in range(steps):
        opt.zero_grad()
        obj, _, _ = ensemble_objective(weights, params, P, labels, mask, lambda_diversity, features, rho)
        if shrinkage:
            for name in _shrunk(weights.mode):
                obj = ops.add(obj, ops.mul(ops.sum(ops.mul(params[name], params[name])), shrinkage))
        value = obj.item()
        if not np.isfinite(value):
            raise FloatingPointError("non-finite ensemble objective")
        trace.append(value)
        obj.backward()
        opt.step()
        weights.params = {k: p.data.copy() for k, p in params.items()}
        check_simplex(weights.coefficients(features, P.shape[1]))
    with no_grad():
        final, _, _ = ensemble_objective(weights, params, P, labels, mask, lambda_diversity, features, rho)
    trace.append(final.item())
    weights.trace = trace
    return weights


def _shrunk(mode: str) -> tuple[str, ...]:
    # parameters whose zero point is the uniform coefficient vector
    return ("logits",) if mode in ("static", "bucketed") else ("w2", "b2")
