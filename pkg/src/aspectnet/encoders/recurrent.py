"""LSTM, BiLSTM and GRU encoders.

Padding is handled by a masked state update: at a PAD step the cell keeps
its previous state, so right-padding changes neither direction's states at
real tokens (the reverse direction starts from zeros at the last real token).
Recurrent dropout draws one mask per sequence and reuses it at every step.
"""

from __future__ import annotations

import numpy as np

from ..gradcore import Module, Tensor, ops
from .layers import glorot


class _Cell(Module):
    gates = 1

    def __init__(self, rng: np.random.Generator, d_in: int, hidden: int):
        super().__init__()
        self.d_in, self.hidden = d_in, hidden
        g = self.gates * hidden
        self.w_in = self.add_param("w_in", glorot(rng, d_in, g))
        self.w_rec = self.add_param("w_rec", np.concatenate(
            [_orthogonal(rng, hidden) for _ in range(self.gates)], axis=1))
        self.bias = self.add_param("bias", self._init_bias())

    def _init_bias(self) -> np.ndarray:
        return np.zeros(self.gates * self.hidden)

    def run(self, x: Tensor, mask: np.ndarray, reverse: bool = False, rec_dropout: float = 0.0,
            rng: np.random.Generator | None = None) -> Tensor:
        """Run over ``x`` (B, T, d_in); returns hidden states (B, T, hidden)."""
        B, T, _ = x.shape
        xw = ops.add(ops.matmul(x, self.w_in), self.bias)
        rec_mask = None
        if self.training and rec_dropout > 0.0:
            rec_mask = ops.dropout_mask((B, self.hidden), rec_dropout, rng)
        state = self.initial_state(B)
        outputs: list[Tensor | None] = [None] * T
        steps = range(T - 1, -1, -1) if reverse else range(T)
        for t in steps:
            m = mask[:, t:t + 1].astype(np.float64)
            new = self.step(xw[:, t], state, rec_mask)
            if m.all():
                state = new
            else:
                state = tuple(ops.add(old, ops.mul(ops.sub(nw, old), m)) for old, nw in zip(state, new))
            outputs[t] = state[0]
        return ops.stack(outputs, axis=1)

    def initial_state(self, batch: int) -> tuple[Tensor, ...]:
        return (Tensor(np.zeros((batch, self.hidden))),)

    def step(self, xw_t, state, rec_mask):
        raise NotImplementedError


class LSTMCell(_Cell):
    gates = 4

    def _init_bias(self) -> np.ndarray:
        b = np.zeros(4 * self.hidden)
        b[self.hidden:2 * self.hidden] = 1.0  # forget gate
        return b

    def initial_state(self, batch: int):
        z = np.zeros((batch, self.hidden))
        return Tensor(z), Tensor(z.copy())

    def step(self, xw_t, state, rec_mask):
        h, c = state
        H = self.hidden
        h_in = h if rec_mask is None else ops.mul(h, rec_mask)
        z = ops.add(xw_t, ops.matmul(h_in, self.w_rec))
        i = ops.sigmoid(z[:, :H])
        f = ops.sigmoid(z[:, H:2 * H])
        g = ops.tanh(z[:, 2 * H:3 * H])
        o = ops.sigmoid(z[:, 3 * H:])
        c_new = ops.add(ops.mul(f, c), ops.mul(i, g))
        h_new = ops.mul(o, ops.tanh(c_new))
        return h_new, c_new


class GRUCell(_Cell):
    gates = 3

    def __init__(self, rng: np.random.Generator, d_in: int, hidden: int):
        super().__init__(rng, d_in, hidden)
        self.bias_rec = self.add_param("bias_rec", np.zeros(3 * hidden))

    def step(self, xw_t, state, rec_mask):
        (h,) = state
        H = self.hidden
        h_in = h if rec_mask is None else ops.mul(h, rec_mask)
        hu = ops.add(ops.matmul(h_in, self.w_rec), self.bias_rec)
        r = ops.sigmoid(ops.add(xw_t[:, :H], hu[:, :H]))
        u = ops.sigmoid(ops.add(xw_t[:, H:2 * H], hu[:, H:2 * H]))
        n = ops.tanh(ops.add(xw_t[:, 2 * H:], ops.mul(r, hu[:, 2 * H:])))
        # h' = (1 - u) * n + u * h
        return (ops.add(n, ops.mul(u, ops.sub(h, n))),)


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


class RecurrentEncoder(Module):
    """Stacked LSTM / BiLSTM / GRU over embedded tokens.

    Output width is ``hidden`` for LSTM and GRU, ``2 * hidden`` for BiLSTM.
    """

    KINDS = ("lstm", "bilstm", "gru")

    def __init__(self, rng: np.random.Generator, kind: str, d_in: int, hidden: int, layers: int = 2,
                 dropout: float = 0.3, recurrent_dropout: float = 0.2):
        super().__init__()
        if kind not in self.KINDS:
            raise ValueError(f"unknown recurrent kind {kind!r}")
        self.kind, self.hidden, self.layers = kind, hidden, layers
        self.dropout, self.recurrent_dropout = dropout, recurrent_dropout
        cell_cls = GRUCell if kind == "gru" else LSTMCell
        self.cells: list[list[_Cell]] = []
        width = d_in
        for layer in range(layers):
            fwd = self.add_child(f"l{layer}_fwd", cell_cls(rng, width, hidden))
            cells = [fwd]
            if kind == "bilstm":
                cells.append(self.add_child(f"l{layer}_bwd", cell_cls(rng, width, hidden)))
            self.cells.append(cells)
            width = hidden * len(cells)
        self.out_dim = width

    def __call__(self, x: Tensor, mask: np.ndarray, rng: np.random.Generator | None = None) -> Tensor:
        h = x
        for layer, cells in enumerate(self.cells):
            if layer > 0:
                h = ops.dropout(h, self.dropout, rng, training=self.training)
            outs = [cell.run(h, mask, reverse=(k == 1), rec_dropout=self.recurrent_dropout, rng=rng)
                    for k, cell in enumerate(cells)]
            h = outs[0] if len(outs) == 1 else ops.concat(outs, axis=-1)
        return h
