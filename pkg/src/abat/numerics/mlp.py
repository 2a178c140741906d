"""Feed-forward feature encoder with unit-normalized outputs."""

from __future__ import annotations

import numpy as np

from . import tape as T


class FeatureEncoder:
    """MLP: affine + ReLU hidden layers, affine output, row l2-normalization.

    Produces features z with ||z||_2 = 1 per row, so cosine similarity
    against unit anchors is a plain inner product.
    """

    def __init__(self, layer_dims: list[int], seed: int = 0):
        if len(layer_dims) < 2:
            raise ValueError("layer_dims must list at least input and output sizes")
        if any(d < 1 for d in layer_dims):
            raise ValueError(f"layer sizes must be positive, got {layer_dims}")
        self.layer_dims = [int(d) for d in layer_dims]
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.weights: list[T.Tensor] = []
        self.biases: list[T.Tensor] = []
        for fan_in, fan_out in zip(self.layer_dims, self.layer_dims[1:]):
            w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
            # small nonzero bias keeps the pre-normalization row nonzero even
            # when an input silences the whole ReLU stack
            b = rng.standard_normal(fan_out) * 0.01
            self.weights.append(T.Tensor(w, requires_grad=True))
            self.biases.append(T.Tensor(b, requires_grad=True))

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[T.Tensor]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def forward(self, tape: T.Tape, x: T.Tensor) -> T.Tensor:
        """Tape-tracked forward pass: (B, in_dim) -> unit rows (B, out_dim)."""
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise T.NumericsError(
                f"encoder expects (B, {self.in_dim}) inputs, got {x.data.shape}"
            )
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = T.dense(tape, h, w, b, activate=i != last)
        return T.l2_normalize(tape, h)

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Plain-array forward for evaluation paths (same kernels, no grads)."""
        return self.forward(T.Tape(), T.Tensor(x)).data

    def state(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "seed": self.seed,
            "params": np.concatenate([p.data.ravel() for p in self.parameters()]).tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "FeatureEncoder":
        enc = cls(state["layer_dims"], seed=state.get("seed", 0))
        flat = np.asarray(state["params"], dtype=np.float64)
        offset = 0
        for p in enc.parameters():
            n = p.data.size
            if offset + n > flat.size:
                raise ValueError("parameter blob shorter than architecture requires")
            p.data = flat[offset : offset + n].reshape(p.data.shape).copy()
            offset += n
        if offset != flat.size:
            raise ValueError("parameter blob longer than architecture requires")
        return enc
