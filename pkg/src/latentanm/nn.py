"""Small feed-forward building blocks on top of the autodiff engine."""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ACTIVATIONS = {
    "tanh": ad.tanh,
    "silu": ad.silu,
    "gelu": ad.gelu,
    "relu": ad.relu,
    "identity": lambda t: t,
}


def activation_fn(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation '{name}'; choose from {sorted(ACTIVATIONS)}") from None


class Linear:
    def __init__(self, n_in, n_out, rng):
        bound = np.sqrt(6.0 / (n_in + n_out))
        self.weight = Tensor(rng.uniform(-bound, bound, size=(n_in, n_out)))
        self.bias = Tensor(np.zeros(n_out))

    def __call__(self, x):
        return ad.add(ad.matmul(x, self.weight), self.bias)

    def parameters(self):
        return [self.weight, self.bias]


class MLP:
    """Fully connected stack: hidden layers use ``activation``, output is linear."""

    def __init__(self, sizes, activation, rng):
        if len(sizes) < 2:
            raise ValueError("MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.activation = activation
        self._act = activation_fn(activation)
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]

    def __call__(self, x):
        h = ad.as_tensor(x)
        for layer in self.layers[:-1]:
            h = self._act(layer(h))
        return self.layers[-1](h)

    def forward_values(self, x):
        """Plain numpy forward pass (no tape); used on inference paths."""
        return self(Tensor(np.asarray(x, dtype=np.float64))).data

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

