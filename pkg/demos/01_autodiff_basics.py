"""A tour of the tensor engine: values, gradients, and the straight-through trick.

Run:  python demos/01_autodiff_basics.py
"""
import numpy as np

from latentanm import autodiff as ad
from latentanm.autodiff import Tensor

print("== scalar chain rule ==")
x = Tensor([1.0, 2.0, 3.0])
loss = ad.tensor_sum(ad.square(x))
ad.backward(loss)
print("loss sum(x^2) =", loss.item())
print("grad (expect 2x):", x.grad)

print("\n== gradients accumulate across consumers ==")
x = Tensor([0.5, -0.7])
y = ad.add(ad.tensor_sum(ad.square(x)), ad.tensor_sum(ad.square(x)))
ad.backward(y)
print("f(x)+f(x) grad (expect 4x):", x.grad)

print("\n== smooth activations ==")
for name, fn in [("tanh", ad.tanh), ("silu", ad.silu), ("gelu", ad.gelu), ("sigmoid", ad.sigmoid)]:
    t = Tensor([1.0])
    out = fn(t)
    ad.backward(ad.tensor_sum(out))
    print(f"{name}(1.0) = {out.item():.6f}   d/dx = {t.grad[0]:.6f}")

print("\n== temperature softmax ==")
logits = Tensor([2.0, 1.0, 0.0])
for tau in (2.0, 0.5, 0.1):
    probs = ad.softmax_temp(logits, tau=tau, axis=0)
    print(f"tau={tau:>4}: {np.round(probs.data, 4)}")

print("\n== straight-through estimator ==")
logits = Tensor([-1.0, 0.3, 2.0])
soft = ad.sigmoid(logits)
hard = (soft.data > 0.5).astype(float)
gated = ad.straight_through(hard, soft)
ad.backward(ad.tensor_sum(gated))
print("forward (hard):   ", gated.data)
print("grad on logits (soft path):", np.round(logits.grad, 4))

print("\n== analytic vs central finite differences ==")
w = Tensor(np.random.default_rng(0).normal(size=(3, 2)))
v = np.random.default_rng(1).normal(size=(4, 3))


def loss_fn():
    return ad.tensor_sum(ad.tanh(ad.matmul(Tensor(v), w)))


ad.backward(loss_fn())
step = 1e-5
fd = np.zeros_like(w.data)
for i in range(3):
    for j in range(2):
        w.data[i, j] += step
        hi = loss_fn().item()
        w.data[i, j] -= 2 * step
        lo = loss_fn().item()
        w.data[i, j] += step
        fd[i, j] = (hi - lo) / (2 * step)
print("max |analytic - fd| =", np.max(np.abs(w.grad - fd)))
