"""A quick tour of the tensor library: build a graph, backprop, check it.

Run from the repository root:  python3 demos/demo_autodiff.py
"""

import numpy as np

from anglseg.nnops import ConvSpec, conv2d
from anglseg.tensor import Tensor, mul, relu, sum_all

rng = np.random.default_rng(0)

# a tiny computation: y = sum(relu(conv(x, w) * g))
x = Tensor(rng.normal(size=(1, 2, 6, 6)), requires_grad=True)
w = Tensor(rng.normal(size=(3, 2, 3, 3)) * 0.5, requires_grad=True)
b = Tensor(np.zeros(3), requires_grad=True)
g = Tensor(rng.normal(size=(1, 3, 6, 6)), requires_grad=True)

spec = ConvSpec(in_channels=2, out_channels=3, kernel=(3, 3), padding=1)
y = sum_all(relu(mul(conv2d(x, w, b, spec), g)))
print("forward value:", y.data.item())

y.backward()
print("x grad shape:", x.grad.shape, " w grad shape:", w.grad.shape)

# verify one weight gradient by central differences
i = (1, 0, 2, 2)
eps = 1e-5
wp = w.data.copy(); wp[i] += eps
wm = w.data.copy(); wm[i] -= eps
zb = Tensor(np.zeros(3))
yp = sum_all(relu(mul(conv2d(Tensor(x.data), Tensor(wp), zb, spec),
                      Tensor(g.data))))
ym = sum_all(relu(mul(conv2d(Tensor(x.data), Tensor(wm), zb, spec),
                      Tensor(g.data))))
fd = (yp.data.item() - ym.data.item()) / (2 * eps)
print(f"w grad at {i}: analytic {w.grad[i]:+.6f}  finite-diff {fd:+.6f}")

# gradients accumulate until cleared, like any define-by-run tape
y2 = sum_all(mul(x, x))
y2.backward()
print("after a second backward, x.grad holds the sum of both passes:",
      float(np.abs(x.grad).sum()))
