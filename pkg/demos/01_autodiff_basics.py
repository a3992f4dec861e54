"""
Reverse-mode gradients on a tape
================================

Record a computation, then pull gradients back through it.  The check at
the end compares the tape against central finite differences.
"""

import numpy as np

from brgm import autodiff as ad
from brgm.errors import ShapeMismatch

###############################################################################
# Operations on watched tensors are recorded while the tape is open.

with ad.Tape() as tape:
    x = tape.watch(np.array([0.5, -1.0, 2.0]))
    k = tape.watch(np.array([[1.0, 0.0, -1.0]]))
    y = ad.tsum(ad.softplus(ad.matmul(k, x))) * 3.0 + ad.tsum(ad.square(x))

gx, gk = tape.gradient(y, [x, k])
print("value", y.item())
print("d/dx", gx.data)
print("d/dk", gk.data)

###############################################################################
# Compare with finite differences.


def f(v):
    return (ad.tsum(ad.softplus(ad.matmul(k.data, v))) * 3.0 + ad.tsum(ad.square(v))).item()


h = 1e-6
num = np.array([(f(x.data + h * e) - f(x.data - h * e)) / (2 * h) for e in np.eye(3)])
print("max abs difference", np.max(np.abs(num - gx.data)))

###############################################################################
# Only scalars broadcast implicitly; anything else needs ``broadcast_to``.

try:
    ad.add(np.ones((2, 3)), np.ones(3))
except ShapeMismatch as exc:
    print("refused:", exc)
print(ad.add(np.ones((2, 3)), ad.broadcast_to(np.ones(3), (2, 3))).data)
