"""Reference numpy implementation of the encoder hot-path kernels.

Always available; the compiled extension in ``_ckernels.pyx`` mirrors these
signatures exactly and is preferred at import time when present.
"""

import numpy as np

name = "numpy"


def matmul_fwd(a, b):
    return a @ b


def matmul_bwd(g, a, b):
    return g @ b.T, a.T @ g


def dense_fwd(x, w, b, activate):
    out = x @ w
    out += b
    if activate:
        np.maximum(out, 0.0, out=out)
    return out


def dense_bwd(g, x, w, out, activate):
    gm = g * (out > 0.0) if activate else g
    return gm @ w.T, x.T @ gm, gm.sum(axis=0)


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(g, x):
    return g * (x > 0.0)


def l2norm_fwd(x):
    norms = np.linalg.norm(x, axis=1)
    return x / norms[:, None], norms


def l2norm_bwd(g, z, norms):
    radial = np.sum(g * z, axis=1, keepdims=True)
    return (g - radial * z) / norms[:, None]


def logsumexp_fwd(x):
    m = np.max(x, axis=1)
    return m + np.log(np.sum(np.exp(x - m[:, None]), axis=1))


def logsumexp_bwd(g, x, lse):
    return g[:, None] * np.exp(x - lse[:, None])
