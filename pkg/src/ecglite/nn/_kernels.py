"""numba kernels for the two memory-bound hot spots: max pooling and col2im.

Each has a pure-numpy twin in layers.py used as the correctness oracle in
tests; semantics (first argmax on ties, exact accumulation order) match.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def maxpool_forward(x, pool, stride, out, argmax):
    B, C, L = x.shape
    L_out = out.shape[2]
    for b in range(B):
        for c in range(C):
            for t in range(L_out):
                s = t * stride
                best = x[b, c, s]
                arg = 0
                for k in range(1, pool):
                    v = x[b, c, s + k]
                    if v > best:
                        best = v
                        arg = k
                out[b, c, t] = best
                argmax[b, c, t] = arg


@njit(cache=True)
def maxpool_backward(dy, argmax, stride, dx):
    B, C, L_out = dy.shape
    for b in range(B):
        for c in range(C):
            for t in range(L_out):
                dx[b, c, t * stride + argmax[b, c, t]] += dy[b, c, t]


@njit(cache=True)
def col2im(dcols, dx):
    """Accumulate window gradients [B, L_out, C, K] into the input [B, C, L]."""
    B, L_out, C, K = dcols.shape
    for b in range(B):
        for t in range(L_out):
            for c in range(C):
                for k in range(K):
                    dx[b, c, t + k] += dcols[b, t, c, k]
