"""Compiled pair-summation loops over an offset stencil.

Each loop parallelizes over the first grid index. Every slab accumulates its
own compensated partial sums, and the caller merges slabs with an exactly
rounded sum, so the result does not depend on the thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .summation import kahan_add


@njit(cache=True, parallel=True)
def fused_slab_sums(m, offsets, wf, wh, wt):
    """Per-slab sums of the three pair terms over the half stencil.

    For the unordered pair ``x``, ``y = x + o``:
      f: ``wf[o] |m_x - m_y|^2``
      h: ``wh[o] . (m_x x m_y)``
      c: ``Q_o(m_x) + Q_o(m_y)`` with ``Q_o(v) = |v|^2 tr T - v.T v`` and
         ``T`` packed as (xx, yy, zz, xy, xz, yz) in ``wt[o]``.
    """
    n1, n2, n3 = m.shape[0], m.shape[1], m.shape[2]
    nq = offsets.shape[0]
    out = np.zeros((n1, 3))
    for i in prange(n1):
        fs = 0.0
        fc = 0.0
        hs = 0.0
        hc = 0.0
        cs = 0.0
        cc = 0.0
        for q in range(nq):
            di = offsets[q, 0]
            dj = offsets[q, 1]
            dk = offsets[q, 2]
            ii = i + di
            if ii < 0 or ii >= n1:
                continue
            j0 = max(0, -dj)
            j1 = min(n2, n2 - dj)
            k0 = max(0, -dk)
            k1 = min(n3, n3 - dk)
            a = wf[q]
            w0 = wh[q, 0]
            w1 = wh[q, 1]
            w2 = wh[q, 2]
            txx = wt[q, 0]
            tyy = wt[q, 1]
            tzz = wt[q, 2]
            txy = wt[q, 3]
            txz = wt[q, 4]
            tyz = wt[q, 5]
            tr = txx + tyy + tzz
            for j in range(j0, j1):
                jj = j + dj
                for k in range(k0, k1):
                    kk = k + dk
                    x0 = m[i, j, k, 0]
                    x1 = m[i, j, k, 1]
                    x2 = m[i, j, k, 2]
                    y0 = m[ii, jj, kk, 0]
                    y1 = m[ii, jj, kk, 1]
                    y2 = m[ii, jj, kk, 2]
                    e0 = x0 - y0
                    e1 = x1 - y1
                    e2 = x2 - y2
                    fs, fc = kahan_add(fs, fc, a * (e0 * e0 + e1 * e1 + e2 * e2))
                    c0 = x1 * y2 - x2 * y1
                    c1 = x2 * y0 - x0 * y2
                    c2 = x0 * y1 - x1 * y0
                    hs, hc = kahan_add(hs, hc, w0 * c0 + w1 * c1 + w2 * c2)
                    qx = (x0 * x0 + x1 * x1 + x2 * x2) * tr - (
                        txx * x0 * x0 + tyy * x1 * x1 + tzz * x2 * x2
                        + 2.0 * (txy * x0 * x1 + txz * x0 * x2 + tyz * x1 * x2)
                    )
                    qy = (y0 * y0 + y1 * y1 + y2 * y2) * tr - (
                        txx * y0 * y0 + tyy * y1 * y1 + tzz * y2 * y2
                        + 2.0 * (txy * y0 * y1 + txz * y0 * y2 + tyz * y1 * y2)
                    )
                    cs, cc = kahan_add(cs, cc, qx + qy)
        out[i, 0] = fs + fc
        out[i, 1] = hs + hc
        out[i, 2] = cs + cc
    return out


@njit(cache=True, parallel=True)
def pair_gradient(m, offsets, wf, wd):
    """Gradient of ``sum_x sum_o [wf_o |m_x - m_{x+o}|^2 + wd_o . (m_x x m_{x+o})]``
    over the full (symmetric) stencil, with ``wf`` even and ``wd`` odd in ``o``.

    d/dm_x = sum_o 4 wf_o (m_x - m_{x+o}) + 2 m_{x+o} x wd_o
    """
    n1, n2, n3 = m.shape[0], m.shape[1], m.shape[2]
    nq = offsets.shape[0]
    g = np.zeros_like(m)
    for i in prange(n1):
        for j in range(n2):
            for k in range(n3):
                x0 = m[i, j, k, 0]
                x1 = m[i, j, k, 1]
                x2 = m[i, j, k, 2]
                g0 = 0.0
                g1 = 0.0
                g2 = 0.0
                for q in range(nq):
                    ii = i + offsets[q, 0]
                    jj = j + offsets[q, 1]
                    kk = k + offsets[q, 2]
                    if ii < 0 or ii >= n1 or jj < 0 or jj >= n2 or kk < 0 or kk >= n3:
                        continue
                    y0 = m[ii, jj, kk, 0]
                    y1 = m[ii, jj, kk, 1]
                    y2 = m[ii, jj, kk, 2]
                    a = 4.0 * wf[q]
                    w0 = wd[q, 0]
                    w1 = wd[q, 1]
                    w2 = wd[q, 2]
                    g0 += a * (x0 - y0) + 2.0 * (y1 * w2 - y2 * w1)
                    g1 += a * (x1 - y1) + 2.0 * (y2 * w0 - y0 * w2)
                    g2 += a * (x2 - y2) + 2.0 * (y0 * w1 - y1 * w0)
                g[i, j, k, 0] = g0
                g[i, j, k, 1] = g1
                g[i, j, k, 2] = g2
    return g
