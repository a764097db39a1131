"""Compiled inner loops: lattice closest-point search and feedback quantiser loops."""
import numpy as np
from numba import njit

ZN = 0
DN = 1
E8 = 2


@njit(cache=True)
def _round(v):
    return np.floor(v + 0.5)


@njit(cache=True)
def _nearest_zn(x, out):
    for i in range(x.shape[0]):
        out[i] = _round(x[i])


@njit(cache=True)
def _nearest_dn(x, out):
    # Conway & Sloane: round, and if the coordinate sum is odd, re-round the
    # worst coordinate the other way
    n = x.shape[0]
    s = 0.0
    worst = 0
    worst_err = -1.0
    for i in range(n):
        r = _round(x[i])
        out[i] = r
        s += r
        e = abs(x[i] - r)
        if e > worst_err:
            worst_err = e
            worst = i
    if (s % 2.0) != 0.0:
        if x[worst] >= out[worst]:
            out[worst] += 1.0
        else:
            out[worst] -= 1.0


@njit(cache=True)
def _nearest_e8(x, out):
    n = x.shape[0]
    y0 = np.empty(n)
    y1 = np.empty(n)
    xs = np.empty(n)
    _nearest_dn(x, y0)
    for i in range(n):
        xs[i] = x[i] - 0.5
    _nearest_dn(xs, y1)
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        y1[i] += 0.5
        d0 += (x[i] - y0[i]) ** 2
        d1 += (x[i] - y1[i]) ** 2
    src = y0 if d0 <= d1 else y1
    for i in range(n):
        out[i] = src[i]


@njit(cache=True)
def nearest_unit(kind, x, out):
    if kind == ZN:
        _nearest_zn(x, out)
    elif kind == DN:
        _nearest_dn(x, out)
    else:
        _nearest_e8(x, out)


@njit(cache=True)
def nearest_batch(kind, scale, X):
    """Closest points of the lattice ``scale * L`` to each row of X."""
    m, n = X.shape
    out = np.empty((m, n))
    xr = np.empty(n)
    pr = np.empty(n)
    for r in range(m):
        for i in range(n):
            xr[i] = X[r, i] / scale
        nearest_unit(kind, xr, pr)
        for i in range(n):
            out[r, i] = pr[i] * scale
    return out


@njit(cache=True)
def feedback_bank_loop(kind, scale, ax, f, dither):
    """Run P noise-feedback loops sharing one lattice quantiser.

    ax      (T, P)  A-filtered source for each of the P loops
    f       (L,)    strictly causal feedback taps, f[0] ignored
    dither  (T, P)  subtractive dither vectors
    Returns channel inputs v, channel errors w and lattice points p, each (T, P).
    """
    T, P = ax.shape
    L = f.shape[0]
    v = np.empty((T, P))
    w = np.empty((T, P))
    pts = np.empty((T, P))
    xq = np.empty(P)
    pq = np.empty(P)
    for k in range(T):
        top = min(L - 1, k)
        for i in range(P):
            fb = 0.0
            for m in range(1, top + 1):
                fb += f[m] * w[k - m, i]
            v[k, i] = ax[k, i] - fb
            xq[i] = (v[k, i] + dither[k, i]) / scale
        nearest_unit(kind, xq, pq)
        for i in range(P):
            pts[k, i] = pq[i] * scale
            w[k, i] = pts[k, i] - dither[k, i] - v[k, i]
    return v, w, pts


@njit(cache=True)
def feedback_transform_loop(scale, u, F, dither):
    """Blockwise error-feedback transform coder with a scalar uniform quantiser.

    u       (B, N)  transformed blocks A x
    F       (N, N)  strictly lower-triangular feedback matrix
    dither  (B, N)
    """
    B, N = u.shape
    v = np.empty((B, N))
    w = np.empty((B, N))
    pts = np.empty((B, N))
    for b in range(B):
        for k in range(N):
            fb = 0.0
            for j in range(k):
                fb += F[k, j] * w[b, j]
            v[b, k] = u[b, k] - fb
            p = _round((v[b, k] + dither[b, k]) / scale) * scale
            pts[b, k] = p
            w[b, k] = p - dither[b, k] - v[b, k]
    return v, w, pts
