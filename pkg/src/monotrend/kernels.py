"""Inner loops shared by the isotonic fitter and the Monte Carlo samplers.

Two interchangeable backends are built from this module:

``NUMBA``
    the loop kernels compiled with ``numba.njit`` (``nogil`` so worker
    threads can overlap).
``NUMPY``
    the same kernels run as plain Python over numpy arrays, with the loops
    that vectorize cleanly (Brownian argmin, penalized supremum, AR(1)
    recursion) rewritten in array form.

The module-level names (``gcm_knots``, ``pava`` ...) are bound to the active
backend.  Numba is used when it imports and ``MONOTREND_DISABLE_NUMBA`` is
unset or false; set it to ``1`` to force the numpy path.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np
from scipy.signal import lfilter

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


# ---------------------------------------------------------------------------
# loop kernels (valid both as plain Python and as numba nopython source)
# ---------------------------------------------------------------------------


def _compensated_cumsum(y):
    """Prefix sums ``[0, y0, y0+y1, ...]`` with Neumaier compensation."""
    n = y.shape[0]
    out = np.empty(n + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i in range(n):
        v = y[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i + 1] = s + c
    return out


def _gcm_knots(x, y):
    """Indices of the points where the greatest convex minorant touches.

    Single left-to-right stack pass; a point is popped only when the newer
    segment is strictly flatter than the one before it, so collinear points
    stay as knots.
    """
    m = x.shape[0]
    stack = np.empty(m, dtype=np.int64)
    top = 0
    stack[0] = 0
    for i in range(1, m):
        while top >= 1:
            a = stack[top - 1]
            b = stack[top]
            old = (y[b] - y[a]) / (x[b] - x[a])
            new = (y[i] - y[b]) / (x[i] - x[b])
            if new < old:
                top -= 1
            else:
                break
        top += 1
        stack[top] = i
    return stack[: top + 1].copy()


def _knot_slopes(x, y, knots):
    """Left-hand slope at every abscissa after the first."""
    out = np.empty(x.shape[0] - 1)
    for j in range(1, knots.shape[0]):
        a = knots[j - 1]
        b = knots[j]
        slope = (y[b] - y[a]) / (x[b] - x[a])
        for i in range(a, b):
            out[i] = slope
    return out


def _pava(y, w):
    n = y.shape[0]
    sums = np.empty(n)
    wts = np.empty(n)
    starts = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        sums[top] = w[i] * y[i]
        wts[top] = w[i]
        starts[top] = i
        while top >= 1 and sums[top - 1] / wts[top - 1] > sums[top] / wts[top]:
            sums[top - 1] += sums[top]
            wts[top - 1] += wts[top]
            top -= 1
    out = np.empty(n)
    for b in range(top + 1):
        end = starts[b + 1] if b < top else n
        level = sums[b] / wts[b]
        for j in range(starts[b], end):
            out[j] = level
    return out


def _ar1_filter_loop(x0, eps, rho):
    n = eps.shape[0]
    out = np.empty(n)
    prev = x0
    for k in range(n):
        prev = rho * prev + eps[k]
        out[k] = prev
    return out


def _chernoff_argmin_loop(left, right, step):
    """Signed grid index of argmin of W(s) + s^2; ties go to the smallest s.

    ``left[k]`` is the increment from -k*step to -(k+1)*step, ``right[k]``
    from k*step to (k+1)*step.
    """
    best = 0.0
    best_k = 0
    w = 0.0
    for k in range(1, left.shape[0] + 1):
        w += left[k - 1]
        s = k * step
        val = w + s * s
        if val <= best:
            best = val
            best_k = -k
    w = 0.0
    for k in range(1, right.shape[0] + 1):
        w += right[k - 1]
        s = k * step
        val = w + s * s
        if val < best:
            best = val
            best_k = k
    return best_k


def _gcm_slope_at_loop(s, z, i0):
    """Left derivative at ``s[i0]`` of the minorant of (s, z), plus the
    index of the knot where that segment starts."""
    knots = _gcm_knots(s, z)
    j = 1
    while knots[j] < i0:
        j += 1
    a = knots[j - 1]
    b = knots[j]
    return (z[b] - z[a]) / (s[b] - s[a]), a


def _penalized_sup_loop(w, step, sigma, offset, half_curv):
    """max over t_k = (k+1)*step of (sigma*w[k] - offset - half_curv*t^2)/t."""
    best = -np.inf
    best_k = 0
    for k in range(w.shape[0]):
        t = (k + 1) * step
        val = (sigma * w[k] - offset - half_curv * t * t) / t
        if val > best:
            best = val
            best_k = k
    return best, best_k


# ---------------------------------------------------------------------------
# vectorized numpy versions
# ---------------------------------------------------------------------------


def _ar1_filter_np(x0, eps, rho):
    eps = np.asarray(eps, dtype=float)
    if eps.shape[0] == 0:
        return np.empty(0)
    out, _ = lfilter([1.0], [1.0, -rho], eps, zi=[rho * x0])
    return out


def _chernoff_argmin_np(left, right, step):
    nl = left.shape[0]
    kl = np.arange(1, nl + 1) * step
    kr = np.arange(1, right.shape[0] + 1) * step
    vl = np.cumsum(left) + kl * kl
    vr = np.cumsum(right) + kr * kr
    vals = np.concatenate((vl[::-1], [0.0], vr))
    return int(np.argmin(vals)) - nl


def _penalized_sup_np(w, step, sigma, offset, half_curv):
    t = np.arange(1, w.shape[0] + 1) * step
    vals = (sigma * w - offset - half_curv * t * t) / t
    k = int(np.argmax(vals))
    return float(vals[k]), k


NUMPY = SimpleNamespace(
    name="numpy",
    compensated_cumsum=_compensated_cumsum,
    gcm_knots=_gcm_knots,
    knot_slopes=_knot_slopes,
    pava=_pava,
    ar1_filter=_ar1_filter_np,
    chernoff_argmin=_chernoff_argmin_np,
    gcm_slope_at=_gcm_slope_at_loop,
    penalized_sup=_penalized_sup_np,
)


def _build_numba():
    jit = numba.njit(cache=True, nogil=True)
    gcm_knots = jit(_gcm_knots)

    def gcm_slope_at(s, z, i0):
        knots = gcm_knots(s, z)
        j = 1
        while knots[j] < i0:
            j += 1
        a = knots[j - 1]
        b = knots[j]
        return (z[b] - z[a]) / (s[b] - s[a]), a

    return SimpleNamespace(
        name="numba",
        compensated_cumsum=jit(_compensated_cumsum),
        gcm_knots=gcm_knots,
        knot_slopes=jit(_knot_slopes),
        pava=jit(_pava),
        ar1_filter=jit(_ar1_filter_loop),
        chernoff_argmin=jit(_chernoff_argmin_loop),
        gcm_slope_at=jit(gcm_slope_at),
        penalized_sup=jit(_penalized_sup_loop),
    )


NUMBA = _build_numba() if numba is not None else None

_active = NUMBA if (NUMBA is not None and not _env_flag("MONOTREND_DISABLE_NUMBA")) else NUMPY

BACKEND: str = _active.name
compensated_cumsum = _active.compensated_cumsum
gcm_knots = _active.gcm_knots
knot_slopes = _active.knot_slopes
pava = _active.pava
ar1_filter = _active.ar1_filter
chernoff_argmin = _active.chernoff_argmin
gcm_slope_at = _active.gcm_slope_at
penalized_sup = _active.penalized_sup
