"""Hot numeric kernels: numba-compiled loops with pure-numpy fallbacks.

Every kernel has two implementations with identical semantics.  The public
names are bound to the backend selected in :mod:`spherecov._backend`; both
variants remain reachable through ``IMPLEMENTATIONS`` for the equivalence
tests and the benchmark script.

Kernels:

``gegenbauer_table(lam, nmax, x)``
    Degree-0..nmax ultraspherical polynomial values at each ``x``, Szego
    normalization (three-term recurrence; cosine form for ``lam == 0``).
``weighted_product_sum(tables, cols, weights)``
    Sparse multi-index mixture accumulation over point pairs.
``pair_bin_stats(coords, times, values, time_window, num_bins)``
    O(n^2) pair sweep feeding the empirical correlation binning.
``pava_decreasing(y, w)`` / ``pava_decreasing_batch(rows, w)``
    Weighted projection onto the nonincreasing cone (pool adjacent
    violators).
"""

import math

import numpy as np

from ._backend import USE_NUMBA

__all__ = [
    "gegenbauer_table",
    "weighted_product_sum",
    "pair_bin_stats",
    "pava_decreasing",
    "pava_decreasing_batch",
    "IMPLEMENTATIONS",
]


# --------------------------------------------------------------------------
# pure-numpy implementations
# --------------------------------------------------------------------------

def _gegenbauer_table_np(lam, nmax, x):
    out = np.empty((x.shape[0], nmax + 1))
    if lam == 0.0:
        # Tchebycheff limit: T_n(x) = cos(n arccos x)
        theta = np.arccos(np.clip(x, -1.0, 1.0))
        for n in range(nmax + 1):
            out[:, n] = np.cos(n * theta)
        return out
    out[:, 0] = 1.0
    if nmax >= 1:
        out[:, 1] = 2.0 * lam * x
    for n in range(2, nmax + 1):
        out[:, n] = (
            2.0 * (n + lam - 1.0) * x * out[:, n - 1]
            - (n + 2.0 * lam - 2.0) * out[:, n - 2]
        ) / n
    return out


def _weighted_product_sum_np(tables, cols, weights):
    npairs = tables.shape[0]
    out = np.zeros(npairs)
    for k in range(cols.shape[0]):
        term = np.full(npairs, weights[k])
        for f in range(cols.shape[1]):
            term *= tables[:, cols[k, f]]
        out += term
    return out


def _pair_bin_stats_np(coords, times, values, time_window, num_bins):
    n = coords.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    keep = np.abs(times[iu] - times[ju]) <= time_window
    iu, ju = iu[keep], ju[keep]
    x = np.clip(np.einsum("ij,ij->i", coords[iu], coords[ju]), -1.0, 1.0)
    bins = np.floor((x + 1.0) * 0.5 * num_bins).astype(np.int64)
    np.minimum(bins, num_bins - 1, out=bins)
    counts = np.bincount(bins, minlength=num_bins).astype(np.int64)
    sum_x = np.bincount(bins, weights=x, minlength=num_bins)
    sum_prod = np.bincount(bins, weights=values[iu] * values[ju], minlength=num_bins)
    return counts, sum_x, sum_prod


def _pava_decreasing_np(y, w):
    n = y.shape[0]
    means = np.empty(n)
    weights = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        means[m] = y[i]
        weights[m] = w[i]
        sizes[m] = 1
        m += 1
        # merge while the block means violate the nonincreasing order
        while m > 1 and means[m - 2] < means[m - 1]:
            tw = weights[m - 2] + weights[m - 1]
            means[m - 2] = (
                weights[m - 2] * means[m - 2] + weights[m - 1] * means[m - 1]
            ) / tw
            weights[m - 2] = tw
            sizes[m - 2] += sizes[m - 1]
            m -= 1
    out = np.empty(n)
    pos = 0
    for b in range(m):
        out[pos : pos + sizes[b]] = means[b]
        pos += sizes[b]
    return out


def _pava_decreasing_batch_np(rows, w):
    out = np.empty_like(rows)
    for i in range(rows.shape[0]):
        out[i] = _pava_decreasing_np(rows[i], w)
    return out


_NUMPY_IMPLS = {
    "gegenbauer_table": _gegenbauer_table_np,
    "weighted_product_sum": _weighted_product_sum_np,
    "pair_bin_stats": _pair_bin_stats_np,
    "pava_decreasing": _pava_decreasing_np,
    "pava_decreasing_batch": _pava_decreasing_batch_np,
}


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

_NUMBA_IMPLS = None

if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _gegenbauer_table_nb(lam, nmax, x):  # pragma: no cover - jitted
        npts = x.shape[0]
        out = np.empty((npts, nmax + 1))
        if lam == 0.0:
            for i in range(npts):
                xi = x[i]
                if xi > 1.0:
                    xi = 1.0
                elif xi < -1.0:
                    xi = -1.0
                theta = math.acos(xi)
                for n in range(nmax + 1):
                    out[i, n] = math.cos(n * theta)
            return out
        for i in range(npts):
            out[i, 0] = 1.0
        if nmax >= 1:
            for i in range(npts):
                out[i, 1] = 2.0 * lam * x[i]
        for n in range(2, nmax + 1):
            for i in range(npts):
                out[i, n] = (
                    2.0 * (n + lam - 1.0) * x[i] * out[i, n - 1]
                    - (n + 2.0 * lam - 2.0) * out[i, n - 2]
                ) / n
        return out

    @njit(cache=True)
    def _weighted_product_sum_nb(tables, cols, weights):  # pragma: no cover
        npairs = tables.shape[0]
        m = cols.shape[0]
        nf = cols.shape[1]
        out = np.zeros(npairs)
        for p in range(npairs):
            acc = 0.0
            for k in range(m):
                term = weights[k]
                for f in range(nf):
                    term *= tables[p, cols[k, f]]
                acc += term
            out[p] = acc
        return out

    @njit(cache=True)
    def _pair_bin_stats_nb(coords, times, values, time_window, num_bins):  # pragma: no cover
        n = coords.shape[0]
        d = coords.shape[1]
        counts = np.zeros(num_bins, dtype=np.int64)
        sum_x = np.zeros(num_bins)
        sum_prod = np.zeros(num_bins)
        for i in range(n):
            for j in range(i + 1, n):
                if abs(times[i] - times[j]) > time_window:
                    continue
                dot = 0.0
                for k in range(d):
                    dot += coords[i, k] * coords[j, k]
                if dot > 1.0:
                    dot = 1.0
                elif dot < -1.0:
                    dot = -1.0
                b = int((dot + 1.0) * 0.5 * num_bins)
                if b >= num_bins:
                    b = num_bins - 1
                counts[b] += 1
                sum_x[b] += dot
                sum_prod[b] += values[i] * values[j]
        return counts, sum_x, sum_prod

    @njit(cache=True)
    def _pava_decreasing_nb(y, w):  # pragma: no cover - jitted
        n = y.shape[0]
        means = np.empty(n)
        weights = np.empty(n)
        sizes = np.empty(n, dtype=np.int64)
        m = 0
        for i in range(n):
            means[m] = y[i]
            weights[m] = w[i]
            sizes[m] = 1
            m += 1
            while m > 1 and means[m - 2] < means[m - 1]:
                tw = weights[m - 2] + weights[m - 1]
                means[m - 2] = (
                    weights[m - 2] * means[m - 2] + weights[m - 1] * means[m - 1]
                ) / tw
                weights[m - 2] = tw
                sizes[m - 2] += sizes[m - 1]
                m -= 1
        out = np.empty(n)
        pos = 0
        for b in range(m):
            for k in range(sizes[b]):
                out[pos + k] = means[b]
            pos += sizes[b]
        return out

    @njit(cache=True)
    def _pava_decreasing_batch_nb(rows, w):  # pragma: no cover - jitted
        out = np.empty_like(rows)
        for i in range(rows.shape[0]):
            out[i] = _pava_decreasing_nb(rows[i], w)
        return out

    _NUMBA_IMPLS = {
        "gegenbauer_table": _gegenbauer_table_nb,
        "weighted_product_sum": _weighted_product_sum_nb,
        "pair_bin_stats": _pair_bin_stats_nb,
        "pava_decreasing": _pava_decreasing_nb,
        "pava_decreasing_batch": _pava_decreasing_batch_nb,
    }

IMPLEMENTATIONS = {"numpy": _NUMPY_IMPLS, "numba": _NUMBA_IMPLS}

_ACTIVE = _NUMBA_IMPLS if USE_NUMBA else _NUMPY_IMPLS


# --------------------------------------------------------------------------
# public wrappers: coerce dtypes once, then dispatch
# --------------------------------------------------------------------------

def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def gegenbauer_table(lam, nmax, x):
    """Values of the degree-0..nmax polynomials at each x, shape (len(x), nmax+1)."""
    return _ACTIVE["gegenbauer_table"](float(lam), int(nmax), _f64(x))


def weighted_product_sum(tables, cols, weights):
    """sum_k w_k * prod_f tables[:, cols[k, f]] for every row of ``tables``."""
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    return _ACTIVE["weighted_product_sum"](_f64(tables), cols, _f64(weights))


def pair_bin_stats(coords, times, values, time_window, num_bins):
    """Per-bin pair count, cosine sum and centered product sum.

    Sweeps all pairs i < j, keeps those with |t_i - t_j| <= time_window and
    bins them by the pairwise cosine over [-1, 1] into ``num_bins`` equal
    cells (x = 1 lands in the last cell).
    """
    return _ACTIVE["pair_bin_stats"](
        _f64(coords), _f64(times), _f64(values), float(time_window), int(num_bins)
    )


def pava_decreasing(y, w):
    """Weighted L2 projection of ``y`` onto the cone of nonincreasing sequences."""
    return _ACTIVE["pava_decreasing"](_f64(y), _f64(w))


def pava_decreasing_batch(rows, w):
    """Row-wise :func:`pava_decreasing` with a shared weight vector."""
    return _ACTIVE["pava_decreasing_batch"](_f64(rows), _f64(w))
