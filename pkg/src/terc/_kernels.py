"""Hot counting kernels behind the plug-in estimators and the PI baseline.

Every kernel exists twice: an ``_nb`` loop compiled by numba and an ``_np``
vectorised numpy version.  The public names at the bottom of the module
pick one according to :data:`terc._accel.USE_NUMBA`; both are exported so
tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

import numpy as np

from terc._accel import USE_NUMBA, njit

# mixed-radix products are re-densified before they could pass this bound
_CODE_LIMIT = 2**62


# ---------------------------------------------------------------------------
# dense relabelling of integer symbols


@njit
def _relabel_nb(x):
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out, 0
    order = np.argsort(x, kind="mergesort")
    k = 0
    prev = x[order[0]]
    for i in range(n):
        v = x[order[i]]
        if v != prev:
            k += 1
            prev = v
        out[order[i]] = k
    return out, k + 1


def _relabel_np(x):
    uniq, inv = np.unique(x, return_inverse=True)
    return inv.astype(np.int64).reshape(-1), int(uniq.shape[0])


@njit
def _joint_codes_nb(cols):
    n, k = cols.shape
    codes = np.zeros(n, dtype=np.int64)
    card = 1
    for j in range(k):
        col, cj = _relabel_nb(cols[:, j].copy())
        if card > _CODE_LIMIT // max(cj, 1):
            codes, card = _relabel_nb(codes)
        for i in range(n):
            codes[i] = codes[i] * cj + col[i]
        card = card * cj
    return _relabel_nb(codes)


def _joint_codes_np(cols):
    n, k = cols.shape
    codes = np.zeros(n, dtype=np.int64)
    card = 1
    for j in range(k):
        col, cj = _relabel_np(cols[:, j])
        if card > _CODE_LIMIT // max(cj, 1):
            codes, card = _relabel_np(codes)
        codes = codes * cj + col
        card *= cj
    return _relabel_np(codes)


# ---------------------------------------------------------------------------
# entropy of dense codes (nats)


@njit
def _entropy_codes_nb(codes, card):
    n = codes.shape[0]
    counts = np.zeros(card, dtype=np.int64)
    for i in range(n):
        counts[codes[i]] += 1
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / n
            h -= p * np.log(p)
    return h


def _entropy_codes_np(codes, card):
    counts = np.bincount(codes, minlength=card)
    counts = counts[counts > 0]
    p = counts / codes.shape[0]
    return float(-np.sum(p * np.log(p)))


# ---------------------------------------------------------------------------
# uniform quantisation of real columns


@njit
def _quantize_nb(x, bins):
    n = x.shape[0]
    out = np.zeros(n, dtype=np.int64)
    lo = x.min()
    hi = x.max()
    if hi <= lo:
        return out
    width = (hi - lo) / bins
    for i in range(n):
        b = int((x[i] - lo) / width)
        if b >= bins:
            b = bins - 1
        out[i] = b
    return out


def _quantize_np(x, bins):
    lo, hi = x.min(), x.max()
    if hi <= lo:
        return np.zeros(x.shape[0], dtype=np.int64)
    b = ((x - lo) / ((hi - lo) / bins)).astype(np.int64)
    return np.minimum(b, bins - 1)


# ---------------------------------------------------------------------------
# permutation-importance scores for a fitted linear model


@njit
def _permuted_mse_nb(pred, y, xcol, coef_j, perms):
    runs, n = perms.shape
    out = np.empty(runs, dtype=np.float64)
    for r in range(runs):
        acc = 0.0
        for i in range(n):
            d = y[i] - (pred[i] + (xcol[perms[r, i]] - xcol[i]) * coef_j)
            acc += d * d
        out[r] = acc / n
    return out


def _permuted_mse_np(pred, y, xcol, coef_j, perms):
    shifted = pred[None, :] + (xcol[perms] - xcol[None, :]) * coef_j
    return np.mean((y[None, :] - shifted) ** 2, axis=1)


@njit
def _permuted_acc_nb(pred, y, xcol, coef_j, perms, threshold):
    runs, n = perms.shape
    out = np.empty(runs, dtype=np.float64)
    for r in range(runs):
        hits = 0
        for i in range(n):
            p = pred[i] + (xcol[perms[r, i]] - xcol[i]) * coef_j
            label = 1.0 if p >= threshold else 0.0
            if label == y[i]:
                hits += 1
        out[r] = hits / n
    return out


def _permuted_acc_np(pred, y, xcol, coef_j, perms, threshold):
    shifted = pred[None, :] + (xcol[perms] - xcol[None, :]) * coef_j
    labels = (shifted >= threshold).astype(np.float64)
    return np.mean(labels == y[None, :], axis=1)


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    relabel = _relabel_nb
    joint_codes = _joint_codes_nb
    entropy_codes = _entropy_codes_nb
    quantize = _quantize_nb
    permuted_mse = _permuted_mse_nb
    permuted_acc = _permuted_acc_nb
else:
    relabel = _relabel_np
    joint_codes = _joint_codes_np
    entropy_codes = _entropy_codes_np
    quantize = _quantize_np
    permuted_mse = _permuted_mse_np
    permuted_acc = _permuted_acc_np

KERNELS = {
    "joint_codes": (_joint_codes_nb, _joint_codes_np),
    "entropy_codes": (_entropy_codes_nb, _entropy_codes_np),
    "quantize": (_quantize_nb, _quantize_np),
    "permuted_mse": (_permuted_mse_nb, _permuted_mse_np),
    "permuted_acc": (_permuted_acc_nb, _permuted_acc_np),
}
