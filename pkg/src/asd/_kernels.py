"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``ASD_NO_NUMBA=1`` in the environment before import to force the numpy
implementations.  Both paths are importable directly (``*_numba`` /
``*_numpy``) so tests and the benchmark can compare them.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("ASD_NO_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
)


def _njit(fn):
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, error_model="numpy")(fn)


# ---------------------------------------------------------------------------
# Sinkhorn scalings
# ---------------------------------------------------------------------------


def sinkhorn_plain_numpy(K, a, b, max_iters, tol):
    u = np.ones_like(a)
    v = np.ones_like(b)
    err = np.inf
    it = 0
    while it < max_iters:
        it += 1
        u = a / (K @ v)
        v = b / (K.T @ u)
        err = np.max(np.abs(u * (K @ v) - a))
        if not np.isfinite(err) or err < tol:
            break
    return u, v, it, err


@_njit
def sinkhorn_plain_numba(K, a, b, max_iters, tol):
    n, m = K.shape
    u = np.ones(n)
    v = np.ones(m)
    err = np.inf
    it = 0
    while it < max_iters:
        it += 1
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += K[i, j] * v[j]
            u[i] = a[i] / s
        for j in range(m):
            s = 0.0
            for i in range(n):
                s += K[i, j] * u[i]
            v[j] = b[j] / s
        err = 0.0
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += K[i, j] * v[j]
            e = abs(u[i] * s - a[i])
            if not e <= err:  # also catches nan
                err = e
        if not np.isfinite(err) or err < tol:
            break
    return u, v, it, err


def _lse_rows(M):
    mx = M.max(axis=1)
    return mx + np.log(np.exp(M - mx[:, None]).sum(axis=1))


def sinkhorn_log_numpy(C, lam, a, b, max_iters, tol):
    """Dual potentials f, g with P = exp((f_i + g_j - C_ij) / lam)."""
    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    err = np.inf
    it = 0
    while it < max_iters:
        it += 1
        f = lam * log_a - lam * _lse_rows((g[None, :] - C) / lam)
        g = lam * log_b - lam * _lse_rows((f[:, None] - C).T / lam)
        row = np.exp(_lse_rows((f[:, None] + g[None, :] - C) / lam))
        err = np.max(np.abs(row - a))
        if err < tol:
            break
    return f, g, it, err


@_njit
def sinkhorn_log_numba(C, lam, a, b, max_iters, tol):
    n, m = C.shape
    f = np.zeros(n)
    g = np.zeros(m)
    log_a = np.log(a)
    log_b = np.log(b)
    tmp = np.empty(max(n, m))
    err = np.inf
    it = 0
    while it < max_iters:
        it += 1
        for i in range(n):
            mx = -np.inf
            for j in range(m):
                tmp[j] = (g[j] - C[i, j]) / lam
                if tmp[j] > mx:
                    mx = tmp[j]
            s = 0.0
            for j in range(m):
                s += np.exp(tmp[j] - mx)
            f[i] = lam * log_a[i] - lam * (mx + np.log(s))
        for j in range(m):
            mx = -np.inf
            for i in range(n):
                tmp[i] = (f[i] - C[i, j]) / lam
                if tmp[i] > mx:
                    mx = tmp[i]
            s = 0.0
            for i in range(n):
                s += np.exp(tmp[i] - mx)
            g[j] = lam * log_b[j] - lam * (mx + np.log(s))
        err = 0.0
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += np.exp((f[i] + g[j] - C[i, j]) / lam)
            e = abs(s - a[i])
            if e > err:
                err = e
        if err < tol:
            break
    return f, g, it, err


# ---------------------------------------------------------------------------
# PAM k-medoids: greedy BUILD, then steepest-descent SWAP
# ---------------------------------------------------------------------------


def pam_build_numpy(D, k):
    medoids = [int(np.argmin(D.sum(axis=1)))]
    nearest = D[:, medoids[0]].copy()
    while len(medoids) < k:
        gain = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
        gain[medoids] = -1.0
        c = int(np.argmax(gain))
        medoids.append(c)
        nearest = np.minimum(nearest, D[:, c])
    return np.array(medoids, dtype=np.int64)


def pam_swap_numpy(D, medoids):
    """Apply the best improving (medoid, non-medoid) swap until none improves.

    Returns (medoids, labels, cost); labels index into medoids.
    """
    n = D.shape[0]
    medoids = np.array(medoids, dtype=np.int64)
    k = len(medoids)
    cost = D[:, medoids].min(axis=1).sum()
    is_med = np.zeros(n, dtype=bool)
    while True:
        is_med[:] = False
        is_med[medoids] = True
        best_cost = cost - 1e-12
        best = None
        for mi in range(k):
            if k > 1:
                base = np.delete(D[:, medoids], mi, axis=1).min(axis=1)
            else:
                base = np.full(n, np.inf)
            # total cost of replacing medoid mi by each candidate h, all h at once
            costs = np.minimum(base[:, None], D).sum(axis=0)
            costs[is_med] = np.inf
            h = int(np.argmin(costs))
            if costs[h] < best_cost:
                best_cost = costs[h]
                best = (mi, h)
        if best is None:
            break
        medoids[best[0]] = best[1]
        cost = D[:, medoids].min(axis=1).sum()
    labels = np.argmin(D[:, medoids], axis=1)
    return medoids, labels, float(cost)


@_njit
def pam_build_numba(D, k):
    n = D.shape[0]
    medoids = np.empty(k, dtype=np.int64)
    is_med = np.zeros(n, dtype=np.bool_)
    best_s = np.inf
    first = 0
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += D[j, i]
        if s < best_s:
            best_s = s
            first = j
    medoids[0] = first
    is_med[first] = True
    nearest = np.empty(n)
    for i in range(n):
        nearest[i] = D[i, first]
    for c in range(1, k):
        best_g = -1.0
        pick = -1
        for j in range(n):
            if is_med[j]:
                continue
            g = 0.0
            for i in range(n):
                d = nearest[i] - D[i, j]
                if d > 0.0:
                    g += d
            if g > best_g:
                best_g = g
                pick = j
        medoids[c] = pick
        is_med[pick] = True
        for i in range(n):
            if D[i, pick] < nearest[i]:
                nearest[i] = D[i, pick]
    return medoids


@_njit
def _assign_cost(D, medoids):
    cost = 0.0
    for i in range(D.shape[0]):
        b = np.inf
        for m in medoids:
            if D[i, m] < b:
                b = D[i, m]
        cost += b
    return cost


@_njit
def pam_swap_numba(D, medoids):
    n = D.shape[0]
    medoids = medoids.copy()
    k = medoids.shape[0]
    is_med = np.zeros(n, dtype=np.bool_)
    for m in medoids:
        is_med[m] = True
    cost = _assign_cost(D, medoids)
    base = np.empty(n)
    while True:
        best_cost = cost - 1e-12
        bm = -1
        bh = -1
        for mi in range(k):
            for i in range(n):
                b = np.inf
                for mj in range(k):
                    if mj != mi and D[i, medoids[mj]] < b:
                        b = D[i, medoids[mj]]
                base[i] = b
            for h in range(n):
                if is_med[h]:
                    continue
                s = 0.0
                for i in range(n):
                    s += min(base[i], D[i, h])
                if s < best_cost:
                    best_cost = s
                    bm = mi
                    bh = h
        if bm < 0:
            break
        is_med[medoids[bm]] = False
        is_med[bh] = True
        medoids[bm] = bh
        cost = _assign_cost(D, medoids)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        b = np.inf
        for mj in range(k):
            if D[i, medoids[mj]] < b:
                b = D[i, medoids[mj]]
                labels[i] = mj
    return medoids, labels, cost


# ---------------------------------------------------------------------------
# class-transition counting
# ---------------------------------------------------------------------------


def count_transitions_numpy(prev, new, n_classes):
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    moved = (prev >= 0) & (prev != new)
    np.add.at(counts, (prev[moved], new[moved]), 1)
    return counts


@_njit
def count_transitions_numba(prev, new, n_classes):
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    for b in range(prev.shape[0]):
        a = prev[b]
        if a >= 0 and a != new[b]:
            counts[a, new[b]] += 1
    return counts


# ---------------------------------------------------------------------------
# Lloyd iterations for k-means
# ---------------------------------------------------------------------------


def lloyd_numpy(X, centers, max_iter, tol):
    centers = centers.copy()
    k = centers.shape[0]
    x2 = (X * X).sum(axis=1)
    prev_inertia = np.inf
    labels = np.zeros(X.shape[0], dtype=np.int64)
    inertia = np.inf
    for _ in range(max_iter):
        d2 = x2[:, None] - 2.0 * X @ centers.T + (centers * centers).sum(axis=1)[None, :]
        np.maximum(d2, 0.0, out=d2)
        labels = np.argmin(d2, axis=1)
        inertia = d2[np.arange(X.shape[0]), labels].sum()
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
        if prev_inertia - inertia <= tol * max(inertia, 1e-300):
            break
        prev_inertia = inertia
    return centers, labels, float(inertia)


@_njit
def lloyd_numba(X, centers, max_iter, tol):
    n, d = X.shape
    k = centers.shape[0]
    centers = centers.copy()
    labels = np.zeros(n, dtype=np.int64)
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    prev_inertia = np.inf
    inertia = np.inf
    for _ in range(max_iter):
        inertia = 0.0
        for i in range(n):
            best = np.inf
            for c in range(k):
                s = 0.0
                for j in range(d):
                    diff = X[i, j] - centers[c, j]
                    s += diff * diff
                if s < best:
                    best = s
                    labels[i] = c
            inertia += best
        sums[:, :] = 0.0
        counts[:] = 0
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            for j in range(d):
                sums[c, j] += X[i, j]
        for c in range(k):
            if counts[c] > 0:
                for j in range(d):
                    centers[c, j] = sums[c, j] / counts[c]
        if prev_inertia - inertia <= tol * max(inertia, 1e-300):
            break
        prev_inertia = inertia
    return centers, labels, inertia


if USE_NUMBA:
    sinkhorn_plain = sinkhorn_plain_numba
    sinkhorn_log = sinkhorn_log_numba
    pam_build = pam_build_numba
    pam_swap = pam_swap_numba
    count_transitions = count_transitions_numba
    lloyd = lloyd_numba
else:
    sinkhorn_plain = sinkhorn_plain_numpy
    sinkhorn_log = sinkhorn_log_numpy
    pam_build = pam_build_numpy
    pam_swap = pam_swap_numpy
    count_transitions = count_transitions_numpy
    lloyd = lloyd_numpy
