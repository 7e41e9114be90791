"""Hot kernels: batched Newton projection onto the closure variety and union-find.

Every kernel has a numba implementation and a pure-numpy twin with the same
signature.  The backend is picked once at import time from ``LINKMOD_BACKEND``
(``numba`` or ``numpy``); numba is the default whenever it imports cleanly.

Variables are the *free* edge angles of a multipolygon laid out flat: the
non-pinned edges of chain 0 first, then every edge of chains 1..r-1.  ``w``
holds the edge length of each variable, ``cid`` its chain index, and ``a0``
the length of the pinned first edge of chain 0.
"""
from __future__ import annotations

import os

import numpy as np

TWO_PI = 2.0 * np.pi

_requested = os.environ.get("LINKMOD_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"LINKMOD_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

HAS_NUMBA = False
if _requested == "numba":
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"

# Line-search and regularisation constants shared by both backends.
_MAX_HALVINGS = 40
_POLISH_ITERS = 2
_LM_REG = 1e-13


# --------------------------------------------------------------------------
# numpy reference implementation
# --------------------------------------------------------------------------

def residuals_numpy(X, w, cid, a0, n_chains):
    """Closure residuals for a batch ``X`` of shape (N, n) -> (N, 2*(r-1))."""
    X = np.atleast_2d(X)
    C = w * np.cos(X)
    S = w * np.sin(X)
    onehot = (cid[:, None] == np.arange(n_chains)[None, :]).astype(np.float64)
    ex = C @ onehot
    ey = S @ onehot
    ex[:, 0] += a0
    F = np.empty((X.shape[0], 2 * (n_chains - 1)))
    F[:, 0::2] = ex[:, :1] - ex[:, 1:]
    F[:, 1::2] = ey[:, :1] - ey[:, 1:]
    return F


def jacobian_numpy(X, w, cid, free, n_chains):
    """Batch Jacobian of :func:`residuals_numpy`, shape (N, m, n)."""
    X = np.atleast_2d(X)
    N, n = X.shape
    m = 2 * (n_chains - 1)
    C = w * np.cos(X)
    S = w * np.sin(X)
    J = np.zeros((N, m, n))
    on0 = cid == 0
    for k in range(1, n_chains):
        onk = cid == k
        J[:, 2 * (k - 1), on0] = -S[:, on0]
        J[:, 2 * (k - 1) + 1, on0] = C[:, on0]
        J[:, 2 * (k - 1), onk] = S[:, onk]
        J[:, 2 * (k - 1) + 1, onk] = -C[:, onk]
    J[:, :, ~free] = 0.0
    return J


def _newton_step_numpy(X, w, cid, free, n_chains, F):
    J = jacobian_numpy(X, w, cid, free, n_chains)
    JJt = J @ np.transpose(J, (0, 2, 1))
    m = JJt.shape[1]
    scale = np.maximum(np.trace(JJt, axis1=1, axis2=2), 1.0)
    JJt = JJt + (_LM_REG * scale)[:, None, None] * np.eye(m)[None]
    y = np.linalg.solve(JJt, F[:, :, None])
    return -(np.transpose(J, (0, 2, 1)) @ y)[:, :, 0]


def project_batch_numpy(X0, w, cid, a0, free, n_chains, tol=1e-9, max_iter=50):
    """Damped minimum-norm Newton projection of every row of ``X0``.

    Returns ``(X, converged, iterations)``.  Fixed (non-free) variables are
    never moved.  Converged rows are polished for a few extra iterations so
    that duplicates of the same point agree far below ``tol``.
    """
    X = np.array(X0, dtype=np.float64, copy=True)
    N = X.shape[0]
    F = residuals_numpy(X, w, cid, a0, n_chains)
    norm = np.sqrt(np.sum(F * F, axis=1))
    iters = np.zeros(N, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    failed = np.zeros(N, dtype=bool)
    polish = np.zeros(N, dtype=np.int64)

    for _ in range(max_iter + _POLISH_ITERS + 1):
        done = norm <= tol
        polish[done & active] += 1
        active &= ~failed
        active &= ~(done & (polish > _POLISH_ITERS))
        active &= ~((~done) & (iters >= max_iter))
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        step = _newton_step_numpy(X[idx], w, cid, free, n_chains, F[idx])
        t = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        newX = X[idx].copy()
        newF = F[idx].copy()
        newN = norm[idx].copy()
        for _h in range(_MAX_HALVINGS):
            p = np.nonzero(pending)[0]
            if p.size == 0:
                break
            trial = X[idx[p]] + t[p, None] * step[p]
            Ft = residuals_numpy(trial, w, cid, a0, n_chains)
            nt = np.sqrt(np.sum(Ft * Ft, axis=1))
            better = nt < norm[idx[p]]
            ok = p[better]
            newX[ok] = trial[better]
            newF[ok] = Ft[better]
            newN[ok] = nt[better]
            pending[ok] = False
            t[p[~better]] *= 0.5
        # no decrease: converged rows simply stop polishing, others fail
        stuck = pending
        conv_stuck = stuck & (norm[idx] <= tol)
        polish[idx[conv_stuck]] = _POLISH_ITERS + 1
        failed[idx[stuck & ~conv_stuck]] = True
        counted = ~stuck & (norm[idx] > tol)
        iters[idx[counted]] += 1
        X[idx] = newX
        F[idx] = newF
        norm[idx] = newN

    converged = norm <= tol
    X = np.mod(X, TWO_PI)
    X[X >= TWO_PI] = 0.0
    return X, converged, iters


def union_find_numpy(n, edges):
    """Connected-component labels via min-label propagation with pointer jumping."""
    labels = np.arange(n, dtype=np.int64)
    if n == 0:
        return labels
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.shape[0] == 0:
        return _canonical(labels)
    i, j = edges[:, 0], edges[:, 1]
    while True:
        li, lj = labels[i], labels[j]
        low = np.minimum(li, lj)
        new = labels.copy()
        np.minimum.at(new, li, low)
        np.minimum.at(new, lj, low)
        # pointer jumping until every label is a root
        while True:
            jumped = new[new]
            if np.array_equal(jumped, new):
                break
            new = jumped
        if np.array_equal(new, labels):
            break
        labels = new
    return _canonical(labels)


def _canonical(roots):
    """Relabel roots as 0..k-1 in order of first appearance."""
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int64)


# --------------------------------------------------------------------------
# numba implementation
# --------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _residual_nb(x, w, cid, a0, n_chains, F, ex, ey, cs, sn):
        # also leaves w*cos and w*sin per variable in cs/sn for the Jacobian
        for k in range(n_chains):
            ex[k] = 0.0
            ey[k] = 0.0
        ex[0] = a0
        for v in range(x.shape[0]):
            k = cid[v]
            cs[v] = w[v] * np.cos(x[v])
            sn[v] = w[v] * np.sin(x[v])
            ex[k] += cs[v]
            ey[k] += sn[v]
        s = 0.0
        for k in range(1, n_chains):
            F[2 * (k - 1)] = ex[0] - ex[k]
            F[2 * (k - 1) + 1] = ey[0] - ey[k]
            s += F[2 * (k - 1)] ** 2 + F[2 * (k - 1) + 1] ** 2
        return np.sqrt(s)

    @njit(cache=True)
    def _solve_nb(A, b):
        # Gaussian elimination with partial pivoting, in place.
        m = b.shape[0]
        for c in range(m):
            p = c
            best = abs(A[c, c])
            for r in range(c + 1, m):
                if abs(A[r, c]) > best:
                    best = abs(A[r, c])
                    p = r
            if p != c:
                for k in range(m):
                    tmp = A[c, k]
                    A[c, k] = A[p, k]
                    A[p, k] = tmp
                tmp = b[c]
                b[c] = b[p]
                b[p] = tmp
            piv = A[c, c]
            for r in range(c + 1, m):
                f = A[r, c] / piv
                for k in range(c, m):
                    A[r, k] -= f * A[c, k]
                b[r] -= f * b[c]
        for c in range(m - 1, -1, -1):
            s = b[c]
            for k in range(c + 1, m):
                s -= A[c, k] * b[k]
            b[c] = s / A[c, c]
        return b

    @njit(cache=True)
    def _project_one_nb(x, w, cid, a0, free, n_chains, tol, max_iter,
                        F, Ft, J, JJt, y, step, trial, ex, ey, cs, sn, cst, snt):
        n = x.shape[0]
        m = 2 * (n_chains - 1)
        norm = _residual_nb(x, w, cid, a0, n_chains, F, ex, ey, cs, sn)
        iters = 0
        polish = 0
        while True:
            if norm <= tol:
                polish += 1
                if polish > _POLISH_ITERS:
                    break
            elif iters >= max_iter:
                break
            # Jacobian
            for r in range(m):
                for v in range(n):
                    J[r, v] = 0.0
            for v in range(n):
                if not free[v]:
                    continue
                k = cid[v]
                c = cs[v]
                s = sn[v]
                if k == 0:
                    for kk in range(1, n_chains):
                        J[2 * (kk - 1), v] = -s
                        J[2 * (kk - 1) + 1, v] = c
                else:
                    J[2 * (k - 1), v] = s
                    J[2 * (k - 1) + 1, v] = -c
            for r in range(m):
                for q in range(m):
                    acc = 0.0
                    for v in range(n):
                        acc += J[r, v] * J[q, v]
                    JJt[r, q] = acc
            tr = 0.0
            for r in range(m):
                tr += JJt[r, r]
            if tr < 1.0:
                tr = 1.0
            for r in range(m):
                JJt[r, r] += _LM_REG * tr
            for r in range(m):
                y[r] = F[r]
            _solve_nb(JJt, y)
            for v in range(n):
                acc = 0.0
                for r in range(m):
                    acc += J[r, v] * y[r]
                step[v] = -acc
            t = 1.0
            improved = False
            for _h in range(_MAX_HALVINGS):
                for v in range(n):
                    trial[v] = x[v] + t * step[v]
                nt = _residual_nb(trial, w, cid, a0, n_chains, Ft, ex, ey, cst, snt)
                if nt < norm:
                    improved = True
                    break
                t *= 0.5
            if not improved:
                break
            for v in range(n):
                x[v] = trial[v]
                cs[v] = cst[v]
                sn[v] = snt[v]
            for r in range(m):
                F[r] = Ft[r]
            was_done = norm <= tol
            norm = nt
            if not was_done:
                iters += 1
        for v in range(n):
            val = x[v] % (2.0 * np.pi)
            if val >= 2.0 * np.pi:
                val = 0.0
            x[v] = val
        return norm <= tol, iters

    @njit(cache=True)
    def _project_batch_nb(X, w, cid, a0, free, n_chains, tol, max_iter, ok, iters):
        n = X.shape[1]
        m = 2 * (n_chains - 1)
        F = np.empty(m)
        Ft = np.empty(m)
        J = np.zeros((m, n))
        JJt = np.zeros((m, m))
        y = np.empty(m)
        step = np.empty(n)
        trial = np.empty(n)
        ex = np.empty(n_chains)
        ey = np.empty(n_chains)
        cs = np.empty(n)
        sn = np.empty(n)
        cst = np.empty(n)
        snt = np.empty(n)
        for i in range(X.shape[0]):
            c, it = _project_one_nb(X[i], w, cid, a0, free, n_chains, tol, max_iter,
                                    F, Ft, J, JJt, y, step, trial, ex, ey, cs, sn, cst, snt)
            ok[i] = c
            iters[i] = it

    @njit(cache=True)
    def _find(parent, i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            nxt = parent[i]
            parent[i] = root
            i = nxt
        return root

    @njit(cache=True)
    def _union_find_nb(n, edges):
        parent = np.arange(n)
        for e in range(edges.shape[0]):
            a = _find(parent, edges[e, 0])
            b = _find(parent, edges[e, 1])
            if a != b:
                # smaller index becomes the root so labels are order-independent
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
        for i in range(n):
            parent[i] = _find(parent, i)
        return parent


def project_batch(X0, w, cid, a0, free, n_chains, tol=1e-9, max_iter=50):
    """Project each row of ``X0`` onto the closure variety (active backend)."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    cid = np.ascontiguousarray(cid, dtype=np.int64)
    free = np.ascontiguousarray(free, dtype=np.bool_)
    if not HAS_NUMBA:
        return project_batch_numpy(X0, w, cid, a0, free, n_chains, tol, max_iter)
    X = np.array(X0, dtype=np.float64, copy=True, order="C")
    ok = np.zeros(X.shape[0], dtype=np.bool_)
    iters = np.zeros(X.shape[0], dtype=np.int64)
    _project_batch_nb(X, w, cid, float(a0), free, int(n_chains), float(tol), int(max_iter), ok, iters)
    return X, ok, iters


def union_find(n, edges):
    """Canonical component labels (0..k-1 by first appearance) for ``n`` nodes."""
    edges = np.ascontiguousarray(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    if not HAS_NUMBA:
        return union_find_numpy(n, edges)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    return _canonical(_union_find_nb(n, edges))
