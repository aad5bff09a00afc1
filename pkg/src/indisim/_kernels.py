"""Hot numeric loops.

Every kernel exists twice: a numba ``@njit`` version and a plain numpy
version.  The numba path is used when numba imports and the environment
variable ``INDISIM_DISABLE_NUMBA`` is unset (or ``0``).  Both paths are
importable directly (``numba_impl`` / ``numpy_impl``) so tests and the
benchmark can compare them.
"""

import os
from types import SimpleNamespace

import numpy as np

_FLOOR = 1e-15  # clamp for Tr[Pi_k rho] inside the RrhoR operator


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def _flip_trace_np(rho, d):
    r = rho.reshape(d, d, d, d)
    return np.einsum("ikki->", r)


def _mirror_overlap_np(amps):
    # sum_i conj(a_i) a_{N-1-i}
    return np.vdot(amps, amps[::-1])


def _probs_np(proj, rho):
    # p[b, k] = Re Tr[Pi_k rho_b]
    return np.einsum("kij,bji->bk", proj, rho).real


def _rrr_batch_np(proj, weights, max_iters, tol, trace):
    nb = weights.shape[0]
    n = proj.shape[1]
    totals = weights.sum(axis=1)
    rho = np.repeat((np.eye(n, dtype=np.complex128) / n)[None], nb, axis=0)
    p = np.maximum(_probs_np(proj, rho), _FLOOR)
    ll = (weights * np.log(p)).sum(axis=1) / totals
    iters = np.zeros(nb, dtype=np.int64)
    converged = np.zeros(nb, dtype=np.bool_)
    worst = np.zeros(nb)
    tlen = trace.shape[1]
    if tlen:
        trace[:, 0] = ll
    active = np.ones(nb, dtype=np.bool_)
    for it in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        r_op = np.einsum("bk,kij->bij", weights[idx] / p[idx], proj)
        new = r_op @ rho[idx] @ r_op
        tr = np.einsum("bii->b", new).real
        new /= tr[:, None, None]
        new = 0.5 * (new + np.conj(np.swapaxes(new, 1, 2)))
        p_new = np.maximum(_probs_np(proj, new), _FLOOR)
        ll_new = (weights[idx] * np.log(p_new)).sum(axis=1) / totals[idx]
        gain = ll_new - ll[idx]
        worst[idx] = np.minimum(worst[idx], gain)
        rho[idx] = new
        p[idx] = p_new
        ll[idx] = ll_new
        iters[idx] = it + 1
        if it + 1 < tlen:
            trace[idx, it + 1] = ll_new
        done = gain < tol
        converged[idx[done]] = True
        active[idx[done]] = False
    return rho, ll, iters, converged, worst


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def flip_trace(rho, d):
        acc = 0.0 + 0.0j
        for i in range(d):
            for k in range(d):
                acc += rho[i * d + k, k * d + i]
        return acc

    @njit(cache=True)
    def mirror_overlap(amps):
        n = amps.shape[0]
        acc = 0.0 + 0.0j
        for i in range(n):
            acc += np.conj(amps[i]) * amps[n - 1 - i]
        return acc

    @njit(cache=True)
    def _loglik(proj, w, rho, p, total):
        nk, n = proj.shape[0], proj.shape[1]
        ll = 0.0
        for k in range(nk):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc += (proj[k, i, j] * rho[j, i]).real
            if acc < _FLOOR:
                acc = _FLOOR
            p[k] = acc
            ll += w[k] * np.log(acc)
        return ll / total

    @njit(cache=True)
    def _rrr_one(proj, w, max_iters, tol, rho, trace_row):
        nk, n = proj.shape[0], proj.shape[1]
        total = 0.0
        for k in range(nk):
            total += w[k]
        p = np.empty(nk)
        r_op = np.empty((n, n), dtype=np.complex128)
        tmp = np.empty((n, n), dtype=np.complex128)
        new = np.empty((n, n), dtype=np.complex128)
        ll = _loglik(proj, w, rho, p, total)
        tlen = trace_row.shape[0]
        if tlen:
            trace_row[0] = ll
        worst = 0.0
        iters = 0
        converged = False
        for it in range(max_iters):
            for i in range(n):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for k in range(nk):
                        acc += (w[k] / p[k]) * proj[k, i, j]
                    r_op[i, j] = acc
            for i in range(n):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for m in range(n):
                        acc += r_op[i, m] * rho[m, j]
                    tmp[i, j] = acc
            tr = 0.0
            for i in range(n):
                for j in range(n):
                    acc = 0.0 + 0.0j
                    for m in range(n):
                        acc += tmp[i, m] * r_op[m, j]
                    new[i, j] = acc
                tr += new[i, i].real
            for i in range(n):
                for j in range(n):
                    rho[i, j] = 0.5 * (new[i, j] + np.conj(new[j, i])) / tr
            ll_new = _loglik(proj, w, rho, p, total)
            gain = ll_new - ll
            if gain < worst:
                worst = gain
            ll = ll_new
            iters = it + 1
            if iters < tlen:
                trace_row[iters] = ll
            if gain < tol:
                converged = True
                break
        return ll, iters, converged, worst

    @njit(cache=True)
    def rrr_batch(proj, weights, max_iters, tol, trace):
        nb = weights.shape[0]
        n = proj.shape[1]
        rho = np.zeros((nb, n, n), dtype=np.complex128)
        ll = np.empty(nb)
        iters = np.empty(nb, dtype=np.int64)
        converged = np.empty(nb, dtype=np.bool_)
        worst = np.empty(nb)
        for b in range(nb):
            for i in range(n):
                rho[b, i, i] = 1.0 / n
            res = _rrr_one(proj, weights[b], max_iters, tol, rho[b], trace[b])
            ll[b] = res[0]
            iters[b] = res[1]
            converged[b] = res[2]
            worst[b] = res[3]
        return rho, ll, iters, converged, worst

    return SimpleNamespace(
        flip_trace=flip_trace,
        mirror_overlap=mirror_overlap,
        rrr_batch=rrr_batch,
    )


numpy_impl = SimpleNamespace(
    flip_trace=_flip_trace_np,
    mirror_overlap=_mirror_overlap_np,
    rrr_batch=_rrr_batch_np,
)

numba_impl = None
if os.environ.get("INDISIM_DISABLE_NUMBA", "0") in ("", "0"):
    try:
        numba_impl = _build_numba()
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba_impl = None

USING_NUMBA = numba_impl is not None
_active = numba_impl if USING_NUMBA else numpy_impl


def flip_trace(rho, d):
    """Sum of the index-swapped diagonal, ``sum_{i,k} rho[(i,k),(k,i)]``."""
    return complex(_active.flip_trace(np.ascontiguousarray(rho, dtype=np.complex128), int(d)))


def mirror_overlap(amps):
    """``sum_i conj(a_i) a_{N-1-i}`` for a 1-D complex array."""
    return complex(_active.mirror_overlap(np.ascontiguousarray(amps, dtype=np.complex128)))


def rrr_batch(proj, weights, max_iters, tol, trace_len=0):
    """Run independent RrhoR reconstructions, one per row of ``weights``.

    Returns ``(rho, loglik, iterations, converged, worst_gain, trace)``.
    ``loglik`` is per unit weight; ``trace`` has shape ``(batch, trace_len)``
    and holds the per-iteration log-likelihood (unused tail left at nan).
    """
    proj = np.ascontiguousarray(proj, dtype=np.complex128)
    weights = np.ascontiguousarray(np.atleast_2d(weights), dtype=np.float64)
    trace = np.full((weights.shape[0], int(trace_len)), np.nan)
    out = _active.rrr_batch(proj, weights, int(max_iters), float(tol), trace)
    return (*out, trace)
