# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled codeword search kernels.

Same contracts, enumeration order and tie rule as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

TIE_RTOL = 1e-9


cdef inline Py_ssize_t _slot_of(Py_ssize_t ref, Py_ssize_t step) noexcept nogil:
    return step if step < ref else step + 1


cdef Py_ssize_t _first_within(const double* vals, Py_ssize_t n, double rtol) noexcept nogil:
    cdef Py_ssize_t i
    cdef double top = vals[0]
    for i in range(1, n):
        if vals[i] > top:
            top = vals[i]
    cdef double thr = top * (1.0 - rtol)
    for i in range(n):
        if vals[i] >= thr:
            return i
    return 0


cdef void _one_channel(
    const double complex[:, ::1] g,
    const double[::1] ar,
    const double[::1] ai,
    const double[::1] mag2,
    double rtol,
    double* scores,
    Py_ssize_t* chosen,
    long long* best_out,
    double* score_out,
    long long* choice_out,
) noexcept nogil:
    cdef Py_ssize_t n_hyp = g.shape[0]
    cdef Py_ssize_t n_slot = g.shape[1]
    cdef Py_ssize_t n_steps = n_slot - 1
    cdef Py_ssize_t n_a = ar.shape[0]
    cdef Py_ssize_t h, ref, step, a, j, pick, pos, flat, t
    cdef double acc_r, acc_i, norm, gr, gi, tr, ti
    cdef double* row

    pos = 0
    for h in range(n_hyp):
        for ref in range(n_slot):
            acc_r = g[h, ref].real
            acc_i = -g[h, ref].imag
            norm = 1.0
            for step in range(n_steps):
                j = _slot_of(ref, step)
                gr = g[h, j].real
                gi = -g[h, j].imag
                row = scores + pos
                for a in range(n_a):
                    tr = acc_r + (gr * ar[a] - gi * ai[a])
                    ti = acc_i + (gr * ai[a] + gi * ar[a])
                    row[a] = (tr * tr + ti * ti) / (norm + mag2[a])
                pick = _first_within(row, n_a, rtol)
                chosen[(h * n_slot + ref) * n_steps + step] = pick
                acc_r = acc_r + (gr * ar[pick] - gi * ai[pick])
                acc_i = acc_i + (gr * ai[pick] + gi * ar[pick])
                norm = norm + mag2[pick]
                pos += n_a

    flat = _first_within(scores, pos, rtol)
    score_out[0] = scores[flat]
    a = flat % n_a
    flat = flat // n_a
    step = flat % n_steps
    flat = flat // n_steps
    ref = flat % n_slot
    h = flat // n_slot
    best_out[0] = h
    best_out[1] = ref
    best_out[2] = step
    best_out[3] = a
    for j in range(n_slot):
        choice_out[j] = -1
    for t in range(step):
        choice_out[_slot_of(ref, t)] = chosen[(h * n_slot + ref) * n_steps + t]
    choice_out[_slot_of(ref, step)] = a


def greedy_search(proj, alphabet, double rtol=TIE_RTOL):
    """Greedy combining-coefficient search; see ``_kernels_py.greedy_search``."""
    cdef const double complex[:, :, ::1] P = np.ascontiguousarray(proj, dtype=np.complex128)
    alpha = np.ascontiguousarray(alphabet, dtype=np.complex128)
    cdef const double[::1] ar = np.ascontiguousarray(alpha.real)
    cdef const double[::1] ai = np.ascontiguousarray(alpha.imag)
    cdef const double[::1] mag2 = np.ascontiguousarray(alpha.real**2 + alpha.imag**2)
    cdef Py_ssize_t n_ch = P.shape[0]
    cdef Py_ssize_t n_hyp = P.shape[1]
    cdef Py_ssize_t n_slot = P.shape[2]
    if n_slot < 2:
        raise ValueError("need at least two combining slots")
    cdef Py_ssize_t n_a = ar.shape[0]
    cdef Py_ssize_t per_ch = n_hyp * n_slot * (n_slot - 1) * n_a

    best_np = np.empty((n_ch, 4), dtype=np.int64)
    score_np = np.empty(n_ch, dtype=np.float64)
    choice_np = np.empty((n_ch, n_slot), dtype=np.int64)
    cdef long long[:, ::1] best = best_np
    cdef double[::1] score = score_np
    cdef long long[:, ::1] choice = choice_np

    cdef double* scores = <double*> malloc(max(per_ch, 1) * sizeof(double))
    cdef Py_ssize_t* chosen = <Py_ssize_t*> malloc(
        max(n_hyp * n_slot * (n_slot - 1), 1) * sizeof(Py_ssize_t))
    if scores == NULL or chosen == NULL:
        free(scores)
        free(chosen)
        raise MemoryError()
    cdef Py_ssize_t k
    try:
        with nogil:
            for k in range(n_ch):
                _one_channel(P[k], ar, ai, mag2, rtol, scores, chosen,
                             &best[k, 0], &score[k], &choice[k, 0])
    finally:
        free(scores)
        free(chosen)
    return best_np, score_np, choice_np


def phase_search(base, rotated, phases, double rtol=TIE_RTOL):
    """Sequential per-panel co-phasing search; see ``_kernels_py.phase_search``."""
    cdef const double complex[::1] B = np.ascontiguousarray(base, dtype=np.complex128)
    cdef const double complex[:, ::1] R = np.ascontiguousarray(rotated, dtype=np.complex128)
    cdef const double complex[::1] E = np.ascontiguousarray(phases, dtype=np.complex128)
    cdef Py_ssize_t n_ch = R.shape[0]
    cdef Py_ssize_t n_rot = R.shape[1]
    cdef Py_ssize_t n_ph = E.shape[0]

    best_np = np.empty((n_ch, 2), dtype=np.int64)
    score_np = np.empty(n_ch, dtype=np.float64)
    picks_np = np.zeros((n_ch, n_rot), dtype=np.int64)
    cdef long long[:, ::1] best = best_np
    cdef double[::1] score = score_np
    cdef long long[:, ::1] picks = picks_np

    cdef double* scores = <double*> malloc(max(n_rot * n_ph, 1) * sizeof(double))
    cdef Py_ssize_t* chosen = <Py_ssize_t*> malloc(max(n_rot, 1) * sizeof(Py_ssize_t))
    if scores == NULL or chosen == NULL:
        free(scores)
        free(chosen)
        raise MemoryError()
    cdef Py_ssize_t k, m, p, pick, flat
    cdef double complex acc, rest, trial
    try:
        with nogil:
            for k in range(n_ch):
                acc = B[k]
                for m in range(n_rot):
                    acc = acc + R[k, m]
                for m in range(n_rot):
                    rest = acc - R[k, m]
                    for p in range(n_ph):
                        trial = rest + R[k, m] * E[p]
                        scores[m * n_ph + p] = trial.real * trial.real + trial.imag * trial.imag
                    pick = _first_within(scores + m * n_ph, n_ph, rtol)
                    chosen[m] = pick
                    acc = rest + R[k, m] * E[pick]
                flat = _first_within(scores, n_rot * n_ph, rtol)
                score[k] = scores[flat]
                best[k, 0] = flat // n_ph
                best[k, 1] = flat % n_ph
                for m in range(best[k, 0]):
                    picks[k, m] = chosen[m]
                picks[k, best[k, 0]] = best[k, 1]
    finally:
        free(scores)
        free(chosen)
    return best_np, score_np, picks_np
