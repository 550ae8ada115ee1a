# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CART builder and tree traversal.

Mirrors ``_tree_py`` exactly: same splitmix64 feature draws, same integer
sum-of-squares split criterion, same pre-order node numbering.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef inline uint64_t _next(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef void _sort(double* v, int64_t* lab, Py_ssize_t n) nogil:
    # quicksort on (value, label) pairs; order among ties is irrelevant
    cdef Py_ssize_t i, j, lo = 0, hi = n - 1
    cdef double pivot, tv
    cdef int64_t tl
    while hi - lo > 16:
        i = lo + (hi - lo) // 2
        if v[i] < v[lo]:
            v[i], v[lo] = v[lo], v[i]; lab[i], lab[lo] = lab[lo], lab[i]
        if v[hi] < v[lo]:
            v[hi], v[lo] = v[lo], v[hi]; lab[hi], lab[lo] = lab[lo], lab[hi]
        if v[hi] < v[i]:
            v[hi], v[i] = v[i], v[hi]; lab[hi], lab[i] = lab[i], lab[hi]
        pivot = v[i]
        i = lo
        j = hi
        while i <= j:
            while v[i] < pivot:
                i += 1
            while v[j] > pivot:
                j -= 1
            if i <= j:
                v[i], v[j] = v[j], v[i]; lab[i], lab[j] = lab[j], lab[i]
                i += 1
                j -= 1
        # recurse on the smaller side, loop on the larger
        if j - lo < hi - i:
            _sort(v + lo, lab + lo, j - lo + 1)
            lo = i
        else:
            _sort(v + i, lab + i, hi - i + 1)
            hi = j
    for i in range(lo + 1, hi + 1):
        tv = v[i]
        tl = lab[i]
        j = i - 1
        while j >= lo and v[j] > tv:
            v[j + 1] = v[j]
            lab[j + 1] = lab[j]
            j -= 1
        v[j + 1] = tv
        lab[j + 1] = tl


def build_tree(const double[:, ::1] X, const int64_t[::1] y, sample, int n_classes,
               int max_depth, int mtry, uint64_t seed):
    """Grow one tree on ``X[sample]``.

    Returns ``(feature, threshold, left, right, counts)`` with nodes in
    pre-order; leaves have feature -1.
    """
    cdef int64_t[::1] idx = np.ascontiguousarray(sample, dtype=np.int64).copy()
    cdef Py_ssize_t n = idx.shape[0], d = X.shape[1], K = n_classes
    cdef Py_ssize_t cap = 2 * n + 1
    feature_a = np.full(cap, -1, dtype=np.int64)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    counts_a = np.zeros((cap, K), dtype=np.int64)
    cdef int64_t[::1] feature = feature_a, left = left_a, right = right_a
    cdef double[::1] threshold = threshold_a
    cdef int64_t[:, ::1] counts = counts_a

    cdef int64_t[::1] feats = np.arange(d, dtype=np.int64)
    cdef double* vals = <double*> malloc((n + 1) * sizeof(double))
    cdef int64_t* labs = <int64_t*> malloc((n + 1) * sizeof(int64_t))
    cdef int64_t* cl = <int64_t*> malloc(K * sizeof(int64_t))
    cdef int64_t* cr = <int64_t*> malloc(K * sizeof(int64_t))
    # stack of (parent, side, start, end, depth); right pushed before left
    cdef int64_t* stack = <int64_t*> malloc(5 * (cap + 2) * sizeof(int64_t))
    cdef uint64_t state = seed
    cdef Py_ssize_t sp, n_nodes = 0, node, parent, side, start, end, depth, m, i, k, r, c
    cdef Py_ssize_t drawn, found, best_f, nL, lo, hi
    cdef int64_t sumL, sumR, tmp
    cdef double proxy, best, best_thr
    cdef bint pure
    try:
        stack[0] = -1; stack[1] = 0; stack[2] = 0; stack[3] = n; stack[4] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            parent = stack[5 * sp]; side = stack[5 * sp + 1]
            start = stack[5 * sp + 2]; end = stack[5 * sp + 3]; depth = stack[5 * sp + 4]
            node = n_nodes
            n_nodes += 1
            if parent >= 0:
                if side == 0:
                    left[parent] = node
                else:
                    right[parent] = node
            m = end - start
            for i in range(start, end):
                counts[node, y[idx[i]]] += 1
            pure = False
            for c in range(K):
                if counts[node, c] == m:
                    pure = True
            if pure or m < 2 or (max_depth >= 0 and depth >= max_depth):
                continue

            best = -1.0
            best_f = -1
            best_thr = 0.0
            found = 0
            drawn = 0
            while drawn < d and found < mtry:
                r = drawn + <Py_ssize_t>(_next(&state) % <uint64_t>(d - drawn))
                tmp = feats[drawn]; feats[drawn] = feats[r]; feats[r] = tmp
                k = feats[drawn]
                drawn += 1
                for i in range(m):
                    vals[i] = X[idx[start + i], k]
                    labs[i] = y[idx[start + i]]
                _sort(vals, labs, m)
                if vals[0] == vals[m - 1]:
                    continue
                found += 1
                sumL = 0
                sumR = 0
                for c in range(K):
                    cl[c] = 0
                    cr[c] = counts[node, c]
                    sumR += cr[c] * cr[c]
                for i in range(m - 1):
                    c = labs[i]
                    sumL += 2 * cl[c] + 1
                    cl[c] += 1
                    sumR -= 2 * cr[c] - 1
                    cr[c] -= 1
                    if vals[i] < vals[i + 1]:
                        nL = i + 1
                        proxy = (<double> sumL) / (<double> nL) + (<double> sumR) / (<double> (m - nL))
                        if proxy > best:
                            best = proxy
                            best_f = k
                            best_thr = vals[i]
            if best_f < 0:
                continue

            lo = start
            hi = end - 1
            while lo <= hi:
                if X[idx[lo], best_f] <= best_thr:
                    lo += 1
                else:
                    tmp = idx[lo]; idx[lo] = idx[hi]; idx[hi] = tmp
                    hi -= 1
            feature[node] = best_f
            threshold[node] = best_thr
            stack[5 * sp] = node; stack[5 * sp + 1] = 1
            stack[5 * sp + 2] = lo; stack[5 * sp + 3] = end; stack[5 * sp + 4] = depth + 1
            sp += 1
            stack[5 * sp] = node; stack[5 * sp + 1] = 0
            stack[5 * sp + 2] = start; stack[5 * sp + 3] = lo; stack[5 * sp + 4] = depth + 1
            sp += 1
    finally:
        free(vals); free(labs); free(cl); free(cr); free(stack)
    return (feature_a[:n_nodes].copy(), threshold_a[:n_nodes].copy(), left_a[:n_nodes].copy(),
            right_a[:n_nodes].copy(), counts_a[:n_nodes].copy())


def apply_tree(const double[:, ::1] X, const int64_t[::1] feature, const double[::1] threshold,
               const int64_t[::1] left, const int64_t[::1] right):
    """Leaf index reached by each row of ``X``."""
    cdef Py_ssize_t n = X.shape[0], i, node
    out_a = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_a
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = node
    return out_a
