"""Pure-Python CART builder, bit-compatible with the compiled kernel."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


class SplitMix64:
    """The 64-bit generator used for per-node feature draws."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


def _best_split(v: np.ndarray, lab: np.ndarray, K: int):
    """Best boundary on sorted values by sum_c cL²/nL + sum_c cR²/nR (exact integers)."""
    m = v.size
    onehot = np.zeros((m, K), np.int64)
    onehot[np.arange(m), lab] = 1
    cl = np.cumsum(onehot, axis=0)[:-1]
    cr = onehot.sum(axis=0) - cl
    nL = np.arange(1, m, dtype=np.int64)
    ok = v[:-1] < v[1:]
    sumL = (cl * cl).sum(axis=1)
    sumR = (cr * cr).sum(axis=1)
    proxy = sumL.astype(float) / nL.astype(float) + sumR.astype(float) / (m - nL).astype(float)
    proxy = np.where(ok, proxy, -1.0)
    pos = int(np.argmax(proxy))
    return float(proxy[pos]), float(v[pos])


def build_tree(X, y, sample, n_classes: int, max_depth: int, mtry: int, seed: int):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    idx = np.array(sample, dtype=np.int64)
    d = X.shape[1]
    K = n_classes
    rng = SplitMix64(seed)
    feats = list(range(d))
    feature, threshold, left, right, counts = [], [], [], [], []
    stack = [(-1, 0, idx, 0)]
    while stack:
        parent, side, members, depth = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        cnt = np.bincount(y[members], minlength=K)
        counts.append(cnt)
        if parent >= 0:
            (left if side == 0 else right)[parent] = node
        m = members.size
        if m < 2 or cnt.max() == m or (max_depth >= 0 and depth >= max_depth):
            continue
        best, best_f, best_thr = -1.0, -1, 0.0
        drawn = found = 0
        labs_all = y[members]
        while drawn < d and found < mtry:
            r = drawn + rng.next() % (d - drawn)
            feats[drawn], feats[r] = feats[r], feats[drawn]
            k = feats[drawn]
            drawn += 1
            col = X[members, k]
            order = np.argsort(col, kind="stable")
            v = col[order]
            if v[0] == v[-1]:
                continue
            found += 1
            proxy, thr = _best_split(v, labs_all[order], K)
            if proxy > best:
                best, best_f, best_thr = proxy, k, thr
        if best_f < 0:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        go_left = X[members, best_f] <= best_thr
        stack.append((node, 1, members[~go_left], depth + 1))
        stack.append((node, 0, members[go_left], depth + 1))
    return (np.array(feature, np.int64), np.array(threshold, np.float64),
            np.array(left, np.int64), np.array(right, np.int64),
            np.array(counts, np.int64).reshape(len(feature), K))


def apply_tree(X, feature, threshold, left, right):
    X = np.asarray(X, np.float64)
    node = np.zeros(X.shape[0], np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        nd = node[rows]
        go_left = X[rows, feature[nd]] <= threshold[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node
