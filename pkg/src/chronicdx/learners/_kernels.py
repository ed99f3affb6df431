"""Compiled tree growers and traversal shared by the forest and boosting learners.

Features are pre-binned: ``codes[i, f]`` counts the thresholds of feature
``f`` lying strictly below ``X[i, f]``, so a split at bin ``s`` sends
``codes <= s`` left, which is ``x <= thresholds[f, s]`` on raw values.
"""
from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1


def make_thresholds(X: np.ndarray, max_bins: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Candidate split points per feature: midpoints of consecutive unique values.

    Features with more than ``max_bins`` unique values get midpoints at
    evenly spaced quantile positions instead.
    """
    n, F = X.shape
    per_feature = []
    for f in range(F):
        u = np.unique(X[:, f])
        mids = 0.5 * (u[:-1] + u[1:])
        if len(mids) > max_bins - 1:
            pos = np.linspace(0, len(mids) - 1, max_bins - 1).round().astype(int)
            mids = mids[np.unique(pos)]
        per_feature.append(mids)
    width = max([len(m) for m in per_feature] + [1])
    table = np.full((F, width), np.inf)
    n_thr = np.zeros(F, dtype=np.int64)
    for f, m in enumerate(per_feature):
        table[f, : len(m)] = m
        n_thr[f] = len(m)
    return table, n_thr


def bin_codes(X: np.ndarray, table: np.ndarray, n_thr: np.ndarray) -> np.ndarray:
    codes = np.empty(X.shape, dtype=np.int32)
    for f in range(X.shape[1]):
        codes[:, f] = np.searchsorted(table[f, : n_thr[f]], X[:, f], side="left")
    return codes


@njit(cache=True)
def _partition(idx, start, end, codes, f, s, buf):
    """Stable in-place partition of idx[start:end]; returns the split point."""
    k = start
    m = 0
    for p in range(start, end):
        i = idx[p]
        if codes[i, f] <= s:
            idx[k] = i
            k += 1
        else:
            buf[m] = i
            m += 1
    for q in range(m):
        idx[k + q] = buf[q]
    return k


@njit(cache=True)
def _choose_features(perm, F, m):
    """Partial Fisher-Yates: first m entries of perm become a random subset, sorted."""
    if m >= F:
        for j in range(F):
            perm[j] = j
        return F
    for j in range(m):
        r = j + np.random.randint(F - j)
        t = perm[j]
        perm[j] = perm[r]
        perm[r] = t
    perm[:m] = np.sort(perm[:m])
    return m


@njit(cache=True)
def grow_gini_tree(codes, n_thr, y, w, n_classes, max_depth, min_leaf, max_features, seed):
    """Depth-first CART with Gini impurity on weighted samples (w = bootstrap counts).

    Returns (feature, split_bin, left, right, class_weight) arrays; leaves
    have feature == -1.  ``max_depth < 0`` means unlimited.
    """
    np.random.seed(seed)
    n, F = codes.shape
    idx = np.empty(n, dtype=np.int64)
    n_used = 0
    for i in range(n):
        if w[i] > 0:
            idx[n_used] = i
            n_used += 1
    cap = 2 * n_used + 1
    feature = np.full(cap, -1, dtype=np.int64)
    split_bin = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))
    buf = np.empty(n_used, dtype=np.int64)
    perm = np.arange(F)
    max_b = 1
    for f in range(F):
        if n_thr[f] + 1 > max_b:
            max_b = n_thr[f] + 1
    hist = np.zeros((max_b, n_classes))
    hcnt = np.zeros(max_b, dtype=np.int64)
    tot = np.zeros(n_classes)
    lw = np.zeros(n_classes)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_used
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        tot[:] = 0.0
        for p in range(start, end):
            i = idx[p]
            tot[y[i]] += w[i]
        W = tot.sum()
        for c in range(n_classes):
            value[node, c] = tot[c]
        n_node = end - start
        n_nonzero = 0
        for c in range(n_classes):
            if tot[c] > 0:
                n_nonzero += 1
        if n_nonzero <= 1 or (max_depth >= 0 and depth >= max_depth) or n_node < 2 * min_leaf:
            continue
        parent = 0.0
        for c in range(n_classes):
            parent += tot[c] * tot[c]
        parent /= W
        best_score = -1.0
        best_f = -1
        best_s = -1
        m = _choose_features(perm, F, max_features)
        for jj in range(m):
            f = perm[jj]
            nb = n_thr[f]
            if nb == 0:
                continue
            hist[: nb + 1, :] = 0.0
            hcnt[: nb + 1] = 0
            for p in range(start, end):
                i = idx[p]
                b = codes[i, f]
                hist[b, y[i]] += w[i]
                hcnt[b] += 1
            lw[:] = 0.0
            lc = 0
            for s in range(nb):
                if hcnt[s] == 0:
                    continue
                for c in range(n_classes):
                    lw[c] += hist[s, c]
                lc += hcnt[s]
                rc = n_node - lc
                if lc < min_leaf or rc < min_leaf:
                    continue
                if rc == 0:
                    break
                WL = lw.sum()
                WR = W - WL
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += lw[c] * lw[c]
                    r = tot[c] - lw[c]
                    sr += r * r
                score = sl / WL + sr / WR
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_s = s
        if best_f < 0 or best_score - parent <= 1e-12 * W:
            continue
        mid = _partition(idx, start, end, codes, best_f, best_s, buf)
        feature[node] = best_f
        split_bin[node] = best_s
        l_id = n_nodes
        r_id = n_nodes + 1
        n_nodes += 2
        left[node] = l_id
        right[node] = r_id
        # push right first so the left subtree is expanded first
        st_node[top] = r_id
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = l_id
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1
    return feature[:n_nodes], split_bin[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def grow_newton_tree(codes, n_thr, g, h, max_depth, lam, gamma, min_child_weight):
    """Second-order regression tree: leaf weight -G/(H+lam), split gain with L2 and gamma."""
    n, F = codes.shape
    idx = np.arange(n)
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    split_bin = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    buf = np.empty(n, dtype=np.int64)
    max_b = 1
    for f in range(F):
        if n_thr[f] + 1 > max_b:
            max_b = n_thr[f] + 1
    hg = np.zeros(max_b)
    hh = np.zeros(max_b)
    hc = np.zeros(max_b, dtype=np.int64)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        G = 0.0
        H = 0.0
        for p in range(start, end):
            i = idx[p]
            G += g[i]
            H += h[i]
        value[node] = -G / (H + lam)
        if (max_depth >= 0 and depth >= max_depth) or end - start < 2:
            continue
        parent = G * G / (H + lam)
        best_gain = 0.0
        best_f = -1
        best_s = -1
        for f in range(F):
            nb = n_thr[f]
            if nb == 0:
                continue
            hg[: nb + 1] = 0.0
            hh[: nb + 1] = 0.0
            hc[: nb + 1] = 0
            for p in range(start, end):
                i = idx[p]
                b = codes[i, f]
                hg[b] += g[i]
                hh[b] += h[i]
                hc[b] += 1
            GL = 0.0
            HL = 0.0
            cl = 0
            for s in range(nb):
                if hc[s] == 0:
                    continue
                GL += hg[s]
                HL += hh[s]
                cl += hc[s]
                if cl == end - start:
                    break
                GR = G - GL
                HR = H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent) - gamma
                if gain > best_gain + 1e-12:
                    best_gain = gain
                    best_f = f
                    best_s = s
        if best_f < 0:
            continue
        mid = _partition(idx, start, end, codes, best_f, best_s, buf)
        feature[node] = best_f
        split_bin[node] = best_s
        l_id = n_nodes
        r_id = n_nodes + 1
        n_nodes += 2
        left[node] = l_id
        right[node] = r_id
        st_node[top] = r_id
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = l_id
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1
    return feature[:n_nodes], split_bin[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def apply_forest(X, feature, threshold, left, right, roots):
    """Leaf node id reached by every row in every tree of a flattened forest."""
    n = X.shape[0]
    T = roots.shape[0]
    out = np.empty((n, T), dtype=np.int64)
    for i in range(n):
        for t in range(T):
            node = roots[t]
            while feature[node] != -1:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, t] = node
    return out


@njit(cache=True)
def sum_tree_values(X, feature, threshold, left, right, roots, tree_output, value, n_outputs):
    """Sum of leaf values per output column; tree t adds to column tree_output[t]."""
    n = X.shape[0]
    T = roots.shape[0]
    out = np.zeros((n, n_outputs))
    for i in range(n):
        for t in range(T):
            node = roots[t]
            while feature[node] != -1:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i, tree_output[t]] += value[node]
    return out


@njit(cache=True)
def pegasos_epochs(X, y, lam, max_epochs, tol, order_seed, w0):
    """Stochastic subgradient descent on the L2-regularized hinge loss.

    ``X`` carries a trailing constant column for the bias.  Returns the
    weights and the number of epochs run.
    """
    np.random.seed(order_seed)
    n, d = X.shape
    w = w0.copy()
    t = 0
    prev = np.inf
    order = np.arange(n)
    epochs = 0
    for ep in range(max_epochs):
        epochs = ep + 1
        for j in range(n - 1, 0, -1):
            r = np.random.randint(j + 1)
            tmp = order[j]
            order[j] = order[r]
            order[r] = tmp
        for q in range(n):
            i = order[q]
            t += 1
            eta = 1.0 / (lam * t)
            margin = 0.0
            for k in range(d):
                margin += w[k] * X[i, k]
            scale = 1.0 - eta * lam
            for k in range(d):
                w[k] *= scale
            if y[i] * margin < 1.0:
                for k in range(d):
                    w[k] += eta * y[i] * X[i, k]
        obj = 0.0
        for i in range(n):
            margin = 0.0
            for k in range(d):
                margin += w[k] * X[i, k]
            hinge = 1.0 - y[i] * margin
            if hinge > 0:
                obj += hinge
        obj /= n
        nrm = 0.0
        for k in range(d):
            nrm += w[k] * w[k]
        obj += 0.5 * lam * nrm
        if np.isfinite(prev) and abs(prev - obj) <= tol * max(abs(prev), 1e-12):
            break
        prev = obj
    return w, epochs
