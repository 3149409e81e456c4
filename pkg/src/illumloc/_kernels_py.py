"""Pure numpy implementations of the hot kernels.

These are the fallback for the compiled module illumloc._native and the
reference its outputs are tested against.  Both implementations follow the
exact same arithmetic (same expression order, float64 intermediates, no
fused multiply-adds) so results are bit-identical; the split-search and
PRNG logic below is mirrored line for line in _native.pyx.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

RAY_T_MIN = 1e-6
RAY_DET_EPS = 1e-12
RAY_BARY_EPS = 1e-9


def _mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def rand_u64(seed: int, counter: int) -> int:
    """Counter-based splitmix64 stream; identical in the compiled kernel."""
    return _mix64((seed + ((counter + 1) * _GOLDEN)) & _MASK64)


def bootstrap_indices(seed: int, n: int, count: int) -> np.ndarray:
    """`count` draws with replacement from [0, n), vectorized splitmix64."""
    ctr = np.arange(1, count + 1, dtype=np.uint64)
    z = (np.uint64(seed) + ctr * np.uint64(_GOLDEN)).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return (z % np.uint64(n)).astype(np.int32)


# ---------------------------------------------------------------------------
# Ray / triangle intersection (Moller-Trumbore)
# ---------------------------------------------------------------------------

def ray_triangles(origin, dirs, v0, e1, e2):
    """Nearest triangle hit per ray.

    origin: (3,) ray origin shared by all rays.
    dirs: (N, 3) ray directions (need not be unit length).
    v0, e1, e2: (T, 3) triangle base vertex and edge vectors v1-v0, v2-v0.

    Returns (t, tri, bary): ray parameter (inf for miss), triangle index
    (-1 for miss) and (N, 2) barycentric (u, v) of the hit.  Ties in t go
    to the lower triangle index.
    """
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    n = dirs.shape[0]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    best_t = np.full(n, np.inf)
    best_tri = np.full(n, -1, dtype=np.int32)
    best_uv = np.zeros((n, 2))
    # explicit component arithmetic (no matmul): keeps the float operation
    # order identical to the C loop in _native.pyx
    for k in range(v0.shape[0]):
        e1x, e1y, e1z = e1[k]
        e2x, e2y, e2z = e2[k]
        px = dy * e2z - dz * e2y
        py = dz * e2x - dx * e2z
        pz = dx * e2y - dy * e2x
        det = px * e1x + py * e1y + pz * e1z
        valid = np.abs(det) > RAY_DET_EPS
        inv_det = 1.0 / np.where(valid, det, 1.0)
        tx, ty, tz = origin[0] - v0[k, 0], origin[1] - v0[k, 1], origin[2] - v0[k, 2]
        u = (px * tx + py * ty + pz * tz) * inv_det
        valid &= (u >= -RAY_BARY_EPS) & (u <= 1.0 + RAY_BARY_EPS)
        qx = ty * e1z - tz * e1y
        qy = tz * e1x - tx * e1z
        qz = tx * e1y - ty * e1x
        v = (dx * qx + dy * qy + dz * qz) * inv_det
        valid &= (v >= -RAY_BARY_EPS) & (u + v <= 1.0 + RAY_BARY_EPS)
        t = (qx * e2x + qy * e2y + qz * e2z) * inv_det
        valid &= (t > RAY_T_MIN) & (t < best_t)
        best_t[valid] = t[valid]
        best_tri[valid] = k
        best_uv[valid, 0] = u[valid]
        best_uv[valid, 1] = v[valid]
    return best_t, best_tri, best_uv


# ---------------------------------------------------------------------------
# Decision tree build / apply
# ---------------------------------------------------------------------------

def _f32_sort_keys(vals: np.ndarray) -> np.ndarray:
    """Order-preserving map float32 -> uint32 (total order, negatives ok)."""
    bits = vals.view(np.uint32)
    neg = (bits & np.uint32(0x80000000)) != 0
    return np.where(neg, ~bits, bits ^ np.uint32(0x80000000))


def _node_dims(seed: int, node_id: int, mtry: int, n_dims: int) -> list[int]:
    """First `mtry` entries of a Fisher-Yates shuffle of range(n_dims)."""
    perm = list(range(n_dims))
    for j in range(mtry):
        r = rand_u64(seed, node_id * mtry + j) % (n_dims - j)
        perm[j], perm[j + r] = perm[j + r], perm[j]
    return perm[:mtry]


def _midpoint_f32(a: np.float32, b: np.float32) -> np.float32:
    thr = np.float32((np.float64(a) + np.float64(b)) / 2.0)
    # f32 rounding may land on b; then "x <= thr" would not reproduce the
    # scanned counts, so fall back to the left value.
    if not (a <= thr < b):
        thr = a
    return thr


class _TreeBuilder:
    def __init__(self, X, y, n_classes, max_depth, min_leaf, mtry, seed):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.seed = seed
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.hist_offset = []
        self.hist_len = []
        self.hist_class = []
        self.hist_count = []

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(np.float32(0.0))
        self.left.append(-1)
        self.right.append(-1)
        self.hist_offset.append(-1)
        self.hist_len.append(0)
        return len(self.feature) - 1

    def _make_leaf(self, node, idx):
        counts = np.bincount(self.y[idx], minlength=self.n_classes)
        present = np.nonzero(counts)[0]
        self.hist_offset[node] = len(self.hist_class)
        self.hist_len[node] = len(present)
        self.hist_class.extend(int(c) for c in present)
        self.hist_count.extend(int(counts[c]) for c in present)

    def _best_split(self, node, idx):
        y = self.y[idx]
        m = idx.shape[0]
        best_q = -1.0
        best = None
        for d in _node_dims(self.seed, node, self.mtry, self.X.shape[1]):
            vals = self.X[idx, d]
            keys = (_f32_sort_keys(vals).astype(np.uint64) << np.uint64(32)) | idx.astype(np.uint64)
            order = np.argsort(keys)
            sv = vals[order]
            sy = y[order]
            # prefix class counts: sum of squared counts on each side,
            # exact in int64 so both kernel paths agree bitwise
            left_counts = np.zeros(self.n_classes, dtype=np.int64)
            total_counts = np.bincount(sy, minlength=self.n_classes).astype(np.int64)
            ssq_left = 0
            ssq_right = int(np.sum(total_counts * total_counts))
            for i in range(m - 1):
                c = sy[i]
                ssq_left += 2 * int(left_counts[c]) + 1
                ssq_right -= 2 * int(total_counts[c] - left_counts[c]) - 1
                left_counts[c] += 1
                n_l = i + 1
                if n_l < self.min_leaf or m - n_l < self.min_leaf:
                    continue
                if sv[i] == sv[i + 1]:
                    continue
                q = float(ssq_left) / n_l + float(ssq_right) / (m - n_l)
                if q > best_q:
                    best_q = q
                    best = (d, _midpoint_f32(sv[i], sv[i + 1]))
        return best

    def build(self, idx, depth):
        node = self._new_node()
        y = self.y[idx]
        pure = np.all(y == y[0])
        if depth >= self.max_depth or idx.shape[0] < 2 * self.min_leaf or pure:
            self._make_leaf(node, idx)
            return node
        split = self._best_split(node, idx)
        if split is None:
            self._make_leaf(node, idx)
            return node
        d, thr = split
        go_left = self.X[idx, d] <= thr
        self.feature[node] = d
        self.threshold[node] = thr
        self.left[node] = self.build(idx[go_left], depth + 1)
        self.right[node] = self.build(idx[~go_left], depth + 1)
        return node


def tree_build(X, y, n_classes, max_depth, min_leaf, mtry, seed, sample_idx):
    """Grow one CART tree on X[sample_idx]; returns flat node arrays.

    Returns dict of arrays: feature (int32, -1 on leaves), threshold
    (float32), left/right (int32 child ids, -1 on leaves), hist_offset /
    hist_len (int32 views into hist_class / hist_count for leaves).
    """
    b = _TreeBuilder(X, y, n_classes, max_depth, min_leaf, mtry, seed)
    b.build(np.asarray(sample_idx, dtype=np.int64), 0)
    return {
        "feature": np.asarray(b.feature, dtype=np.int32),
        "threshold": np.asarray(b.threshold, dtype=np.float32),
        "left": np.asarray(b.left, dtype=np.int32),
        "right": np.asarray(b.right, dtype=np.int32),
        "hist_offset": np.asarray(b.hist_offset, dtype=np.int32),
        "hist_len": np.asarray(b.hist_len, dtype=np.int32),
        "hist_class": np.asarray(b.hist_class, dtype=np.int32),
        "hist_count": np.asarray(b.hist_count, dtype=np.int32),
    }


def tree_apply(feature, threshold, left, right, X):
    """Leaf node index reached by every row of X."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    node = np.zeros(X.shape[0], dtype=np.int32)
    active = feature[node] >= 0
    while np.any(active):
        rows = np.nonzero(active)[0]
        cur = node[rows]
        vals = X[rows, feature[cur]]
        goes_left = vals <= threshold[cur]
        node[rows] = np.where(goes_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return node
