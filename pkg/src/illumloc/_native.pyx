# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: ray-triangle intersection, CART build/apply.

Mirrors illumloc._kernels_py operation for operation; outputs are expected
to be bit-identical (the build disables FP contraction for this reason).
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc, qsort, realloc
from libc.string cimport memcpy, memset

cnp.import_array()

cdef extern from *:
    """
    #include <stdint.h>
    #include <string.h>
    static inline uint32_t illoc_f32_key(float f) {
        uint32_t u;
        memcpy(&u, &f, 4);
        return (u & 0x80000000u) ? ~u : (u ^ 0x80000000u);
    }
    static inline uint64_t illoc_mix64(uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }
    static int illoc_cmp_u64(const void *a, const void *b) {
        uint64_t x = *(const uint64_t *)a;
        uint64_t y = *(const uint64_t *)b;
        return (x > y) - (x < y);
    }
    """
    uint32_t illoc_f32_key(float f) nogil
    uint64_t illoc_mix64(uint64_t z) nogil
    int illoc_cmp_u64(const void *a, const void *b) nogil

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15u

cdef double RAY_T_MIN = 1e-6
cdef double RAY_DET_EPS = 1e-12
cdef double RAY_BARY_EPS = 1e-9


cdef inline uint64_t c_rand(uint64_t seed, uint64_t counter) nogil:
    return illoc_mix64(seed + (counter + 1u) * GOLDEN)


def ray_triangles(object origin_o, object dirs_o, object v0_o, object e1_o, object e2_o):
    """See _kernels_py.ray_triangles."""
    cdef double[::1] origin = np.ascontiguousarray(origin_o, dtype=np.float64)
    cdef double[:, ::1] dirs = np.ascontiguousarray(dirs_o, dtype=np.float64)
    cdef double[:, ::1] v0 = np.ascontiguousarray(v0_o, dtype=np.float64)
    cdef double[:, ::1] e1 = np.ascontiguousarray(e1_o, dtype=np.float64)
    cdef double[:, ::1] e2 = np.ascontiguousarray(e2_o, dtype=np.float64)
    cdef Py_ssize_t n = dirs.shape[0]
    cdef Py_ssize_t n_tri = v0.shape[0]

    best_t_arr = np.full(n, np.inf)
    best_tri_arr = np.full(n, -1, dtype=np.int32)
    best_uv_arr = np.zeros((n, 2))
    cdef double[::1] best_t = best_t_arr
    cdef int32_t[::1] best_tri = best_tri_arr
    cdef double[:, ::1] best_uv = best_uv_arr

    cdef Py_ssize_t i, k
    cdef double dx, dy, dz, e1x, e1y, e1z, e2x, e2y, e2z
    cdef double px, py, pz, qx, qy, qz, tx, ty, tz
    cdef double det, inv_det, u, v, t, ox, oy, oz
    ox = origin[0]; oy = origin[1]; oz = origin[2]
    with nogil:
        for i in range(n):
            dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
            for k in range(n_tri):
                e1x = e1[k, 0]; e1y = e1[k, 1]; e1z = e1[k, 2]
                e2x = e2[k, 0]; e2y = e2[k, 1]; e2z = e2[k, 2]
                px = dy * e2z - dz * e2y
                py = dz * e2x - dx * e2z
                pz = dx * e2y - dy * e2x
                det = px * e1x + py * e1y + pz * e1z
                if not (det > RAY_DET_EPS or det < -RAY_DET_EPS):
                    continue
                inv_det = 1.0 / det
                tx = ox - v0[k, 0]; ty = oy - v0[k, 1]; tz = oz - v0[k, 2]
                u = (px * tx + py * ty + pz * tz) * inv_det
                if not (u >= -RAY_BARY_EPS and u <= 1.0 + RAY_BARY_EPS):
                    continue
                qx = ty * e1z - tz * e1y
                qy = tz * e1x - tx * e1z
                qz = tx * e1y - ty * e1x
                v = (dx * qx + dy * qy + dz * qz) * inv_det
                if not (v >= -RAY_BARY_EPS and u + v <= 1.0 + RAY_BARY_EPS):
                    continue
                t = (qx * e2x + qy * e2y + qz * e2z) * inv_det
                if t > RAY_T_MIN and t < best_t[i]:
                    best_t[i] = t
                    best_tri[i] = <int32_t> k
                    best_uv[i, 0] = u
                    best_uv[i, 1] = v
    return best_t_arr, best_tri_arr, best_uv_arr


# ---------------------------------------------------------------------------
# CART tree
# ---------------------------------------------------------------------------

cdef struct TreeCtx:
    const float *X
    const int32_t *y
    Py_ssize_t n_dims
    int n_classes
    int max_depth
    int min_leaf
    int mtry
    uint64_t seed
    int64_t *idx          # working index array, partitioned in place
    int64_t *scratch      # stable-partition scratch
    uint64_t *keys        # per-dim sort buffer
    int64_t *total        # per-class totals in the current segment
    int64_t *left_cnt     # per-class running left counts
    int32_t *touched      # classes present in the segment
    int32_t *perm         # Fisher-Yates buffer over dims
    # growable node storage
    int32_t *feature
    float *threshold
    int32_t *left
    int32_t *right
    int32_t *hist_offset
    int32_t *hist_len
    Py_ssize_t n_nodes
    Py_ssize_t cap_nodes
    int32_t *hist_class
    int32_t *hist_count
    Py_ssize_t n_hist
    Py_ssize_t cap_hist
    int oom


cdef void _grow_nodes(TreeCtx *c) nogil:
    cdef Py_ssize_t cap
    if c.n_nodes < c.cap_nodes:
        return
    cap = c.cap_nodes * 2
    c.feature = <int32_t *> realloc(c.feature, cap * sizeof(int32_t))
    c.threshold = <float *> realloc(c.threshold, cap * sizeof(float))
    c.left = <int32_t *> realloc(c.left, cap * sizeof(int32_t))
    c.right = <int32_t *> realloc(c.right, cap * sizeof(int32_t))
    c.hist_offset = <int32_t *> realloc(c.hist_offset, cap * sizeof(int32_t))
    c.hist_len = <int32_t *> realloc(c.hist_len, cap * sizeof(int32_t))
    c.cap_nodes = cap
    if (c.feature == NULL or c.threshold == NULL or c.left == NULL or
            c.right == NULL or c.hist_offset == NULL or c.hist_len == NULL):
        c.oom = 1


cdef void _grow_hist(TreeCtx *c, Py_ssize_t need) nogil:
    cdef Py_ssize_t cap = c.cap_hist
    if c.n_hist + need <= cap:
        return
    while c.n_hist + need > cap:
        cap *= 2
    c.hist_class = <int32_t *> realloc(c.hist_class, cap * sizeof(int32_t))
    c.hist_count = <int32_t *> realloc(c.hist_count, cap * sizeof(int32_t))
    c.cap_hist = cap
    if c.hist_class == NULL or c.hist_count == NULL:
        c.oom = 1


cdef Py_ssize_t _new_node(TreeCtx *c) nogil:
    _grow_nodes(c)
    if c.oom:
        return -1
    cdef Py_ssize_t node = c.n_nodes
    c.feature[node] = -1
    c.threshold[node] = 0.0
    c.left[node] = -1
    c.right[node] = -1
    c.hist_offset[node] = -1
    c.hist_len[node] = 0
    c.n_nodes += 1
    return node


cdef void _make_leaf(TreeCtx *c, Py_ssize_t node, Py_ssize_t start, Py_ssize_t m) nogil:
    cdef Py_ssize_t i, j
    cdef int cls, n_touched = 0
    cdef int32_t tmp
    for i in range(m):
        cls = c.y[c.idx[start + i]]
        if c.total[cls] == 0:
            c.touched[n_touched] = cls
            n_touched += 1
        c.total[cls] += 1
    # ascending class order, matching numpy's bincount/nonzero
    for i in range(1, n_touched):
        tmp = c.touched[i]
        j = i
        while j > 0 and c.touched[j - 1] > tmp:
            c.touched[j] = c.touched[j - 1]
            j -= 1
        c.touched[j] = tmp
    _grow_hist(c, n_touched)
    if c.oom:
        return
    c.hist_offset[node] = <int32_t> c.n_hist
    c.hist_len[node] = n_touched
    for i in range(n_touched):
        cls = c.touched[i]
        c.hist_class[c.n_hist] = cls
        c.hist_count[c.n_hist] = <int32_t> c.total[cls]
        c.n_hist += 1
        c.total[cls] = 0


cdef int _best_split(TreeCtx *c, Py_ssize_t node, Py_ssize_t start, Py_ssize_t m,
                     int *out_dim, float *out_thr) nogil:
    """Returns 1 when a split was found, 0 otherwise."""
    cdef Py_ssize_t i, j
    cdef int d, cls, n_touched
    cdef int64_t gidx, r
    cdef float a, b, thr
    cdef double q, best_q = -1.0
    cdef int64_t ssq_left, ssq_right
    cdef Py_ssize_t n_l
    cdef int found = 0
    cdef int32_t swp

    for j in range(c.n_dims):
        c.perm[j] = <int32_t> j
    for j in range(c.mtry):
        r = <int64_t> (c_rand(c.seed, <uint64_t> (node * c.mtry + j)) % <uint64_t> (c.n_dims - j))
        swp = c.perm[j]
        c.perm[j] = c.perm[j + r]
        c.perm[j + r] = swp

    for j in range(c.mtry):
        d = c.perm[j]
        for i in range(m):
            gidx = c.idx[start + i]
            c.keys[i] = (<uint64_t> illoc_f32_key(c.X[gidx * c.n_dims + d]) << 32) | <uint64_t> gidx
        qsort(c.keys, m, sizeof(uint64_t), illoc_cmp_u64)

        n_touched = 0
        for i in range(m):
            cls = c.y[<int64_t> (c.keys[i] & 0xFFFFFFFFu)]
            if c.total[cls] == 0:
                c.touched[n_touched] = cls
                n_touched += 1
            c.total[cls] += 1
        ssq_right = 0
        for i in range(n_touched):
            ssq_right += c.total[c.touched[i]] * c.total[c.touched[i]]

        ssq_left = 0
        for i in range(m - 1):
            gidx = <int64_t> (c.keys[i] & 0xFFFFFFFFu)
            cls = c.y[gidx]
            ssq_left += 2 * c.left_cnt[cls] + 1
            ssq_right -= 2 * (c.total[cls] - c.left_cnt[cls]) - 1
            c.left_cnt[cls] += 1
            n_l = i + 1
            if n_l < c.min_leaf or m - n_l < c.min_leaf:
                continue
            a = c.X[gidx * c.n_dims + d]
            b = c.X[(<int64_t> (c.keys[i + 1] & 0xFFFFFFFFu)) * c.n_dims + d]
            if a == b:
                continue
            q = (<double> ssq_left) / (<double> n_l) + (<double> ssq_right) / (<double> (m - n_l))
            if q > best_q:
                best_q = q
                found = 1
                thr = <float> (((<double> a) + (<double> b)) / 2.0)
                if not (a <= thr and thr < b):
                    thr = a
                out_dim[0] = d
                out_thr[0] = thr

        for i in range(n_touched):
            c.total[c.touched[i]] = 0
            c.left_cnt[c.touched[i]] = 0
    return found


cdef Py_ssize_t _build(TreeCtx *c, Py_ssize_t start, Py_ssize_t m, int depth) nogil:
    cdef Py_ssize_t node = _new_node(c)
    if node < 0:
        return -1
    cdef Py_ssize_t i, n_l, child
    cdef int pure = 1, d = 0
    cdef float thr = 0.0
    cdef int32_t first = c.y[c.idx[start]]
    for i in range(1, m):
        if c.y[c.idx[start + i]] != first:
            pure = 0
            break
    if depth >= c.max_depth or m < 2 * c.min_leaf or pure:
        _make_leaf(c, node, start, m)
        return -1 if c.oom else node
    if not _best_split(c, node, start, m, &d, &thr):
        _make_leaf(c, node, start, m)
        return -1 if c.oom else node

    # stable partition of the segment around the chosen threshold
    n_l = 0
    for i in range(m):
        if c.X[c.idx[start + i] * c.n_dims + d] <= thr:
            c.scratch[n_l] = c.idx[start + i]
            n_l += 1
    cdef Py_ssize_t n_r = n_l
    for i in range(m):
        if not (c.X[c.idx[start + i] * c.n_dims + d] <= thr):
            c.scratch[n_r] = c.idx[start + i]
            n_r += 1
    memcpy(c.idx + start, c.scratch, m * sizeof(int64_t))

    c.feature[node] = d
    c.threshold[node] = thr
    child = _build(c, start, n_l, depth + 1)
    if child < 0:
        return -1
    c.left[node] = <int32_t> child
    child = _build(c, start + n_l, m - n_l, depth + 1)
    if child < 0:
        return -1
    c.right[node] = <int32_t> child
    return node


def tree_build(object X_o, object y_o, int n_classes, int max_depth, int min_leaf,
               int mtry, object seed, object sample_idx_o):
    """See _kernels_py.tree_build."""
    cdef cnp.ndarray[float, ndim=2, mode="c"] X = np.ascontiguousarray(X_o, dtype=np.float32)
    cdef cnp.ndarray[int32_t, ndim=1, mode="c"] y = np.ascontiguousarray(y_o, dtype=np.int32)
    cdef cnp.ndarray[int64_t, ndim=1, mode="c"] sample_idx = \
        np.ascontiguousarray(sample_idx_o, dtype=np.int64)
    cdef Py_ssize_t n_boot = sample_idx.shape[0]
    cdef TreeCtx c
    memset(&c, 0, sizeof(TreeCtx))
    c.X = &X[0, 0]
    c.y = &y[0]
    c.n_dims = X.shape[1]
    c.n_classes = n_classes
    c.max_depth = max_depth
    c.min_leaf = min_leaf
    c.mtry = mtry
    c.seed = <uint64_t> (<object> seed)
    c.idx = <int64_t *> malloc(n_boot * sizeof(int64_t))
    c.scratch = <int64_t *> malloc(n_boot * sizeof(int64_t))
    c.keys = <uint64_t *> malloc(n_boot * sizeof(uint64_t))
    c.total = <int64_t *> malloc(n_classes * sizeof(int64_t))
    c.left_cnt = <int64_t *> malloc(n_classes * sizeof(int64_t))
    c.touched = <int32_t *> malloc(n_boot * sizeof(int32_t))
    c.perm = <int32_t *> malloc(c.n_dims * sizeof(int32_t))
    c.cap_nodes = 256
    c.feature = <int32_t *> malloc(c.cap_nodes * sizeof(int32_t))
    c.threshold = <float *> malloc(c.cap_nodes * sizeof(float))
    c.left = <int32_t *> malloc(c.cap_nodes * sizeof(int32_t))
    c.right = <int32_t *> malloc(c.cap_nodes * sizeof(int32_t))
    c.hist_offset = <int32_t *> malloc(c.cap_nodes * sizeof(int32_t))
    c.hist_len = <int32_t *> malloc(c.cap_nodes * sizeof(int32_t))
    c.cap_hist = 256
    c.hist_class = <int32_t *> malloc(c.cap_hist * sizeof(int32_t))
    c.hist_count = <int32_t *> malloc(c.cap_hist * sizeof(int32_t))

    cdef Py_ssize_t i
    cdef Py_ssize_t root = -1
    try:
        if (c.idx == NULL or c.scratch == NULL or c.keys == NULL or c.total == NULL or
                c.left_cnt == NULL or c.touched == NULL or c.perm == NULL or
                c.feature == NULL or c.threshold == NULL or c.left == NULL or
                c.right == NULL or c.hist_offset == NULL or c.hist_len == NULL or
                c.hist_class == NULL or c.hist_count == NULL):
            raise MemoryError
        memset(c.total, 0, n_classes * sizeof(int64_t))
        memset(c.left_cnt, 0, n_classes * sizeof(int64_t))
        with nogil:
            for i in range(n_boot):
                c.idx[i] = sample_idx[i]
            root = _build(&c, 0, n_boot, 0)
        if root < 0:
            raise MemoryError
        out = {
            "feature": np.empty(c.n_nodes, dtype=np.int32),
            "threshold": np.empty(c.n_nodes, dtype=np.float32),
            "left": np.empty(c.n_nodes, dtype=np.int32),
            "right": np.empty(c.n_nodes, dtype=np.int32),
            "hist_offset": np.empty(c.n_nodes, dtype=np.int32),
            "hist_len": np.empty(c.n_nodes, dtype=np.int32),
            "hist_class": np.empty(c.n_hist, dtype=np.int32),
            "hist_count": np.empty(c.n_hist, dtype=np.int32),
        }
        memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["feature"]), c.feature, c.n_nodes * sizeof(int32_t))
        memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["threshold"]), c.threshold, c.n_nodes * sizeof(float))
        memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["left"]), c.left, c.n_nodes * sizeof(int32_t))
        memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["right"]), c.right, c.n_nodes * sizeof(int32_t))
        memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["hist_offset"]), c.hist_offset, c.n_nodes * sizeof(int32_t))
        memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["hist_len"]), c.hist_len, c.n_nodes * sizeof(int32_t))
        if c.n_hist > 0:
            memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["hist_class"]), c.hist_class, c.n_hist * sizeof(int32_t))
            memcpy(cnp.PyArray_DATA(<cnp.ndarray> out["hist_count"]), c.hist_count, c.n_hist * sizeof(int32_t))
        return out
    finally:
        free(c.idx); free(c.scratch); free(c.keys); free(c.total)
        free(c.left_cnt); free(c.touched); free(c.perm)
        free(c.feature); free(c.threshold); free(c.left); free(c.right)
        free(c.hist_offset); free(c.hist_len); free(c.hist_class); free(c.hist_count)


def tree_apply(object feature_o, object threshold_o, object left_o, object right_o, object X_o):
    """See _kernels_py.tree_apply."""
    cdef int32_t[::1] feature = np.ascontiguousarray(feature_o, dtype=np.int32)
    cdef float[::1] threshold = np.ascontiguousarray(threshold_o, dtype=np.float32)
    cdef int32_t[::1] left = np.ascontiguousarray(left_o, dtype=np.int32)
    cdef int32_t[::1] right = np.ascontiguousarray(right_o, dtype=np.int32)
    cdef float[:, ::1] X = np.ascontiguousarray(X_o, dtype=np.float32)
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.zeros(n, dtype=np.int32)
    cdef int32_t[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int32_t node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = node
    return out_arr
