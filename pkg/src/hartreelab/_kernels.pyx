# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled enumeration kernels for the resonance-set counts."""
import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32


cdef inline int isqrt_floor(long n) noexcept nogil:
    cdef long r
    if n < 0:
        return -1
    r = <long>(n ** 0.5)
    while r * r > n:
        r -= 1
    while (r + 1) * (r + 1) <= n:
        r += 1
    return <int>r


cdef inline long _floordiv(long a, long b) noexcept nogil:
    cdef long q = a // b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef void _pass(int N, int H, int rx, int ry, int rz, int rd, int cx, int cy, int cz,
                const i64[:, ::1] pts, const i64[:, ::1] reps, const i64[::1] weight,
                const i32[::1] shell_tab, const i32[::1] r_tab,
                const i32[::1] sqrt_tab, int nS, int nR, int nW,
                i64[::1] total, i64[::1] single, i64[::1] pair,
                i32[::1] L1, i32[::1] L2, i32[::1] t1, i32[::1] t2):
    cdef int npts = pts.shape[0]
    cdef int nreps = reps.shape[0]
    cdef long NN = <long>N * N
    cdef long wt
    cdef int ix, iy, j, n1, n2, e, b
    cdef int zx, zy, zz, zx_lo, zx_hi, zy_lo, zy_hi, zz_lo, zz_hi, q1, q2
    cdef long cen0, cen1, cen2, rz_left, rd_left, nz, nd
    cdef long v[4][3]
    cdef long f[3]
    cdef long p[3]
    cdef int sh[4]
    cdef int alpha[4]
    cdef long a0, a1, a2, c0, c1, c2, ac, na, nc, lo, hi, fp, t, part
    cdef int r, w, fb, slab, alpha_a, alpha_c, sgn
    # coefficient of z in every vector
    for j in range(4):
        alpha[j] = 0
    alpha[rz] = 1
    alpha[rd] = cz
    alpha_a = alpha[1] - alpha[2]
    alpha_c = alpha[3] - alpha[2]
    for ix in range(nreps):
        wt = weight[ix]
        for j in range(3):
            v[rx][j] = reps[ix, j]
        sh[rx] = shell_tab[reps[ix, 0] * reps[ix, 0] + reps[ix, 1] * reps[ix, 1] + reps[ix, 2] * reps[ix, 2]]
        if rx != 0 and sh[rx] < 0:
            continue
        n1 = 0
        for iy in range(npts):
            for j in range(3):
                v[ry][j] = pts[iy, j]
            sh[ry] = shell_tab[pts[iy, 0] * pts[iy, 0] + pts[iy, 1] * pts[iy, 1] + pts[iy, 2] * pts[iy, 2]]
            if ry != 0 and sh[ry] < 0:
                continue
            # a.c is linear in z when one of a, c does not depend on z: slab f.z in [lo, hi]
            slab = 0
            if alpha_a == 0 or alpha_c == 0:
                slab = 1
                for j in range(3):
                    v[rz][j] = 0
                    v[rd][j] = cx * v[rx][j] + cy * v[ry][j]
                if alpha_a == 0:
                    for j in range(3):
                        f[j] = v[1][j] - v[2][j]
                        p[j] = v[3][j] - v[2][j]
                    sgn = alpha_c
                else:
                    for j in range(3):
                        f[j] = v[3][j] - v[2][j]
                        p[j] = v[1][j] - v[2][j]
                    sgn = alpha_a
                if f[0] == 0 and f[1] == 0 and f[2] == 0:
                    continue
                if alpha_a == 0 and r_tab[f[0] * f[0] + f[1] * f[1] + f[2] * f[2]] < 0:
                    continue
                # a.c = f.p + sgn f.z
                fp = f[0] * p[0] + f[1] * p[1] + f[2] * p[2]
                if sgn > 0:
                    lo = -H - fp
                    hi = H - fp
                else:
                    lo = fp - H
                    hi = fp + H
            n2 = 0
            cen0 = -cz * (cx * v[rx][0] + cy * v[ry][0])
            cen1 = -cz * (cx * v[rx][1] + cy * v[ry][1])
            cen2 = -cz * (cx * v[rx][2] + cy * v[ry][2])
            zx_lo = -N if -N > cen0 - N else <int>(cen0 - N)
            zx_hi = N if N < cen0 + N else <int>(cen0 + N)
            for zx in range(zx_lo, zx_hi + 1):
                rz_left = NN - <long>zx * zx
                rd_left = NN - (zx - cen0) * (zx - cen0)
                if rd_left < 0:
                    continue
                q1 = sqrt_tab[rz_left]
                q2 = sqrt_tab[rd_left]
                zy_lo = -q1 if -q1 > cen1 - q2 else <int>(cen1 - q2)
                zy_hi = q1 if q1 < cen1 + q2 else <int>(cen1 + q2)
                for zy in range(zy_lo, zy_hi + 1):
                    nz = rz_left - <long>zy * zy
                    nd = rd_left - (zy - cen1) * (zy - cen1)
                    if nd < 0 or nz < 0:
                        continue
                    q1 = sqrt_tab[nz]
                    q2 = sqrt_tab[nd]
                    zz_lo = -q1 if -q1 > cen2 - q2 else <int>(cen2 - q2)
                    zz_hi = q1 if q1 < cen2 + q2 else <int>(cen2 + q2)
                    if slab:
                        part = f[0] * zx + f[1] * zy
                        if f[2] == 0:
                            if part < lo or part > hi:
                                continue
                        elif f[2] > 0:
                            t = -_floordiv(-(lo - part), f[2])
                            if t > zz_lo:
                                zz_lo = <int>t
                            t = _floordiv(hi - part, f[2])
                            if t < zz_hi:
                                zz_hi = <int>t
                        else:
                            t = -_floordiv(-(hi - part), f[2])
                            if t > zz_lo:
                                zz_lo = <int>t
                            t = _floordiv(lo - part, f[2])
                            if t < zz_hi:
                                zz_hi = <int>t
                    for zz in range(zz_lo, zz_hi + 1):
                        v[rz][0] = zx
                        v[rz][1] = zy
                        v[rz][2] = zz
                        sh[rz] = shell_tab[zx * zx + zy * zy + zz * zz]
                        if rz != 0 and sh[rz] < 0:
                            continue
                        for j in range(3):
                            v[rd][j] = cx * v[rx][j] + cy * v[ry][j] + cz * v[rz][j]
                        sh[rd] = shell_tab[v[rd][0] * v[rd][0] + v[rd][1] * v[rd][1] + v[rd][2] * v[rd][2]]
                        if rd != 0 and sh[rd] < 0:
                            continue
                        a0 = v[1][0] - v[2][0]
                        a1 = v[1][1] - v[2][1]
                        a2 = v[1][2] - v[2][2]
                        c0 = v[3][0] - v[2][0]
                        c1 = v[3][1] - v[2][1]
                        c2 = v[3][2] - v[2][2]
                        na = a0 * a0 + a1 * a1 + a2 * a2
                        nc = c0 * c0 + c1 * c1 + c2 * c2
                        if na == 0 or nc == 0:
                            continue
                        ac = a0 * c0 + a1 * c1 + a2 * c2
                        if ac > H or ac < -H:
                            continue
                        r = r_tab[na]
                        if r < 0:
                            continue
                        w = <int>(ac + H)
                        fb = (((sh[1] * nS + sh[2]) * nS + sh[3]) * nR + r) * nW + w
                        total[fb] += wt
                        if L1[fb] == 0:
                            t1[n1] = fb
                            n1 += 1
                        L1[fb] += 1
                        if L2[fb] == 0:
                            t2[n2] = fb
                            n2 += 1
                        L2[fb] += 1
            for e in range(n2):
                b = t2[e]
                if L2[b] > pair[b]:
                    pair[b] = L2[b]
                L2[b] = 0
        for e in range(n1):
            b = t1[e]
            if L1[b] > single[b]:
                single[b] = L1[b]
            L1[b] = 0


def orbit_representatives(pts):
    """Points with 0 <= x0 <= x1 <= x2 and the sizes of their signed-permutation orbits."""
    from itertools import permutations
    pts = np.asarray(pts, dtype=np.int64)
    keep = (pts[:, 0] >= 0) & (pts[:, 0] <= pts[:, 1]) & (pts[:, 1] <= pts[:, 2])
    reps = np.ascontiguousarray(pts[keep])
    weight = np.empty(len(reps), dtype=np.int64)
    for i, x in enumerate(reps):
        weight[i] = len(set(permutations(x.tolist()))) * 2 ** int(np.count_nonzero(x))
    return reps, weight


# (x, y, z, derived) roles and the coefficients of derived = cx x + cy y + cz z.
# Role indices: 0 = k, 1 = k1, 2 = k2, 3 = k3. The pinned pair of each pass is (x, y).
PASSES = (
    (0, 1, 2, 3, 1, -1, 1),   # (k, k1):  k3 = k - k1 + k2
    (2, 3, 1, 0, -1, 1, 1),   # (k2, k3): k  = k1 - k2 + k3
    (3, 0, 1, 2, 1, -1, 1),   # (k3, k):  k2 = k1 + k3 - k
    (0, 2, 1, 3, 1, 1, -1),   # (k, k2):  k3 = k + k2 - k1
    (1, 3, 2, 0, 1, 1, -1),   # (k1, k3): k  = k1 + k3 - k2
    (1, 2, 3, 0, 1, -1, 1),   # (k1, k2): k  = k1 - k2 + k3
)


def sweep_counts(int N, cnp.ndarray pts_in, cnp.ndarray shell_in, cnp.ndarray rtab_in,
                 int nS, int nR, int H, passes=None):
    """Six enumeration passes binned by (shell1, shell2, shell3, R, a.c + H).

    Returns per-pass totals, per-pass maxima over the outer variable and
    per-pass maxima over the outer pair. The set is invariant under signed
    coordinate permutations applied to all four vectors, so the outer variable
    runs over representatives 0 <= x0 <= x1 <= x2 and totals carry orbit sizes.
    """
    cdef const i64[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.int64)
    reps_arr, weight_arr = orbit_representatives(pts_in)
    cdef const i64[:, ::1] reps = reps_arr
    cdef const i64[::1] weight = weight_arr
    cdef const i32[::1] shell_tab = np.ascontiguousarray(shell_in, dtype=np.int32)
    cdef const i32[::1] r_tab = np.ascontiguousarray(rtab_in, dtype=np.int32)
    cdef int nW = 2 * H + 1
    cdef int nb = nS * nS * nS * nR * nW
    totals = np.zeros((6, nb), dtype=np.int64)
    singles = np.zeros((6, nb), dtype=np.int64)
    pairs = np.zeros((6, nb), dtype=np.int64)
    cdef const i32[::1] sqrt_tab = np.array([isqrt_floor(n) for n in range(N * N + 1)],
                                            dtype=np.int32)
    L1 = np.zeros(nb, dtype=np.int32)
    L2 = np.zeros(nb, dtype=np.int32)
    t1 = np.zeros(nb, dtype=np.int32)
    t2 = np.zeros(nb, dtype=np.int32)
    for q, (rx, ry, rz, rd, cx, cy, cz) in enumerate(PASSES):
        if passes is not None and q not in passes:
            continue
        _pass(N, H, rx, ry, rz, rd, cx, cy, cz, pts, reps, weight, shell_tab, r_tab, sqrt_tab, nS, nR, nW,
              totals[q], singles[q], pairs[q], L1, L2, t1, t2)
    return totals, singles, pairs


def count_product(cnp.ndarray A_in, cnp.ndarray B_in, cnp.ndarray C_in, int ca, int cb, int cc,
                  int ra, int rb, int rc, int rd, cnp.ndarray ok_in, int N, long omega0):
    """Count (a, b, c) in A x B x C with derived d = ca a + cb b + cc c, subject to the
    resonance-set constraints. ``ok_in`` lists, per role, the admissible squared norms."""
    cdef const i64[:, ::1] A = np.ascontiguousarray(A_in, dtype=np.int64)
    cdef const i64[:, ::1] B = np.ascontiguousarray(B_in, dtype=np.int64)
    cdef const i64[:, ::1] C = np.ascontiguousarray(C_in, dtype=np.int64)
    cdef const cnp.uint8_t[:, ::1] ok = np.ascontiguousarray(ok_in, dtype=np.uint8)
    cdef int nmax = ok.shape[1]
    cdef long v[4][3]
    cdef int i, j, l, t
    cdef long nd, na, nc, om, count = 0
    cdef long a0, a1, a2, c0, c1, c2
    for i in range(A.shape[0]):
        for t in range(3):
            v[ra][t] = A[i, t]
        for j in range(B.shape[0]):
            for t in range(3):
                v[rb][t] = B[j, t]
            for l in range(C.shape[0]):
                for t in range(3):
                    v[rc][t] = C[l, t]
                    v[rd][t] = ca * v[ra][t] + cb * v[rb][t] + cc * v[rc][t]
                nd = v[rd][0] * v[rd][0] + v[rd][1] * v[rd][1] + v[rd][2] * v[rd][2]
                if nd >= nmax or not ok[rd, nd]:
                    continue
                a0 = v[1][0] - v[2][0]
                a1 = v[1][1] - v[2][1]
                a2 = v[1][2] - v[2][2]
                c0 = v[3][0] - v[2][0]
                c1 = v[3][1] - v[2][1]
                c2 = v[3][2] - v[2][2]
                na = a0 * a0 + a1 * a1 + a2 * a2
                nc = c0 * c0 + c1 * c1 + c2 * c2
                if na == 0 or nc == 0 or na >= nmax or not ok[4, na]:
                    continue
                om = 2 * (a0 * c0 + a1 * c1 + a2 * c2)
                if om == omega0:
                    count += 1
    return count
