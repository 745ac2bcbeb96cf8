# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Per-cell stencil construction, compiled.

Mirrors the pure-Python routines of :mod:`adlbr.lattice` and
:mod:`adlbr.stencil` step for step; every function fills caller-allocated
output arrays and returns the index of the first rejected cell, or -1.
"""

from libc.math cimport floor, ceil, sqrt, fabs

cdef double SPD_RTOL = 1e-12


cdef inline long rnd(double x) noexcept nogil:
    if x >= 0:
        return <long>floor(x + 0.5)
    return -<long>floor(-x + 0.5)


# ---------------------------------------------------------------- 2D ------

cdef inline double dot2(double m00, double m01, double m11,
                        long u0, long u1, long v0, long v1) noexcept nogil:
    return m00 * u0 * v0 + m01 * u0 * v1 + m01 * u1 * v0 + m11 * u1 * v1


cdef inline bint spd2(double a, double b, double c) noexcept nogil:
    cdef double s = fabs(a)
    if fabs(b) > s:
        s = fabs(b)
    if fabs(c) > s:
        s = fabs(c)
    if not (s > 0):
        return False
    return a > SPD_RTOL * s and a * c - b * b > SPD_RTOL * s * s


def adlbr_2d(const double[:, ::1] D, long[:, :, ::1] offsets, double[:, ::1] weights):
    """D rows are (a, b, c) for [[a, b], [b, c]]."""
    cdef Py_ssize_t n, N = D.shape[0]
    cdef double a, b, c, det, s, m00, m01, m11, ne, nf, w
    cdef long e0, e1, f0, f1, t0, t1, k, g0, g1
    cdef long sb[3][2]
    cdef int i, j1, j2
    cdef Py_ssize_t bad = -1
    with nogil:
        for n in range(N):
            a = D[n, 0]
            b = D[n, 1]
            c = D[n, 2]
            if not spd2(a, b, c):
                bad = n
                break
            det = a * c - b * b
            s = sqrt(det) / det
            m00 = s * c
            m01 = -s * b
            m11 = s * a
            e0 = 1; e1 = 0; f0 = 0; f1 = 1
            nf = m11
            while True:
                k = rnd(dot2(m00, m01, m11, e0, e1, f0, f1) / nf)
                t0 = e0 - k * f0
                t1 = e1 - k * f1
                e0 = f0; e1 = f1
                f0 = t0; f1 = t1
                ne = nf
                nf = dot2(m00, m01, m11, f0, f1, f0, f1)
                if not ne > nf:
                    break
            if dot2(m00, m01, m11, e0, e1, f0, f1) > 0:
                f0 = -f0
                f1 = -f1
            g0 = -e0 - f0
            g1 = -e1 - f1
            sb[0][0] = e0; sb[0][1] = e1
            sb[1][0] = f0; sb[1][1] = f1
            sb[2][0] = g0; sb[2][1] = g1
            for i in range(3):
                j1 = (i + 1) % 3
                j2 = (i + 2) % 3
                # perp(u) = (-u1, u0)
                w = -0.5 * dot2(a, b, c, -sb[j1][1], sb[j1][0], -sb[j2][1], sb[j2][0])
                weights[n, i] = w if w > 0 else 0.0
                offsets[n, i, 0] = sb[i][0]
                offsets[n, i, 1] = sb[i][1]
    return bad


cdef inline long smallest_multiple(long m, double num, double den) noexcept nogil:
    cdef long x = <long>ceil(m * num / den)
    if x < 1:
        x = 1
    while x > 1 and num * m <= den * (x - 1):
        x -= 1
    while num * m > den * x:
        x += 1
    return x


def ann_2d(const double[:, ::1] D, long[:, :, ::1] offsets, double[:, ::1] weights,
           long max_search):
    """Returns -1, the index of a non-SPD cell, or -(index + 2) on search overflow."""
    cdef Py_ssize_t n, N = D.shape[0]
    cdef double a, b, c, ab
    cdef long m, p, q, pb = 0, qb = 0, best_sum, sgn
    cdef Py_ssize_t bad = -1
    with nogil:
        for n in range(N):
            a = D[n, 0]
            b = D[n, 1]
            c = D[n, 2]
            if not spd2(a, b, c):
                bad = n
                break
            offsets[n, 0, 0] = 1; offsets[n, 0, 1] = 0
            offsets[n, 1, 0] = 0; offsets[n, 1, 1] = 1
            if b == 0:
                offsets[n, 2, 0] = 1; offsets[n, 2, 1] = 1
                weights[n, 0] = a / 2
                weights[n, 1] = c / 2
                weights[n, 2] = 0.0
                continue
            sgn = 1 if b > 0 else -1
            ab = fabs(b)
            pb = 0
            for m in range(1, max_search + 1):
                best_sum = 0
                q = smallest_multiple(m, ab, a)
                if q <= m and ab * q <= c * m:
                    best_sum = m + q
                    pb = m
                    qb = q
                p = smallest_multiple(m, ab, c)
                if p <= m and ab * p <= a * m:
                    if best_sum == 0 or p + m < best_sum:
                        best_sum = p + m
                        pb = p
                        qb = m
                if best_sum:
                    break
            if pb == 0:
                bad = -(n + 2)
                break
            qb = sgn * qb
            offsets[n, 2, 0] = pb
            offsets[n, 2, 1] = qb
            weights[n, 0] = 0.5 * (a - (<double>pb) / qb * b)
            weights[n, 1] = 0.5 * (c - (<double>qb) / pb * b)
            weights[n, 2] = 0.5 * b / (pb * qb)
            if not weights[n, 0] > 0:
                weights[n, 0] = 0.0
            if not weights[n, 1] > 0:
                weights[n, 1] = 0.0
    return bad


# ---------------------------------------------------------------- 3D ------

cdef inline double dot3(double[3][3] M, long* u, long* v) noexcept nogil:
    cdef double s = 0.0
    cdef int i, j
    for i in range(3):
        for j in range(3):
            s = s + M[i][j] * u[i] * v[j]
    return s


cdef inline void copy3(long* dst, long* src) noexcept nogil:
    dst[0] = src[0]; dst[1] = src[1]; dst[2] = src[2]


cdef inline void sort3(double[3][3] M, long[3][3] B) noexcept nogil:
    # stable insertion sort by M-norm
    cdef long tmp[3]
    cdef double n[3]
    cdef double tn
    cdef int i, j
    for i in range(3):
        n[i] = dot3(M, B[i], B[i])
    for i in range(1, 3):
        j = i
        while j > 0 and n[j] < n[j - 1]:
            copy3(tmp, B[j]); copy3(B[j], B[j - 1]); copy3(B[j - 1], tmp)
            tn = n[j]; n[j] = n[j - 1]; n[j - 1] = tn
            j -= 1


cdef inline void lagrange_pair3(double[3][3] M, long* e, long* f) noexcept nogil:
    cdef double ne, nf
    cdef long k, t[3]
    cdef int i
    nf = dot3(M, f, f)
    while True:
        k = rnd(dot3(M, e, f) / nf)
        for i in range(3):
            t[i] = e[i] - k * f[i]
        copy3(e, f)
        copy3(f, t)
        ne = nf
        nf = dot3(M, f, f)
        if not ne > nf:
            return


cdef inline bint closest_in_plane(double[3][3] M, long* b0, long* b1, long* t) noexcept nogil:
    """Replace t by its shortest representative mod (b0, b1); True if it changed."""
    cdef double g00, g01, g11, r0, r1, det, x0, x1, best_n, nn
    cdef long k0c, k1c, k0, k1
    cdef long best[3]
    cdef long cand[3]
    cdef bint changed = False
    cdef int i
    g00 = dot3(M, b0, b0)
    g01 = dot3(M, b0, b1)
    g11 = dot3(M, b1, b1)
    r0 = dot3(M, b0, t)
    r1 = dot3(M, b1, t)
    det = g00 * g11 - g01 * g01
    x0 = (g11 * r0 - g01 * r1) / det
    x1 = (g00 * r1 - g01 * r0) / det
    k0c = rnd(x0)
    k1c = rnd(x1)
    copy3(best, t)
    best_n = dot3(M, t, t)
    for k0 in range(k0c - 1, k0c + 2):
        for k1 in range(k1c - 1, k1c + 2):
            for i in range(3):
                cand[i] = t[i] - k0 * b0[i] - k1 * b1[i]
            nn = dot3(M, cand, cand)
            if nn < best_n * (1.0 - 1e-12):
                copy3(best, cand)
                best_n = nn
                changed = True
    copy3(t, best)
    return changed


cdef inline void reduce3(double[3][3] M, long[3][3] B) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            B[i][j] = 1 if i == j else 0
    while True:
        sort3(M, B)
        lagrange_pair3(M, B[0], B[1])
        if not closest_in_plane(M, B[0], B[1], B[2]):
            sort3(M, B)
            return


cdef inline bint spd3(double[3][3] D) noexcept nogil:
    cdef double s = 0.0, m2, m3
    cdef int i, j
    for i in range(3):
        for j in range(3):
            if fabs(D[i][j]) > s:
                s = fabs(D[i][j])
    if not (s > 0):
        return False
    m2 = D[0][0] * D[1][1] - D[0][1] * D[1][0]
    m3 = (D[0][0] * (D[1][1] * D[2][2] - D[1][2] * D[2][1])
          - D[0][1] * (D[1][0] * D[2][2] - D[1][2] * D[2][0])
          + D[0][2] * (D[1][0] * D[2][1] - D[1][1] * D[2][0]))
    return D[0][0] > SPD_RTOL * s and m2 > SPD_RTOL * s * s and m3 > SPD_RTOL * s * s * s


cdef int PERMS[6][3]
PERMS[0][:] = [0, 1, 2]
PERMS[1][:] = [0, 2, 1]
PERMS[2][:] = [1, 0, 2]
PERMS[3][:] = [1, 2, 0]
PERMS[4][:] = [2, 0, 1]
PERMS[5][:] = [2, 1, 0]

cdef int PAIRS[6][2]
PAIRS[0][:] = [0, 1]
PAIRS[1][:] = [0, 2]
PAIRS[2][:] = [0, 3]
PAIRS[3][:] = [1, 2]
PAIRS[4][:] = [1, 3]
PAIRS[5][:] = [2, 3]


def adlbr_3d(const double[:, ::1] D, long[:, :, ::1] offsets, double[:, ::1] weights):
    """D rows are (xx, xy, xz, yy, yz, zz)."""
    cdef Py_ssize_t n, N = D.shape[0]
    cdef double M[3][3]
    cdef long B[3][3]
    cdef long b1[3]
    cdef long b2[3]
    cdef long b3[3]
    cdef long sb[4][3]
    cdef int i, j, k, l, pi, pidx
    cdef double s12, s13, s23, w
    cdef Py_ssize_t bad = -1
    with nogil:
        for n in range(N):
            M[0][0] = D[n, 0]; M[0][1] = D[n, 1]; M[0][2] = D[n, 2]
            M[1][0] = D[n, 1]; M[1][1] = D[n, 3]; M[1][2] = D[n, 4]
            M[2][0] = D[n, 2]; M[2][1] = D[n, 4]; M[2][2] = D[n, 5]
            if not spd3(M):
                bad = n
                break
            reduce3(M, B)
            for pidx in range(6):
                copy3(b1, B[PERMS[pidx][0]])
                copy3(b2, B[PERMS[pidx][1]])
                copy3(b3, B[PERMS[pidx][2]])
                s12 = fabs(dot3(M, b1, b2))
                s13 = fabs(dot3(M, b1, b3))
                s23 = fabs(dot3(M, b2, b3))
                if s12 <= s13 and s13 <= s23:
                    break
            if dot3(M, b1, b3) > 0:
                for i in range(3):
                    b1[i] = -b1[i]
            if dot3(M, b2, b3) > 0:
                for i in range(3):
                    b2[i] = -b2[i]
            if dot3(M, b1, b2) <= 0:
                for i in range(3):
                    sb[0][i] = b1[i]
                    sb[1][i] = b2[i]
                    sb[2][i] = b3[i]
                    sb[3][i] = -(b1[i] + b2[i] + b3[i])
            else:
                for i in range(3):
                    sb[0][i] = -b1[i]
                    sb[1][i] = b2[i]
                    sb[2][i] = b1[i] + b3[i]
                    sb[3][i] = -(b2[i] + b3[i])
            for pi in range(6):
                i = PAIRS[pi][0]
                j = PAIRS[pi][1]
                # complementary pair (k, l), k < l
                k = -1
                for l in range(4):
                    if l != i and l != j:
                        if k < 0:
                            k = l
                        else:
                            break
                offsets[n, pi, 0] = sb[k][1] * sb[l][2] - sb[k][2] * sb[l][1]
                offsets[n, pi, 1] = sb[k][2] * sb[l][0] - sb[k][0] * sb[l][2]
                offsets[n, pi, 2] = sb[k][0] * sb[l][1] - sb[k][1] * sb[l][0]
                w = -0.5 * dot3(M, sb[i], sb[j])
                weights[n, pi] = w if w > 0 else 0.0
    return bad
