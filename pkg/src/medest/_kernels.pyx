# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled integration kernels.

Operation-for-operation mirror of _kernels_py: same right-hand-side
expressions, same ascending neighbor iteration, same RK4 stage combination,
same blowup test. Keep the two in sync; the scalar-reduction bit-identity
contract depends on the exact arithmetic order used here.
"""

import numpy as np

from libc.math cimport fabs

BACKEND_NAME = "cython"


cdef inline double sgn(double v) nogil:
    # exact signum: never returns -0.0
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


cdef void _median_rhs(double[::1] xs, double[::1] z, double[::1] s,
                      double gamma, long long[::1] indptr,
                      long long[::1] indices, double[::1] out) noexcept nogil:
    cdef Py_ssize_t N = xs.shape[0]
    cdef Py_ssize_t i, jj
    cdef double drive, acc
    for i in range(N):
        drive = s[i] * sgn(z[i] - xs[i])
        acc = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            acc += xs[indices[jj]] - xs[i]
        out[i] = drive + gamma * acc


def run_median(double[::1] x, double[::1] z, double[::1] s, double gamma,
               long long[::1] indptr, long long[::1] indices,
               double dt, Py_ssize_t steps, Py_ssize_t record_every,
               Py_ssize_t step_offset, double[:, ::1] log_x):
    """See _kernels_py.run_median."""
    cdef Py_ssize_t N = x.shape[0]
    cdef double half = 0.5 * dt
    cdef double dt6 = dt / 6.0
    buf = np.empty((5, N))
    cdef double[::1] k1 = buf[0], k2 = buf[1], k3 = buf[2], k4 = buf[3]
    cdef double[::1] xs = buf[4]
    cdef Py_ssize_t i, j, g
    cdef int blown
    cdef Py_ssize_t bad = -1
    with nogil:
        for j in range(1, steps + 1):
            _median_rhs(x, z, s, gamma, indptr, indices, k1)
            for i in range(N):
                xs[i] = x[i] + half * k1[i]
            _median_rhs(xs, z, s, gamma, indptr, indices, k2)
            for i in range(N):
                xs[i] = x[i] + half * k2[i]
            _median_rhs(xs, z, s, gamma, indptr, indices, k3)
            for i in range(N):
                xs[i] = x[i] + dt * k3[i]
            _median_rhs(xs, z, s, gamma, indptr, indices, k4)
            blown = 0
            for i in range(N):
                x[i] = x[i] + dt6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not (fabs(x[i]) <= 1e12):
                    blown = 1
            if blown:
                bad = j
                break
            g = step_offset + j
            if g % record_every == 0:
                for i in range(N):
                    log_x[g // record_every, i] = x[i]
    return bad


cdef void _network_rhs(
        double[:, ::1] A, double[:, ::1] B, double[:, ::1] C,
        long long[::1] m_off, long long[::1] ob_off,
        double[::1] Fo, long long[::1] fo_off,
        double[::1] Go, long long[::1] go_off,
        double[::1] Lo, long long[::1] lo_off,
        double[::1] Mz, long long[::1] mz_off,
        double[:, ::1] Wbar, double[:, ::1] Mout, double[:, ::1] ind,
        double kappa, double kg,
        long long[::1] indptr, long long[::1] indices,
        unsigned char[::1] active,
        double[::1] xs, double[::1] zs, double[:, ::1] xhs,
        double[:, ::1] u2, Py_ssize_t iu,
        double[:, ::1] a2, Py_ssize_t ia,
        double[:, ::1] w2, Py_ssize_t iw,
        double[::1] dx, double[::1] dz, double[:, ::1] dxh,
        double[::1] ybuf, double[::1] argbuf, double[::1] sgbuf,
        double[::1] corrbuf, double[::1] coupbuf) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t p = B.shape[1]
    cdef Py_ssize_t N = ind.shape[0]
    cdef Py_ssize_t i, c, l, r, jj, o_i, m_i, zb, mb, fb, gb, lb, mzb, nb
    cdef double acc, acc2, acc3
    # plant
    for c in range(n):
        acc = 0.0
        for l in range(n):
            acc += A[c, l] * xs[l]
        acc2 = 0.0
        for l in range(p):
            acc2 += B[c, l] * u2[iu, l]
        dx[c] = acc + acc2
    for i in range(N):
        o_i = ob_off[i + 1] - ob_off[i]
        m_i = m_off[i + 1] - m_off[i]
        zb = ob_off[i]
        mb = m_off[i]
        if not active[i]:
            for r in range(o_i):
                dz[zb + r] = 0.0
            for c in range(n):
                dxh[i, c] = 0.0
            continue
        if o_i > 0:
            # y_i = C_i x + a_i + noise
            for r in range(m_i):
                acc = 0.0
                for l in range(n):
                    acc += C[mb + r, l] * xs[l]
                ybuf[r] = acc + a2[ia, mb + r] + w2[iw, mb + r]
            # dz_i = F_i z_i + G_i u + L_i y_i
            fb = fo_off[i]
            gb = go_off[i]
            lb = lo_off[i]
            for r in range(o_i):
                acc = 0.0
                for l in range(o_i):
                    acc += Fo[fb + r * o_i + l] * zs[zb + l]
                acc2 = 0.0
                for l in range(p):
                    acc2 += Go[gb + r * p + l] * u2[iu, l]
                acc3 = 0.0
                for l in range(m_i):
                    acc3 += Lo[lb + r * m_i + l] * ybuf[l]
                dz[zb + r] = (acc + acc2) + acc3
        # correction argument per basis direction
        mzb = mz_off[i]
        for l in range(n):
            acc = 0.0
            for r in range(o_i):
                acc += Mz[mzb + l * o_i + r] * zs[zb + r]
            acc2 = 0.0
            for c in range(n):
                acc2 += Wbar[l, c] * xhs[i, c]
            argbuf[l] = acc - acc2
            sgbuf[l] = ind[i, l] * sgn(argbuf[l])
        for c in range(n):
            acc = 0.0
            for l in range(n):
                acc += Mout[c, l] * sgbuf[l]
            corrbuf[c] = acc
        for c in range(n):
            coupbuf[c] = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            nb = indices[jj]
            for c in range(n):
                coupbuf[c] += xhs[nb, c] - xhs[i, c]
        for c in range(n):
            acc = 0.0
            for l in range(n):
                acc += A[c, l] * xhs[i, l]
            acc2 = 0.0
            for l in range(p):
                acc2 += B[c, l] * u2[iu, l]
            dxh[i, c] = (acc + acc2) + kappa * corrbuf[c] + kg * coupbuf[c]


def run_network(object d, double[::1] x, double[::1] z, double[:, ::1] xhat,
                double[:, ::1] u_half, int u_varies,
                double[:, ::1] a_half, int a_varies,
                double[:, ::1] noise_step, int noise_varies,
                double dt, Py_ssize_t steps, Py_ssize_t record_every,
                Py_ssize_t step_offset,
                double[:, ::1] log_x, double[:, ::1] log_z,
                double[:, :, ::1] log_xhat):
    """See _kernels_py.run_network."""
    cdef double[:, ::1] A = d.A
    cdef double[:, ::1] B = d.B
    cdef double[:, ::1] C = d.C_stack
    cdef long long[::1] m_off = d.m_off
    cdef long long[::1] ob_off = d.ob_off
    cdef double[::1] Fo = d.Fo_flat
    cdef long long[::1] fo_off = d.fo_off
    cdef double[::1] Go = d.Go_flat
    cdef long long[::1] go_off = d.go_off
    cdef double[::1] Lo = d.Lo_flat
    cdef long long[::1] lo_off = d.lo_off
    cdef double[::1] Mz = d.Mz_flat
    cdef long long[::1] mz_off = d.mz_off
    cdef double[:, ::1] Wbar = d.Wbar
    cdef double[:, ::1] Mout = d.Mout
    cdef double[:, ::1] ind = d.indicators
    cdef double kappa = d.kappa
    cdef double kg = d.kg
    cdef long long[::1] indptr = d.indptr
    cdef long long[::1] indices = d.indices
    cdef unsigned char[::1] active = d.active

    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t N = ind.shape[0]
    cdef Py_ssize_t ot = ob_off[N]
    cdef Py_ssize_t mt = m_off[N]
    cdef double half = 0.5 * dt
    cdef double dt6 = dt / 6.0

    kxb = np.empty((4, n)); kzb = np.empty((4, max(ot, 1))); khb = np.empty((4, N, n))
    cdef double[:, ::1] kx = kxb
    cdef double[:, ::1] kz = kzb
    cdef double[:, :, ::1] kh = khb
    sxb = np.empty(n); szb = np.empty(max(ot, 1)); shb = np.empty((N, n))
    cdef double[::1] sx = sxb
    cdef double[::1] sz = szb
    cdef double[:, ::1] sh = shb
    scratch = np.empty((5, max(n, mt, 1)))
    cdef double[::1] ybuf = scratch[0]
    cdef double[::1] argbuf = scratch[1]
    cdef double[::1] sgbuf = scratch[2]
    cdef double[::1] corrbuf = scratch[3]
    cdef double[::1] coupbuf = scratch[4]

    cdef Py_ssize_t i, c, j, g, r, iu0, iu1, iu2, ia0, ia1, ia2, iw
    cdef int blown
    cdef Py_ssize_t bad = -1
    with nogil:
        for j in range(steps):
            iu0 = 2 * j if u_varies else 0
            iu1 = 2 * j + 1 if u_varies else 0
            iu2 = 2 * j + 2 if u_varies else 0
            ia0 = 2 * j if a_varies else 0
            ia1 = 2 * j + 1 if a_varies else 0
            ia2 = 2 * j + 2 if a_varies else 0
            iw = j if noise_varies else 0
            _network_rhs(A, B, C, m_off, ob_off, Fo, fo_off, Go, go_off,
                         Lo, lo_off, Mz, mz_off, Wbar, Mout, ind, kappa, kg,
                         indptr, indices, active, x, z, xhat,
                         u_half, iu0, a_half, ia0, noise_step, iw,
                         kx[0], kz[0], kh[0], ybuf, argbuf, sgbuf, corrbuf, coupbuf)
            for c in range(n):
                sx[c] = x[c] + half * kx[0, c]
            for r in range(ot):
                sz[r] = z[r] + half * kz[0, r]
            for i in range(N):
                for c in range(n):
                    sh[i, c] = xhat[i, c] + half * kh[0, i, c]
            _network_rhs(A, B, C, m_off, ob_off, Fo, fo_off, Go, go_off,
                         Lo, lo_off, Mz, mz_off, Wbar, Mout, ind, kappa, kg,
                         indptr, indices, active, sx, sz, sh,
                         u_half, iu1, a_half, ia1, noise_step, iw,
                         kx[1], kz[1], kh[1], ybuf, argbuf, sgbuf, corrbuf, coupbuf)
            for c in range(n):
                sx[c] = x[c] + half * kx[1, c]
            for r in range(ot):
                sz[r] = z[r] + half * kz[1, r]
            for i in range(N):
                for c in range(n):
                    sh[i, c] = xhat[i, c] + half * kh[1, i, c]
            _network_rhs(A, B, C, m_off, ob_off, Fo, fo_off, Go, go_off,
                         Lo, lo_off, Mz, mz_off, Wbar, Mout, ind, kappa, kg,
                         indptr, indices, active, sx, sz, sh,
                         u_half, iu1, a_half, ia1, noise_step, iw,
                         kx[2], kz[2], kh[2], ybuf, argbuf, sgbuf, corrbuf, coupbuf)
            for c in range(n):
                sx[c] = x[c] + dt * kx[2, c]
            for r in range(ot):
                sz[r] = z[r] + dt * kz[2, r]
            for i in range(N):
                for c in range(n):
                    sh[i, c] = xhat[i, c] + dt * kh[2, i, c]
            _network_rhs(A, B, C, m_off, ob_off, Fo, fo_off, Go, go_off,
                         Lo, lo_off, Mz, mz_off, Wbar, Mout, ind, kappa, kg,
                         indptr, indices, active, sx, sz, sh,
                         u_half, iu2, a_half, ia2, noise_step, iw,
                         kx[3], kz[3], kh[3], ybuf, argbuf, sgbuf, corrbuf, coupbuf)
            blown = 0
            for c in range(n):
                x[c] = x[c] + dt6 * (kx[0, c] + 2.0 * kx[1, c] + 2.0 * kx[2, c] + kx[3, c])
                if not (fabs(x[c]) <= 1e12):
                    blown = 1
            for r in range(ot):
                z[r] = z[r] + dt6 * (kz[0, r] + 2.0 * kz[1, r] + 2.0 * kz[2, r] + kz[3, r])
                if not (fabs(z[r]) <= 1e12):
                    blown = 1
            for i in range(N):
                for c in range(n):
                    xhat[i, c] = xhat[i, c] + dt6 * (kh[0, i, c] + 2.0 * kh[1, i, c]
                                                     + 2.0 * kh[2, i, c] + kh[3, i, c])
                    if not (fabs(xhat[i, c]) <= 1e12):
                        blown = 1
            if blown:
                bad = j + 1
                break
            g = step_offset + j + 1
            if g % record_every == 0:
                r = g // record_every
                for c in range(n):
                    log_x[r, c] = x[c]
                for c in range(ot):
                    log_z[r, c] = z[c]
                for i in range(N):
                    for c in range(n):
                        log_xhat[r, i, c] = xhat[i, c]
    return bad
