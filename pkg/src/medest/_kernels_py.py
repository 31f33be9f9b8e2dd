"""Pure-NumPy integration kernels (fallback backend).

Mirrors medest._kernels (Cython) operation for operation. The right-hand
sides and the RK4 stage combination are written with the exact same
elementwise expressions and the same ascending neighbor iteration as the
compiled kernels, so that within one backend the scalar specialization of the
observer network reproduces the median flow bit for bit. Do not "simplify"
the arithmetic here without mirroring the change in _kernels.pyx.
"""

import numpy as np

BACKEND_NAME = "python"


def sgn(v):
    # exact signum: never returns -0.0
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def _blown(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > 1e12:
            return True
    return False


def run_median(x, z, s, gamma, indptr, indices, dt, steps, record_every,
               step_offset, log_x):
    """Integrate the signum-coupled median flow in place.

    x is the N-vector state (modified in place). Logs committed steps j with
    (step_offset + j) % record_every == 0 into log_x rows
    (step_offset + j) // record_every; the caller logs the initial state.
    Returns -1 on success, else the 1-based local step index of the first
    committed state that exceeded the blowup threshold.
    """
    n = x.shape[0]
    half = 0.5 * dt
    dt6 = dt / 6.0
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)

    def rhs(xs, out):
        for i in range(n):
            drive = s[i] * sgn(z[i] - xs[i])
            acc = 0.0
            for j in indices[indptr[i]:indptr[i + 1]]:
                acc += xs[j] - xs[i]
            out[i] = drive + gamma * acc

    for j in range(1, steps + 1):
        rhs(x, k1)
        rhs(x + half * k1, k2)
        rhs(x + half * k2, k3)
        rhs(x + dt * k3, k4)
        x += dt6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if _blown(x):
            return j
        g = step_offset + j
        if g % record_every == 0:
            log_x[g // record_every, :] = x
    return -1


class _Prepared:
    """Per-agent views into the flat NetworkData arrays (fallback only)."""

    def __init__(self, d):
        self.d = d
        n, p = d.n, d.p
        self.o = [int(d.ob_off[i + 1] - d.ob_off[i]) for i in range(d.N)]
        self.m = [int(d.m_off[i + 1] - d.m_off[i]) for i in range(d.N)]
        self.zsl = [slice(int(d.ob_off[i]), int(d.ob_off[i + 1])) for i in range(d.N)]
        self.msl = [slice(int(d.m_off[i]), int(d.m_off[i + 1])) for i in range(d.N)]
        self.C = [d.C_stack[self.msl[i], :] for i in range(d.N)]
        self.Fo = [d.Fo_flat[int(d.fo_off[i]):int(d.fo_off[i + 1])].reshape(self.o[i], self.o[i])
                   for i in range(d.N)]
        self.Go = [d.Go_flat[int(d.go_off[i]):int(d.go_off[i + 1])].reshape(self.o[i], p)
                   for i in range(d.N)]
        self.Lo = [d.Lo_flat[int(d.lo_off[i]):int(d.lo_off[i + 1])].reshape(self.o[i], self.m[i])
                   for i in range(d.N)]
        self.Mz = [d.Mz_flat[int(d.mz_off[i]):int(d.mz_off[i + 1])].reshape(n, self.o[i])
                   for i in range(d.N)]


def _network_rhs(pre, xs, zs, xhs, u, a, w, dx, dz, dxh):
    d = pre.d
    n = d.n
    dx[:] = d.A @ xs + d.B @ u
    sg = np.empty(n)
    for i in range(d.N):
        if not d.active[i]:
            dz[pre.zsl[i]] = 0.0
            dxh[i, :] = 0.0
            continue
        zi = zs[pre.zsl[i]]
        if pre.o[i] > 0:
            y = pre.C[i] @ xs + a[pre.msl[i]] + w[pre.msl[i]]
            dz[pre.zsl[i]] = pre.Fo[i] @ zi + pre.Go[i] @ u + pre.Lo[i] @ y
        arg = pre.Mz[i] @ zi - d.Wbar @ xhs[i]
        for l in range(n):
            sg[l] = d.indicators[i, l] * sgn(arg[l])
        corr = d.Mout @ sg
        coup = np.zeros(n)
        for j in d.indices[d.indptr[i]:d.indptr[i + 1]]:
            coup += xhs[j] - xhs[i]
        dxh[i, :] = (d.A @ xhs[i] + d.B @ u) + d.kappa * corr + d.kg * coup


def run_network(d, x, z, xhat, u_half, u_varies, a_half, a_varies,
                noise_step, noise_varies, dt, steps, record_every,
                step_offset, log_x, log_z, log_xhat):
    """Integrate plant + partial observers + resilient estimators in place.

    u_half/a_half are sampled on the half grid (row 2j+st for local step j,
    stage offset st in {0,1,2}) unless the matching *_varies flag is 0, in
    which case row 0 is used for every stage. noise_step holds one row per
    step (zero-order hold across the step's stages). Logging and return value
    follow run_median.
    """
    pre = _Prepared(d)
    half = 0.5 * dt
    dt6 = dt / 6.0
    n, ot, N = d.n, d.ob_off[-1], d.N
    kx = [np.empty(n) for _ in range(4)]
    kz = [np.empty(int(ot)) for _ in range(4)]
    kh = [np.empty((N, n)) for _ in range(4)]

    def row(arr, varies, idx):
        return arr[idx] if varies else arr[0]

    for j in range(steps):
        w = row(noise_step, noise_varies, j)
        u0, a0 = row(u_half, u_varies, 2 * j), row(a_half, a_varies, 2 * j)
        u1, a1 = row(u_half, u_varies, 2 * j + 1), row(a_half, a_varies, 2 * j + 1)
        u2, a2 = row(u_half, u_varies, 2 * j + 2), row(a_half, a_varies, 2 * j + 2)
        _network_rhs(pre, x, z, xhat, u0, a0, w, kx[0], kz[0], kh[0])
        _network_rhs(pre, x + half * kx[0], z + half * kz[0], xhat + half * kh[0],
                     u1, a1, w, kx[1], kz[1], kh[1])
        _network_rhs(pre, x + half * kx[1], z + half * kz[1], xhat + half * kh[1],
                     u1, a1, w, kx[2], kz[2], kh[2])
        _network_rhs(pre, x + dt * kx[2], z + dt * kz[2], xhat + dt * kh[2],
                     u2, a2, w, kx[3], kz[3], kh[3])
        x += dt6 * (kx[0] + 2.0 * kx[1] + 2.0 * kx[2] + kx[3])
        z += dt6 * (kz[0] + 2.0 * kz[1] + 2.0 * kz[2] + kz[3])
        xhat += dt6 * (kh[0] + 2.0 * kh[1] + 2.0 * kh[2] + kh[3])
        if _blown(x, z, xhat):
            return j + 1
        g = step_offset + j + 1
        if g % record_every == 0:
            r = g // record_every
            log_x[r, :] = x
            log_z[r, :] = z
            log_xhat[r, :, :] = xhat
    return -1
