"""Integration-kernel backend selection.

The compiled Cython kernels are preferred; the pure-NumPy module is a
drop-in fallback (same call signatures, same arithmetic). Selection happens
once at import, overridable with MEDEST_BACKEND=python|cython|auto.
"""

import os

import numpy as np

from . import _kernels_py

_choice = os.environ.get("MEDEST_BACKEND", "auto").lower()
if _choice not in ("auto", "cython", "python"):
    raise RuntimeError(f"MEDEST_BACKEND must be auto|cython|python, got {_choice!r}")

if _choice == "python":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as _compiled
        kernels = _compiled
    except ImportError:
        if _choice == "cython":
            raise RuntimeError("MEDEST_BACKEND=cython but the compiled extension "
                               "is not importable; rebuild or use python")
        kernels = _kernels_py

BACKEND = kernels.BACKEND_NAME


def get_kernels(name="active"):
    """Return a kernel module by name: active | python | cython."""
    if name == "active":
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels as compiled
        return compiled
    raise ValueError(f"unknown backend {name!r}")


class NetworkData:
    """Flat, C-contiguous packing of everything the network kernel needs.

    Per-agent matrices are stored in concatenated 1-D arrays with int64 offset
    tables so the compiled kernel can index them without Python objects:

      ob_off[i]  start of agent i's partial state in the stacked z vector
      m_off[i]   start of agent i's measurement rows in C_stack / attacks
      fo_off[i]  start of W_i A V_i - L_i C_i V_i (o_i x o_i, row-major)
      go_off[i]  start of W_i B (o_i x p)
      lo_off[i]  start of L_i (o_i x m_i)
      mz_off[i]  start of Wbar V_i (n x o_i)

    Wbar is the row matrix of the correction functionals (the dual basis rows,
    premultiplied by the certificate square root for the lyapunov variant) and
    Mout the matching output basis, so the correction term is
    kappa * Mout @ (s_i ⊙ sgn(Mz_i z_i - Wbar xhat_i)).
    """

    def __init__(self, n, p, A, B, C_stack, m_off, ob_off, Fo_flat, fo_off,
                 Go_flat, go_off, Lo_flat, lo_off, Mz_flat, mz_off, Wbar, Mout,
                 indicators, kappa, gamma, indptr, indices, active):
        self.n = int(n)
        self.p = int(p)
        self.N = int(len(ob_off) - 1)
        f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)
        i64 = lambda a: np.ascontiguousarray(a, dtype=np.int64)
        self.A = f64(A)
        self.B = f64(B)
        self.C_stack = f64(C_stack)
        self.m_off = i64(m_off)
        self.ob_off = i64(ob_off)
        self.Fo_flat = f64(Fo_flat)
        self.fo_off = i64(fo_off)
        self.Go_flat = f64(Go_flat)
        self.go_off = i64(go_off)
        self.Lo_flat = f64(Lo_flat)
        self.lo_off = i64(lo_off)
        self.Mz_flat = f64(Mz_flat)
        self.mz_off = i64(mz_off)
        self.Wbar = f64(Wbar)
        self.Mout = f64(Mout)
        self.indicators = f64(indicators)
        self.kappa = float(kappa)
        self.gamma = float(gamma)
        self.kg = float(kappa) * float(gamma)
        self.indptr = i64(indptr)
        self.indices = i64(indices)
        self.active = np.ascontiguousarray(active, dtype=np.uint8)

    @staticmethod
    def build(plant, banks, Wbar, Mout, indicators, kappa, gamma,
              indptr, indices, active):
        """Pack plant matrices and per-agent observer banks.

        banks is a sequence of objects with V_i, L_i and the cached blocks
        F_i = W_i A V_i - L_i C_i V_i, G_i = W_i B (see observability module).
        """
        N = len(banks)
        n, p = plant.n, plant.p
        o = [b.o_i for b in banks]
        m = [plant.C_blocks[i].shape[0] for i in range(N)]
        ob_off = np.concatenate([[0], np.cumsum(o)])
        m_off = np.concatenate([[0], np.cumsum(m)])
        cat = lambda mats: (np.concatenate([np.asarray(mm, dtype=np.float64).ravel()
                                            for mm in mats])
                            if mats else np.zeros(0))
        offs = lambda sizes: np.concatenate([[0], np.cumsum(sizes)])
        Mz = [np.asarray(Wbar) @ banks[i].V_i for i in range(N)]
        return NetworkData(
            n, p, plant.A, plant.B,
            np.vstack([plant.C_blocks[i] for i in range(N)]),
            m_off, ob_off,
            cat([b.F_i for b in banks]), offs([oi * oi for oi in o]),
            cat([b.G_i for b in banks]), offs([oi * p for oi in o]),
            cat([b.L_i for b in banks]), offs([o[i] * m[i] for i in range(N)]),
            cat(Mz), offs([plant.n * oi for oi in o]),
            Wbar, Mout, indicators, kappa, gamma, indptr, indices, active)
