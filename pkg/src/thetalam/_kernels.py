"""Per-triangle kernels for the theta-graph area energy.

Set THETALAM_DISABLE_NUMBA=1 to force the pure numpy path. Both paths
return per-triangle arrays; nodal scatter happens in numpy with a fixed
order so results do not depend on thread count.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

_DISABLED = os.environ.get("THETALAM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

if HAVE_NUMBA:
    _threads = os.environ.get("THETALAM_THREADS")
    if _threads:
        with warnings.catch_warnings():
            # starting the pool may complain about an old TBB before falling back to another layer
            warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
            numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference


def _tri_grad_np(theta, tri, grad):
    return np.einsum("tk,tkd->td", theta[tri], grad)


def energy_terms_np(theta, tri, grad, w, q):
    g = _tri_grad_np(theta, tri, grad)
    return w * np.sqrt(1.0 + q * np.einsum("td,td->t", g, g))


def gradient_terms_np(theta, tri, grad, w, q):
    g = _tri_grad_np(theta, tri, grad)
    s = np.sqrt(1.0 + q * np.einsum("td,td->t", g, g))
    gl = np.einsum("tkd,td->tk", grad, g)
    return (w * q / s)[:, None] * gl


def hessian_terms_np(theta, tri, grad, w, q):
    g = _tri_grad_np(theta, tri, grad)
    s = np.sqrt(1.0 + q * np.einsum("td,td->t", g, g))
    gl = np.einsum("tkd,td->tk", grad, g)
    gg = np.einsum("tkd,tld->tkl", grad, grad)
    c = w * q
    loc = (c / s)[:, None, None] * gg - (c * q / s**3)[:, None, None] * gl[:, :, None] * gl[:, None, :]
    return loc.reshape(len(tri), 9)


def hessian_pd_terms_np(theta, tri, grad, w, q, y):
    """Symmetrized primal-dual Newton matrix; y is the per-triangle dual field.

    With y = sqrt(q) grad(theta) / S this is exactly the Hessian.
    """
    g = _tri_grad_np(theta, tri, grad)
    s = np.sqrt(1.0 + q * np.einsum("td,td->t", g, g))
    gl = np.einsum("tkd,td->tk", grad, g)
    gy = np.einsum("tkd,td->tk", grad, y)
    gg = np.einsum("tkd,tld->tkl", grad, grad)
    c1 = w * q / s
    c2 = 0.5 * w * q * np.sqrt(q) / s**2
    cross = gy[:, :, None] * gl[:, None, :]
    loc = c1[:, None, None] * gg - c2[:, None, None] * (cross + cross.transpose(0, 2, 1))
    return loc.reshape(len(tri), 9)


# ---------------------------------------------------------------------------
# numba versions

if HAVE_NUMBA:

    @njit(parallel=True, cache=True, fastmath=False)
    def energy_terms_nb(theta, tri, grad, w, q):
        nt = tri.shape[0]
        out = np.empty(nt)
        for t in prange(nt):
            gx = 0.0
            gy = 0.0
            for k in range(3):
                v = theta[tri[t, k]]
                gx += v * grad[t, k, 0]
                gy += v * grad[t, k, 1]
            out[t] = w[t] * np.sqrt(1.0 + q[t] * (gx * gx + gy * gy))
        return out

    @njit(parallel=True, cache=True, fastmath=False)
    def gradient_terms_nb(theta, tri, grad, w, q):
        nt = tri.shape[0]
        out = np.empty((nt, 3))
        for t in prange(nt):
            gx = 0.0
            gy = 0.0
            for k in range(3):
                v = theta[tri[t, k]]
                gx += v * grad[t, k, 0]
                gy += v * grad[t, k, 1]
            c = w[t] * q[t] / np.sqrt(1.0 + q[t] * (gx * gx + gy * gy))
            for k in range(3):
                out[t, k] = c * (grad[t, k, 0] * gx + grad[t, k, 1] * gy)
        return out

    @njit(parallel=True, cache=True, fastmath=False)
    def hessian_terms_nb(theta, tri, grad, w, q):
        nt = tri.shape[0]
        out = np.empty((nt, 9))
        for t in prange(nt):
            gl = np.empty(3)
            gx = 0.0
            gy = 0.0
            for k in range(3):
                v = theta[tri[t, k]]
                gx += v * grad[t, k, 0]
                gy += v * grad[t, k, 1]
            s = np.sqrt(1.0 + q[t] * (gx * gx + gy * gy))
            c1 = w[t] * q[t] / s
            c2 = w[t] * q[t] * q[t] / (s * s * s)
            for k in range(3):
                gl[k] = grad[t, k, 0] * gx + grad[t, k, 1] * gy
            for k in range(3):
                for m in range(3):
                    dot = grad[t, k, 0] * grad[t, m, 0] + grad[t, k, 1] * grad[t, m, 1]
                    out[t, 3 * k + m] = c1 * dot - c2 * gl[k] * gl[m]
        return out

    @njit(parallel=True, cache=True, fastmath=False)
    def hessian_pd_terms_nb(theta, tri, grad, w, q, y):
        nt = tri.shape[0]
        out = np.empty((nt, 9))
        for t in prange(nt):
            gx = 0.0
            gy = 0.0
            for k in range(3):
                v = theta[tri[t, k]]
                gx += v * grad[t, k, 0]
                gy += v * grad[t, k, 1]
            s = np.sqrt(1.0 + q[t] * (gx * gx + gy * gy))
            c1 = w[t] * q[t] / s
            c2 = 0.5 * w[t] * q[t] * np.sqrt(q[t]) / (s * s)
            for k in range(3):
                glk = grad[t, k, 0] * gx + grad[t, k, 1] * gy
                gyk = grad[t, k, 0] * y[t, 0] + grad[t, k, 1] * y[t, 1]
                for m in range(3):
                    glm = grad[t, m, 0] * gx + grad[t, m, 1] * gy
                    gym = grad[t, m, 0] * y[t, 0] + grad[t, m, 1] * y[t, 1]
                    dot = grad[t, k, 0] * grad[t, m, 0] + grad[t, k, 1] * grad[t, m, 1]
                    out[t, 3 * k + m] = c1 * dot - c2 * (gyk * glm + glk * gym)
        return out

    energy_terms = energy_terms_nb
    gradient_terms = gradient_terms_nb
    hessian_terms = hessian_terms_nb
    hessian_pd_terms = hessian_pd_terms_nb
else:
    energy_terms = energy_terms_np
    gradient_terms = gradient_terms_np
    hessian_terms = hessian_terms_np
    hessian_pd_terms = hessian_pd_terms_np


def scatter(tri, local, n):
    """Sum per-triangle vertex contributions into nodes in a fixed order."""
    return np.bincount(tri.ravel(), weights=local.ravel(), minlength=n)
