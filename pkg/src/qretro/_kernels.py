"""Hot phase-space kernels, compiled with numba when available.

Set ``QRETRO_DISABLE_NUMBA=1`` before import to force the pure-numpy
implementations. Both paths are always importable under explicit names
(``*_numpy`` / ``*_numba``) so they can be compared directly.
"""

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("QRETRO_DISABLE_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
)


def backend():
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Fock-basis Wigner kernel
#
# W(x, p) = (1/pi) sum_k sum_n (2 - delta_k0) (-1)^n h^k_n(t) Re[A[n+k, n] e^{-ik theta}]
# with t = 2(x^2 + p^2) and h^k_n(t) = sqrt(n!/(n+k)!) t^{k/2} e^{-t/2} L^k_n(t),
# generated by the normalised three-term Laguerre recurrence.
# ---------------------------------------------------------------------------


def _recurrence_tables(dim):
    """Coefficients of h_{n+1} = (u[k,n] - t v[k,n]) h_n - w[k,n] h_{n-1}, plus log k!/2."""
    k = np.arange(dim, dtype=float)[:, None]
    n = np.arange(dim, dtype=float)[None, :]
    inv = 1.0 / np.sqrt((n + 1.0) * (n + 1.0 + k))
    u = (2.0 * n + 1.0 + k) * inv
    w = np.sqrt(n * (n + k)) * inv
    half_lgam = np.array([0.5 * math.lgamma(j + 1.0) for j in range(dim)])
    return np.ascontiguousarray(u), np.ascontiguousarray(inv), np.ascontiguousarray(w), half_lgam


def _subdiagonals(matrix):
    """(dim, dim) arrays with [k, n] = A[n + k, n], zero-padded."""
    dim = matrix.shape[0]
    d_re = np.zeros((dim, dim))
    d_im = np.zeros((dim, dim))
    for k in range(dim):
        d = np.diagonal(matrix, offset=-k)
        d_re[k, : d.size] = d.real
        d_im[k, : d.size] = d.imag
    return d_re, d_im


def _wigner_fock_loop(xs, ps, d_re, d_im, u, v, w, half_lgam):
    """Pointwise loop; compiled by numba, or run as plain Python in tests."""
    nx = xs.shape[0]
    npp = ps.shape[0]
    dim = d_re.shape[0]
    out = np.zeros((nx, npp))
    for i in range(nx):
        for j in range(npp):
            x = xs[i]
            p = ps[j]
            t = 2.0 * (x * x + p * p)
            r = math.sqrt(x * x + p * p)
            # e^{-ik theta} built up by repeated multiplication
            cr = x / r if r > 0.0 else 1.0
            ci = -p / r if r > 0.0 else 0.0
            pr = 1.0
            pi_ = 0.0
            logt = math.log(t) if t > 0.0 else 0.0
            acc = 0.0
            for k in range(dim):
                if t > 0.0:
                    h_prev = math.exp(0.5 * k * logt - 0.5 * t - half_lgam[k])
                else:
                    h_prev = 1.0 if k == 0 else 0.0
                nmax = dim - k
                # Re[(a + ib)(pr + i pi)] summed with alternating signs
                part = h_prev * (d_re[k, 0] * pr - d_im[k, 0] * pi_)
                if nmax > 1:
                    h_cur = (1.0 + k - t) * h_prev * v[k, 0]
                    part -= h_cur * (d_re[k, 1] * pr - d_im[k, 1] * pi_)
                    sign = 1.0
                    for n in range(1, nmax - 1):
                        h_next = (u[k, n] - t * v[k, n]) * h_cur - w[k, n] * h_prev
                        part += sign * h_next * (d_re[k, n + 1] * pr - d_im[k, n + 1] * pi_)
                        sign = -sign
                        h_prev = h_cur
                        h_cur = h_next
                acc += part if k == 0 else 2.0 * part
                pr, pi_ = pr * cr - pi_ * ci, pr * ci + pi_ * cr
            out[i, j] = acc / math.pi
    return out


def wigner_fock_numpy(xs, ps, matrix):
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    matrix = np.asarray(matrix, dtype=complex)
    dim = matrix.shape[0]
    X, P = np.meshgrid(xs, ps, indexing="ij")
    t = 2.0 * (X * X + P * P)
    theta = np.arctan2(P, X)
    out = np.zeros_like(t)
    with np.errstate(divide="ignore"):
        logt = np.log(t)
    for k in range(dim):
        if k == 0:
            h_prev = np.exp(-0.5 * t)
        else:
            h_prev = np.where(t > 0, np.exp(0.5 * k * logt - 0.5 * t - 0.5 * math.lgamma(k + 1.0)), 0.0)
        diag = np.diagonal(matrix, offset=-k)  # entries A[n + k, n]
        phase = np.exp(-1j * k * theta)
        part = diag[0] * h_prev
        nmax = dim - k
        if nmax > 1:
            h_cur = (1.0 + k - t) * h_prev / math.sqrt(1.0 + k)
            part = part - diag[1] * h_cur
            sign = 1.0
            for n in range(1, nmax - 1):
                h_next = ((2.0 * n + 1.0 + k - t) * h_cur - math.sqrt(n * (n + k)) * h_prev) / math.sqrt(
                    (n + 1.0) * (n + 1.0 + k)
                )
                part = part + sign * diag[n + 1] * h_next
                sign = -sign
                h_prev, h_cur = h_cur, h_next
        contrib = (part * phase).real
        out += contrib if k == 0 else 2.0 * contrib
    return out / math.pi


# ---------------------------------------------------------------------------
# Diagonal Laguerre series: sum_m c_m e^{-t/2} L_m(t), t = 2(x^2 + p^2)
# ---------------------------------------------------------------------------


def _laguerre_series_loop(xs, ps, coeffs, recip):
    """``recip[m]`` is 1/(m+1); passed in so the inner loop has no division."""
    nx = xs.shape[0]
    npp = ps.shape[0]
    nterms = coeffs.shape[0]
    out = np.zeros((nx, npp))
    for i in range(nx):
        for j in range(npp):
            t = 2.0 * (xs[i] * xs[i] + ps[j] * ps[j])
            h_prev = math.exp(-0.5 * t)
            acc = coeffs[0] * h_prev
            if nterms > 1:
                h_cur = (1.0 - t) * h_prev
                acc += coeffs[1] * h_cur
                for m in range(1, nterms - 1):
                    h_next = ((2.0 * m + 1.0 - t) * h_cur - m * h_prev) * recip[m]
                    acc += coeffs[m + 1] * h_next
                    h_prev = h_cur
                    h_cur = h_next
            out[i, j] = acc
    return out


def laguerre_series_numpy(xs, ps, coeffs):
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    X, P = np.meshgrid(xs, ps, indexing="ij")
    t = 2.0 * (X * X + P * P)
    h_prev = np.exp(-0.5 * t)
    acc = coeffs[0] * h_prev
    if coeffs.size > 1:
        h_cur = (1.0 - t) * h_prev
        acc = acc + coeffs[1] * h_cur
        for m in range(1, coeffs.size - 1):
            h_next = ((2.0 * m + 1.0 - t) * h_cur - m * h_prev) / (m + 1.0)
            acc = acc + coeffs[m + 1] * h_next
            h_prev, h_cur = h_cur, h_next
    return acc


def _wigner_args(xs, ps, matrix):
    matrix = np.asarray(matrix, dtype=complex)
    d_re, d_im = _subdiagonals(matrix)
    return (
        np.ascontiguousarray(xs, dtype=np.float64),
        np.ascontiguousarray(ps, dtype=np.float64),
        d_re,
        d_im,
        *_recurrence_tables(matrix.shape[0]),
    )


def _laguerre_args(xs, ps, coeffs):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    return (
        np.ascontiguousarray(xs, dtype=np.float64),
        np.ascontiguousarray(ps, dtype=np.float64),
        coeffs,
        1.0 / np.arange(1.0, coeffs.size + 1.0),
    )


if HAVE_NUMBA:
    _wigner_fock_jit = numba.njit(cache=True, parallel=False)(_wigner_fock_loop)
    _laguerre_series_jit = numba.njit(cache=True, parallel=False)(_laguerre_series_loop)

    def wigner_fock_numba(xs, ps, matrix):
        return _wigner_fock_jit(*_wigner_args(xs, ps, matrix))

    def laguerre_series_numba(xs, ps, coeffs):
        return _laguerre_series_jit(*_laguerre_args(xs, ps, coeffs))

else:  # pragma: no cover
    wigner_fock_numba = None
    laguerre_series_numba = None


def wigner_fock(xs, ps, matrix):
    """Wigner function of ``matrix`` on the tensor grid ``xs`` x ``ps``."""
    if USE_NUMBA:
        return wigner_fock_numba(xs, ps, matrix)
    return wigner_fock_numpy(xs, ps, matrix)


def laguerre_series(xs, ps, coeffs):
    """Evaluate ``sum_m coeffs[m] e^{-t/2} L_m(t)`` with ``t = 2(x^2+p^2)``."""
    if USE_NUMBA:
        return laguerre_series_numba(xs, ps, coeffs)
    return laguerre_series_numpy(xs, ps, coeffs)
