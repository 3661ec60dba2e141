"""Numerical kernels: tridiagonal direct solver and a small dense eigensolver.

Both kernels are self-contained.  The tridiagonal solver is a pivot-free
Thomas algorithm (safe for the diagonally dominant systems produced by the
implicit-diffusion steps); the eigensolver is a Hessenberg reduction followed
by Francis double-shift QR iteration, adequate for the small (<= 32 x 32)
Jacobian matrices of the stability analysis.

The hot loops are written in scalar style so they can optionally be compiled
with numba; without numba the pure-Python versions are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EigenConvergenceError, FactorizationError

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# ---------------------------------------------------------------------------
# Tridiagonal solver (Thomas algorithm, no pivoting)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _thomas_factor(sub, diag, sup, piv, mult):
    """LU factor without pivoting; returns 0 on success, else failing row+1."""
    n = diag.shape[0]
    piv[0] = diag[0]
    if abs(piv[0]) < 1e-300:
        return 1
    for i in range(1, n):
        m = sub[i - 1] / piv[i - 1]
        mult[i - 1] = m
        piv[i] = diag[i] - m * sup[i - 1]
        if abs(piv[i]) < 1e-300:
            return i + 1
    return 0


@njit(cache=True)
def _thomas_solve(piv, mult, sup, rhs, out):
    n = piv.shape[0]
    out[0] = rhs[0]
    for i in range(1, n):
        out[i] = rhs[i] - mult[i - 1] * out[i - 1]
    out[n - 1] /= piv[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = (out[i] - sup[i] * out[i + 1]) / piv[i]


@dataclass
class TridiagonalOperator:
    """Cached LU factorization of a tridiagonal matrix.

    The factorization is pivot-free, which is stable here because every
    system we factor is diagonally dominant (checked at factor time).
    Instances are immutable after creation; concurrent solves are safe when
    each caller passes its own ``out`` buffer.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    _piv: np.ndarray = field(repr=False, default=None)
    _mult: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def solve(self, rhs: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if rhs.shape[0] != self.n:
            raise DimensionError(f"rhs has length {rhs.shape[0]}, expected {self.n}")
        if out is None:
            out = np.empty_like(rhs)
        _thomas_solve(self._piv, self._mult, self.sup, rhs, out)
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y


def tridiag_factor(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray,
                   *, check_dominance: bool = True) -> TridiagonalOperator:
    """Factor a tridiagonal matrix given its sub/main/super diagonals.

    Parameters
    ----------
    sub, diag, sup : ndarray
        Bands of lengths n-1, n, n-1.
    check_dominance : bool
        Verify weak diagonal dominance before factoring.

    Raises
    ------
    FactorizationError
        On a zero pivot or, when requested, a non-dominant matrix.
    """
    sub = np.ascontiguousarray(sub, dtype=float)
    diag = np.ascontiguousarray(diag, dtype=float)
    sup = np.ascontiguousarray(sup, dtype=float)
    n = diag.shape[0]
    if sub.shape[0] != n - 1 or sup.shape[0] != n - 1:
        raise DimensionError("band lengths must be (n-1, n, n-1)")
    if check_dominance:
        off = np.zeros(n)
        off[:-1] += np.abs(sup)
        off[1:] += np.abs(sub)
        slack = np.abs(diag) - off
        if np.min(slack) < -1e-12 * np.max(np.abs(diag)):
            raise FactorizationError(
                f"matrix is not diagonally dominant (worst slack {np.min(slack):.3e})")
    piv = np.empty(n)
    mult = np.empty(max(n - 1, 1))
    status = _thomas_factor(sub, diag, sup, piv, mult)
    if status != 0:
        raise FactorizationError(f"zero pivot in row {status - 1}")
    op = TridiagonalOperator(sub, diag, sup)
    op._piv = piv
    op._mult = mult
    return op


def tridiag_solve(op: TridiagonalOperator, rhs: np.ndarray,
                  out: np.ndarray | None = None) -> np.ndarray:
    """Solve ``op @ x = rhs`` using the cached factorization."""
    return op.solve(rhs, out=out)


# ---------------------------------------------------------------------------
# Dense eigensolver (Hessenberg + Francis double-shift QR)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _hessenberg_inplace(H):
    """Householder similarity reduction to upper Hessenberg form."""
    n = H.shape[0]
    v = np.empty(n)
    for k in range(n - 2):
        scale = 0.0
        for i in range(k + 1, n):
            scale += abs(H[i, k])
        if scale == 0.0:
            continue
        sigma = 0.0
        for i in range(k + 1, n):
            v[i] = H[i, k] / scale
            sigma += v[i] * v[i]
        norm = np.sqrt(sigma)
        if H[k + 1, k] < 0.0:
            norm = -norm
        v[k + 1] += norm
        beta = 1.0 / (norm * v[k + 1])
        # rows: H <- (I - beta v v^T) H
        for j in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * H[i, j]
            s *= beta
            for i in range(k + 1, n):
                H[i, j] -= s * v[i]
        # columns: H <- H (I - beta v v^T)
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += H[i, j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                H[i, j] -= s * v[j]
        for i in range(k + 2, n):
            H[i, k] = 0.0


@njit(cache=True)
def _qr_hessenberg_eigenvalues(H, wr, wi, max_sweeps):
    """Francis double-shift QR on an upper Hessenberg matrix.

    Fills wr/wi with eigenvalue real/imaginary parts.  Returns 0 on success,
    1 if the sweep cap was reached before full deflation.
    """
    n = H.shape[0]
    eps = 2.220446049250313e-16
    hi = n - 1
    sweeps = 0
    block_iters = 0
    while hi >= 0:
        if sweeps > max_sweeps:
            return 1
        # deflate trailing 1x1 / 2x2 blocks
        while hi >= 0:
            if hi == 0:
                wr[0] = H[0, 0]
                wi[0] = 0.0
                hi = -1
                block_iters = 0
                break
            s = abs(H[hi - 1, hi - 1]) + abs(H[hi, hi])
            if s == 0.0:
                s = 1.0
            if abs(H[hi, hi - 1]) <= eps * s:
                H[hi, hi - 1] = 0.0
                wr[hi] = H[hi, hi]
                wi[hi] = 0.0
                hi -= 1
                block_iters = 0
                continue
            if hi >= 1:
                deflate2 = False
                if hi - 1 == 0:
                    deflate2 = True
                else:
                    s2 = abs(H[hi - 2, hi - 2]) + abs(H[hi - 1, hi - 1])
                    if s2 == 0.0:
                        s2 = 1.0
                    if abs(H[hi - 1, hi - 2]) <= eps * s2:
                        H[hi - 1, hi - 2] = 0.0
                        deflate2 = True
                if deflate2:
                    # 2x2 block eigenvalues
                    a = H[hi - 1, hi - 1]
                    b = H[hi - 1, hi]
                    c = H[hi, hi - 1]
                    d = H[hi, hi]
                    tr2 = 0.5 * (a + d)
                    det = a * d - b * c
                    disc = tr2 * tr2 - det
                    if disc >= 0.0:
                        rt = np.sqrt(disc)
                        if tr2 >= 0.0:
                            l1 = tr2 + rt
                        else:
                            l1 = tr2 - rt
                        if l1 != 0.0:
                            l2 = det / l1
                        else:
                            l2 = 0.0
                        wr[hi - 1] = l1
                        wi[hi - 1] = 0.0
                        wr[hi] = l2
                        wi[hi] = 0.0
                    else:
                        rt = np.sqrt(-disc)
                        wr[hi - 1] = tr2
                        wi[hi - 1] = rt
                        wr[hi] = tr2
                        wi[hi] = -rt
                    hi -= 2
                    block_iters = 0
                    continue
            break
        if hi < 0:
            break
        # active block [lo..hi]
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if s == 0.0:
                s = 1.0
            if abs(H[lo, lo - 1]) <= eps * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        # shift from trailing 2x2; exceptional shift if stalled
        block_iters += 1
        if block_iters % 11 == 10:
            t = abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2]) if hi - 2 >= lo else abs(H[hi, hi - 1])
            ssum = 1.5 * t
            sprod = -0.4375 * t * t
        else:
            ssum = H[hi - 1, hi - 1] + H[hi, hi]
            sprod = H[hi - 1, hi - 1] * H[hi, hi] - H[hi - 1, hi] * H[hi, hi - 1]
        # first column of (H - s1)(H - s2) e1 within the block
        x = H[lo, lo]
        y = H[lo + 1, lo]
        p = x * x + H[lo, lo + 1] * y - ssum * x + sprod
        q = y * (x + H[lo + 1, lo + 1] - ssum)
        if lo + 2 <= hi:
            r = y * H[lo + 2, lo + 1]
        else:
            r = 0.0
        # bulge chase
        for k in range(lo, hi):
            if k > lo:
                p = H[k, k - 1]
                q = H[k + 1, k - 1]
                r = H[k + 2, k - 1] if k + 2 <= hi else 0.0
            scale = abs(p) + abs(q) + abs(r)
            if scale == 0.0:
                continue
            p /= scale
            q /= scale
            r /= scale
            alpha = np.sqrt(p * p + q * q + r * r)
            if p > 0.0:
                alpha = -alpha
            if alpha == 0.0:
                continue
            v0 = p - alpha
            v1 = q
            v2 = r
            beta = -1.0 / (alpha * v0)  # 2 / ||v||^2 for this Householder vector
            jlo = k - 1 if k - 1 >= lo else lo
            for j in range(jlo, hi + 1):
                s = v0 * H[k, j] + v1 * H[k + 1, j]
                if k + 2 <= hi:
                    s += v2 * H[k + 2, j]
                s *= beta
                H[k, j] -= s * v0
                H[k + 1, j] -= s * v1
                if k + 2 <= hi:
                    H[k + 2, j] -= s * v2
            iend = k + 3 if k + 3 <= hi else hi
            for i in range(lo, iend + 1):
                s = v0 * H[i, k] + v1 * H[i, k + 1]
                if k + 2 <= hi:
                    s += v2 * H[i, k + 2]
                s *= beta
                H[i, k] -= s * v0
                H[i, k + 1] -= s * v1
                if k + 2 <= hi:
                    H[i, k + 2] -= s * v2
            if k > lo:
                H[k + 1, k - 1] = 0.0
                if k + 2 <= hi:
                    H[k + 2, k - 1] = 0.0
        sweeps += 1
    return 0


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real matrix.

    Attributes
    ----------
    values : ndarray of complex
        All eigenvalues (conjugation-closed for real input).
    min_real : float
        Most negative real part over the whole spectrum.
    lambda_min : float or None
        Most negative eigenvalue among the numerically real ones, or None
        if no eigenvalue is real to within ``real_tol``.
    """

    values: np.ndarray
    min_real: float
    lambda_min: float | None

    @staticmethod
    def from_values(values: np.ndarray, real_tol: float = 1e-8) -> "Spectrum":
        values = np.asarray(values, dtype=complex)
        min_real = float(values.real.min()) if values.size else 0.0
        mask = np.abs(values.imag) <= real_tol * np.maximum(1.0, np.abs(values.real))
        lam = float(values.real[mask].min()) if mask.any() else None
        return Spectrum(values=values, min_real=min_real, lambda_min=lam)


def dense_eigenvalues(M: np.ndarray, max_sweeps_per_eig: int = 40,
                      real_tol: float = 1e-8) -> Spectrum:
    """All eigenvalues of a small real square matrix.

    Uses Householder reduction to Hessenberg form followed by Francis
    double-shift QR with deflation; complex pairs are handled without
    complex arithmetic.

    Raises
    ------
    EigenConvergenceError
        If the QR iteration does not deflate fully within the sweep cap.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError("matrix must be square")
    if not np.isfinite(M).all():
        raise ValueError("matrix entries must be finite")
    n = M.shape[0]
    if n == 0:
        return Spectrum.from_values(np.empty(0, complex))
    if n == 1:
        return Spectrum.from_values(np.array([M[0, 0]], complex), real_tol)
    H = np.array(M, dtype=float, order="C", copy=True)
    _hessenberg_inplace(H)
    wr = np.empty(n)
    wi = np.empty(n)
    status = _qr_hessenberg_eigenvalues(H, wr, wi, max_sweeps_per_eig * n)
    if status != 0:
        raise EigenConvergenceError(
            f"QR iteration did not converge within {max_sweeps_per_eig * n} sweeps")
    return Spectrum.from_values(wr + 1j * wi, real_tol)


def eigenvalues_batch(mats: np.ndarray, max_sweeps_per_eig: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of a stack of small matrices, shape (m, n, n).

    Returns (wr, wi) arrays of shape (m, n).  Non-convergent entries are
    filled with NaN rather than raising, so callers scanning many states can
    skip and report them.
    """
    mats = np.ascontiguousarray(mats, dtype=float)
    m, n, _ = mats.shape
    wr = np.empty((m, n))
    wi = np.empty((m, n))
    for i in range(m):
        H = mats[i].copy()
        _hessenberg_inplace(H)
        status = _qr_hessenberg_eigenvalues(H, wr[i], wi[i], max_sweeps_per_eig * n)
        if status != 0:
            wr[i] = np.nan
            wi[i] = np.nan
    return wr, wi
