"""Dense eigenvalue computation for small real matrices.

Hessenberg reduction by Householder reflections followed by an explicitly
shifted QR iteration (Wilkinson shift, complex arithmetic, Givens rotations)
with deflation. Every returned eigenvalue is verified by inverse iteration:
the pair (lambda, v) must satisfy ||M v - lambda v|| <= tol * ||M||.

Intended for desk-scale analysis problems (k <= 64); not a replacement for
LAPACK on large or pathological inputs. Strongly clustered defective
spectra (high-order Jordan structure under tiny perturbations) may converge
to values whose best pair residual exceeds the gate; that surfaces as
ConvergenceError rather than a silently inaccurate spectrum.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, ParameterError

MAX_DIM = 64
RESIDUAL_TOL = 1e-8


def hessenberg(M: np.ndarray) -> np.ndarray:
    """Reduce a real square matrix to upper Hessenberg form (similarity)."""
    H = np.array(M, dtype=float, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1:, k]
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        v = x.copy()
        v[0] += np.sign(x[0]) * nx if x[0] != 0.0 else nx
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        # H <- P H P with P = I - 2 v v^T acting on the trailing block
        H[k + 1:, k:] -= 2.0 * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _wilkinson_shift(H: np.ndarray, hi: int) -> complex:
    """Eigenvalue of the trailing 2x2 block closest to its (2,2) entry."""
    a, b = H[hi - 2, hi - 2], H[hi - 2, hi - 1]
    c, d = H[hi - 1, hi - 2], H[hi - 1, hi - 1]
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c + 0j)
    lam1 = d + half + disc
    lam2 = d + half - disc
    return lam1 if abs(lam1 - d) <= abs(lam2 - d) else lam2


def _qr_sweep(H: np.ndarray, lo: int, hi: int) -> None:
    """One QR step H <- RQ on the (already shifted) Hessenberg block [lo, hi)."""
    idx = range(lo, hi - 1)
    rotations = []
    for i in idx:
        a = H[i, i]
        b = H[i + 1, i]
        r = np.hypot(abs(a), abs(b))
        if r == 0.0:
            c, s = 1.0 + 0j, 0.0 + 0j
        else:
            c, s = np.conj(a) / r, np.conj(b) / r
        rotations.append((c, s))
        rows = H[[i, i + 1], i:hi]
        H[i, i:hi] = c * rows[0] + s * rows[1]
        H[i + 1, i:hi] = -np.conj(s) * rows[0] + np.conj(c) * rows[1]
    for i, (c, s) in zip(idx, rotations):
        top = min(i + 2, hi - 1)
        cols = H[lo:top + 1, [i, i + 1]]
        H[lo:top + 1, i] = np.conj(c) * cols[:, 0] + np.conj(s) * cols[:, 1]
        H[lo:top + 1, i + 1] = -s * cols[:, 0] + c * cols[:, 1]


def _schur_eigenvalues(M: np.ndarray, max_sweeps_per_eig: int = 40) -> np.ndarray:
    n = M.shape[0]
    H = hessenberg(M).astype(complex)
    eigs = []
    hi = n
    budget = max_sweeps_per_eig * max(n, 1)
    sweeps = 0
    stagnation = 0
    scale = np.linalg.norm(M, ord="fro") + 1.0
    while hi > 0:
        if hi == 1:
            eigs.append(H[0, 0])
            hi = 0
            continue
        # deflate negligible subdiagonals
        lo = hi - 1
        while lo > 0:
            small = 1e-16 * (abs(H[lo - 1, lo - 1]) + abs(H[lo, lo]) + scale * 1e-3)
            if abs(H[lo, lo - 1]) <= small:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi - 1:
            eigs.append(H[hi - 1, hi - 1])
            hi -= 1
            stagnation = 0
            continue
        if hi - lo == 2:
            # closed form for the trailing 2x2 block
            a, b = H[lo, lo], H[lo, lo + 1]
            c, d = H[lo + 1, lo], H[lo + 1, lo + 1]
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c + 0j)
            eigs.append(d + half + disc)
            eigs.append(d + half - disc)
            hi = lo
            stagnation = 0
            continue
        if sweeps >= budget:
            raise ConvergenceError(
                f"QR iteration exhausted {budget} sweeps on a {n}x{n} matrix"
            )
        shift = _wilkinson_shift(H, hi)
        if stagnation and stagnation % 12 == 0:
            # exceptional shift to break limit cycles
            shift = H[hi - 1, hi - 1] + 1.5 * abs(H[hi - 1, hi - 2])
        np.fill_diagonal(H[lo:hi, lo:hi], np.diag(H[lo:hi, lo:hi]) - shift)
        _qr_sweep(H, lo, hi)
        np.fill_diagonal(H[lo:hi, lo:hi], np.diag(H[lo:hi, lo:hi]) + shift)
        sweeps += 1
        stagnation += 1
    return np.array(eigs[::-1])


def _residual_ok(M: np.ndarray, lam: complex, norm_M: float) -> bool:
    n = M.shape[0]
    rng = np.random.default_rng(12345)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b /= np.linalg.norm(b)
    scale = norm_M + abs(lam) + 1.0
    # escalating shift perturbations: an exact shift makes the solve
    # singular, while a too-small one can overflow the inverse-iteration
    # amplification for high-order Jordan structure (delta^-n growth); for
    # such structure the best pair residual tracks delta, so one rung sits
    # just under the acceptance tolerance
    for eps_rel in (0.0, 1e-14, 1e-11, 0.3 * RESIDUAL_TOL, 1e-5):
        B = M.astype(complex) - (lam + eps_rel * scale * (1 + 1j)) * np.eye(n)
        try:
            v = np.linalg.solve(B, b)
        except np.linalg.LinAlgError:
            continue
        nv = np.linalg.norm(v)
        if not np.isfinite(nv) or nv == 0.0:
            continue
        v /= nv
        for _ in range(2):
            try:
                v2 = np.linalg.solve(B, v)
            except np.linalg.LinAlgError:
                break
            nv2 = np.linalg.norm(v2)
            if not np.isfinite(nv2) or nv2 == 0.0:
                break
            v = v2 / nv2
        res = np.linalg.norm(M @ v - lam * v)
        if res <= RESIDUAL_TOL * max(norm_M, 1e-300):
            return True
    return False


def eigenvalues(M, max_sweeps_per_eig: int = 40) -> np.ndarray:
    """Full complex spectrum of a real k x k matrix (k <= 64).

    Raises ConvergenceError if the QR iteration does not deflate within its
    sweep budget or a computed pair fails the residual test.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError("eigenvalues expects a square matrix")
    n = M.shape[0]
    if n == 0:
        return np.array([], dtype=complex)
    if n > MAX_DIM:
        raise ParameterError(f"matrix dimension {n} exceeds the supported {MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise ParameterError("matrix entries must be finite")
    if n == 1:
        return np.array([complex(M[0, 0])])
    eigs = _schur_eigenvalues(M, max_sweeps_per_eig)
    norm_M = float(np.linalg.norm(M, ord="fro"))
    for lam in eigs:
        if not _residual_ok(M, complex(lam), norm_M):
            raise ConvergenceError(
                f"eigenvalue {lam:.6g} failed the residual acceptance test"
            )
    order = np.lexsort((eigs.imag, eigs.real))
    return eigs[order]
