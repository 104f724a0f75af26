"""Structure analysis of linear plants (A, B, C): strict relative degree,
chain-of-integrators normal form with internal dynamics, zero-dynamics
stability and sign-definiteness of the leading Markov parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eigen import eigenvalues
from .errors import NoRelativeDegree, NumericalRankError, ParameterError


@dataclass(frozen=True)
class StateSpace:
    """Real linear plant x' = Ax + Bu, y = Cx with m inputs = m outputs."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if C.ndim == 1:
            C = C[None, :]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ParameterError("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise ParameterError("B and C must be conformable with A")
        if B.shape[1] != C.shape[0]:
            raise ParameterError("input and output dimensions must agree")
        if B.shape[1] > n:
            raise ParameterError("m must not exceed n")
        for M in (A, B, C):
            if not np.all(np.isfinite(M)):
                raise ParameterError("state-space matrices must be finite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def relative_degree(ss: StateSpace, zero_tol: float = 1e-10,
                    inv_tol: float = 1e-10):
    """Strict relative degree (r, Gamma) from the Markov parameters.

    r is the smallest integer with C A^k B entrywise negligible for k < r-1
    and Gamma = C A^{r-1} B invertible; returns None when the first
    non-negligible Markov parameter is singular or none exists up to k = n-1.
    """
    Mk = ss.C @ ss.B
    Ak = np.eye(ss.n)
    for k in range(ss.n):
        if k > 0:
            Ak = Ak @ ss.A
            Mk = ss.C @ Ak @ ss.B
        if np.all(np.abs(Mk) < zero_tol):
            continue
        smin = np.linalg.svd(Mk, compute_uv=False)[-1]
        if smin > inv_tol:
            return k + 1, Mk
        return None
    return None


@dataclass(frozen=True)
class BIForm:
    """Block data of the normal form: output-chain rows R_1..R_r, internal
    coupling S, P, internal dynamics matrix Q, leading gain Gamma, and the
    coordinate change U. ``structure_residual`` is the largest deviation of
    the transformed matrices from the nominal block pattern.
    """

    R: tuple
    S: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    Gamma: np.ndarray
    U: np.ndarray
    structure_residual: float = field(default=0.0)

    @property
    def internal_dim(self) -> int:
        return self.Q.shape[0]


def byrnes_isidori(ss: StateSpace, r: int,
                   cond_limit: float = 1e10) -> BIForm:
    """Coordinate change into chain-of-integrators plus internal dynamics.

    The first r*m rows of U are (C; CA; ...; CA^{r-1}); the remaining rows V
    are an orthonormal basis of the left null space of [B, AB, ..., A^{r-1}B].
    That choice makes V A expressible through C and V alone, which is what
    produces the internal-dynamics rows [P, 0, ..., 0, Q]; annihilating B
    only is not enough (the eta rows would couple to the higher chain
    blocks). Orthonormality of V conditions the inverse.
    """
    n, m = ss.n, ss.m
    if r * m > n:
        raise ParameterError("r*m must not exceed the state dimension")
    rows = [ss.C]
    for _ in range(r - 1):
        rows.append(rows[-1] @ ss.A)
    O = np.vstack(rows)

    k_int = n - r * m
    if k_int > 0:
        blocks = [ss.B]
        for _ in range(r - 1):
            blocks.append(ss.A @ blocks[-1])
        Bk = np.hstack(blocks)
        Ub, sb, _ = np.linalg.svd(Bk, full_matrices=True)
        rank_b = int(np.sum(sb > 1e-12 * max(1.0, sb[0])))
        if rank_b != r * m:
            raise NumericalRankError(
                "[B, AB, ..., A^{r-1}B] is rank deficient; the stated "
                "relative degree is inconsistent"
            )
        V = Ub[:, rank_b:].T
        U = np.vstack([O, V])
    else:
        U = O

    cond = np.linalg.cond(U)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NumericalRankError(
            f"coordinate change condition number {cond:.3g} exceeds {cond_limit:.3g}"
        )
    Uinv = np.linalg.inv(U)
    At = U @ ss.A @ Uinv
    Bt = U @ ss.B
    Ct = ss.C @ Uinv

    R = tuple(At[(r - 1) * m:r * m, (k - 1) * m:k * m] for k in range(1, r + 1))
    S = At[(r - 1) * m:r * m, r * m:]
    P = At[r * m:, :m]
    Q = At[r * m:, r * m:]
    Gamma = Bt[(r - 1) * m:r * m, :]

    # residual of the nominal block pattern (chain identities and zero blocks)
    deviations = []
    if r > 1:
        chain = np.zeros(((r - 1) * m, n))
        chain[:, m:r * m] = np.eye((r - 1) * m)
        deviations.append(At[: (r - 1) * m, :] - chain)
        deviations.append(Bt[: (r - 1) * m, :])
    if k_int > 0:
        if r > 1:
            deviations.append(At[r * m:, m:r * m])
        deviations.append(Bt[r * m:, :])
    ct_expected = np.zeros_like(Ct)
    ct_expected[:, :m] = np.eye(m)
    deviations.append(Ct - ct_expected)
    res = max(float(np.max(np.abs(d))) if d.size else 0.0 for d in deviations)

    return BIForm(R=R, S=S, P=P, Q=Q, Gamma=Gamma, U=U, structure_residual=res)


@dataclass(frozen=True)
class ZeroDynamicsResult:
    stable: bool
    q_eigenvalues: np.ndarray
    pencil_agrees: bool


def _pencil_min_sv(ss: StateSpace, lam: complex) -> float:
    n, m = ss.n, ss.m
    M = np.zeros((n + m, n + m), dtype=complex)
    M[:n, :n] = lam * np.eye(n) - ss.A
    M[:n, n:] = ss.B
    M[n:, :n] = ss.C
    sv = np.linalg.svd(M, compute_uv=False)
    return float(sv[-1] / max(sv[0], 1e-300))


def zero_dynamics_stable(ss: StateSpace, re_tol: float = 1e-10) -> ZeroDynamicsResult:
    """Asymptotic stability of the internal dynamics.

    The verdict is the spectrum test Re(eig Q) < -re_tol; it is cross-checked
    by sampling the system pencil [[lambda I - A, B], [C, 0]] at points of
    the closed right half-plane (including the Q eigenvalues mirrored into
    it): the pencil must be nonsingular there exactly when the verdict is
    stable.
    """
    rd = relative_degree(ss)
    if rd is None:
        raise NoRelativeDegree("system has no strict relative degree")
    r, _ = rd
    bi = byrnes_isidori(ss, r)
    if bi.internal_dim == 0:
        return ZeroDynamicsResult(True, np.array([], dtype=complex), True)
    q_eigs = eigenvalues(bi.Q)
    stable = bool(np.all(q_eigs.real < -re_tol))

    samples = [0.0 + 0.0j, 1.0 + 0.0j, 0.0 + 1.0j, 10.0 + 0.0j]
    for lam in q_eigs:
        samples.append(complex(abs(lam.real), lam.imag))
    singular_found = any(_pencil_min_sv(ss, lam) < 1e-7 for lam in samples)
    return ZeroDynamicsResult(stable, q_eigs, pencil_agrees=(stable == (not singular_found)))


def sign_definiteness(G, tol: float = 1e-10) -> str:
    """Sign of the quadratic form v -> v^T G v: 'positive', 'negative' or
    'indefinite', decided by the spectrum of the symmetric part."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape[0] != G.shape[1]:
        raise ParameterError("sign definiteness is defined for square matrices")
    sym = 0.5 * (G + G.T)
    eigs = eigenvalues(sym).real
    if np.all(eigs > tol):
        return "positive"
    if np.all(eigs < -tol):
        return "negative"
    return "indefinite"
