import numpy as np
import numpy.testing as npt
import pytest

from funnelsim.eigen import RESIDUAL_TOL, eigenvalues, hessenberg
from funnelsim.errors import ParameterError


def _match_sets(a, b, tol):
    """Greedy pairing of two complex spectra."""
    b = list(b)
    worst = 0.0
    for lam in a:
        j = int(np.argmin([abs(lam - x) for x in b]))
        worst = max(worst, abs(lam - b.pop(j)))
    return worst


def test_rotation_matrix():
    eigs = eigenvalues([[0.0, -1.0], [1.0, 0.0]])
    assert _match_sets(eigs, [1j, -1j], 0) < 1e-12


def test_scalar():
    npt.assert_array_equal(eigenvalues([[-2.0]]), [-2.0 + 0.0j])


def test_damped_closed_loop():
    # lambda^2 + lambda + 1 = 0
    eigs = eigenvalues([[-1.0, -1.0], [1.0, 0.0]])
    expect = [-0.5 + 1j * np.sqrt(3) / 2, -0.5 - 1j * np.sqrt(3) / 2]
    assert _match_sets(eigs, expect, 0) < 1e-12


def test_hessenberg_is_similarity():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((8, 8))
    H = hessenberg(M)
    assert np.max(np.abs(np.tril(H, -2))) < 1e-14
    a = np.sort_complex(np.linalg.eigvals(M))
    b = np.sort_complex(np.linalg.eigvals(H))
    assert _match_sets(a, b, 0) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 21, 34, 64])
def test_random_matrices_match_lapack(n):
    rng = np.random.default_rng(n)
    for _ in range(4):
        M = rng.standard_normal((n, n))
        ours = eigenvalues(M)
        ref = np.linalg.eigvals(M)
        scale = np.linalg.norm(M) + 1.0
        assert _match_sets(ours, ref, 0) / scale < 1e-9


def test_symmetric_matrix_real_spectrum():
    rng = np.random.default_rng(5)
    S = rng.standard_normal((7, 7))
    S = S + S.T
    eigs = eigenvalues(S)
    assert np.max(np.abs(eigs.imag)) < 1e-8
    npt.assert_allclose(np.sort(eigs.real), np.linalg.eigvalsh(S),
                        rtol=1e-9, atol=1e-9)


def test_defective_matrix():
    eigs = eigenvalues([[0.0, 1.0], [0.0, 0.0]])
    assert _match_sets(eigs, [0.0, 0.0], 0) < 1e-8


@pytest.mark.parametrize("n,base", [(8, 0.0), (16, 0.0), (16, 2.0)])
def test_high_order_jordan_blocks(n, base):
    # the exact eigenvalue with eigenvector e_1 must pass the residual gate
    # (the inverse-iteration shift ladder avoids delta^-n overflow)
    J = np.diag(np.ones(n - 1), 1) + base * np.eye(n)
    eigs = eigenvalues(J)
    assert np.max(np.abs(eigs - base)) < 1e-8


def test_clustered_ill_conditioned_ring():
    # nilpotent plus a tiny corner entry: eigenvalues on a ring of radius
    # eps^(1/n); the returned values must sit on it
    J = np.diag(np.ones(6), 1)
    J[-1, 0] = 1e-10
    eigs = eigenvalues(J)
    radius = 1e-10 ** (1.0 / 7.0)
    npt.assert_allclose(np.abs(eigs), radius, rtol=1e-3)


def test_residual_contract_on_random_samples():
    rng = np.random.default_rng(11)
    for n in (3, 6, 12):
        M = rng.standard_normal((n, n)) * 10.0
        norm_M = np.linalg.norm(M, ord="fro")
        for lam in eigenvalues(M):
            # reconstruct an eigenvector and check the advertised residual
            B = M.astype(complex) - (lam + 1e-13 * (1 + 1j)) * np.eye(n)
            v = np.linalg.solve(B, np.ones(n, dtype=complex))
            v /= np.linalg.norm(v)
            v = np.linalg.solve(B, v)
            v /= np.linalg.norm(v)
            assert np.linalg.norm(M @ v - lam * v) <= RESIDUAL_TOL * norm_M


def test_dimension_cap_and_validation():
    with pytest.raises(ParameterError):
        eigenvalues(np.zeros((65, 65)))
    with pytest.raises(ParameterError):
        eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ParameterError):
        eigenvalues([[np.nan, 0.0], [0.0, 1.0]])
    assert eigenvalues(np.zeros((0, 0))).size == 0
