import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stadia.errors import ConvergenceError, DegeneracyError, TrackingError, ValidationError
from stadia.models import SshParams, TwoLevelParams, effective_two_level, nh_ssh, zero_mode_index
from stadia.qr import eig_qr, hessenberg, schur
from stadia.spectral import (biorthogonalize, eig_biorthogonal, eig_dense, sort_order,
                             track_levels)


def residual(H, es):
    return np.linalg.norm(H @ es.right_vectors - es.right_vectors * es.values, axis=0).max()


def random_complex(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_diagonal():
    es = eig_biorthogonal(np.diag([1.0, 2.0]))
    assert np.allclose(es.values, [1, 2])
    assert np.allclose(np.abs(es.right_vectors), np.eye(2))


def test_two_level_real_gap():
    es = eig_dense(effective_two_level(TwoLevelParams(0.6, 0.8, 0.8), 0.0))
    assert np.allclose(es.values, [-0.5, 0.5], atol=1e-12)


def test_two_level_imaginary_gap():
    es = eig_dense(effective_two_level(TwoLevelParams(0.0, 1.0, -1.0), 0.0))
    assert np.allclose(es.values, [-0.5j, 0.5j], atol=1e-12)


def test_sorting_real_then_imag():
    H = np.diag([1 + 1j, 1 - 1j, -2 + 0j, 1 + 0j])
    es = eig_dense(H)
    assert np.allclose(es.values, [-2, 1 - 1j, 1, 1 + 1j])
    assert list(sort_order([3, 1 + 2j, 1 - 2j])) == [2, 1, 0]


def test_sorting_bitwise_deterministic():
    rng = np.random.default_rng(3)
    H = random_complex(rng, 30)
    a, b = eig_dense(H), eig_dense(H)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.right_vectors.tobytes() == b.right_vectors.tobytes()


@pytest.mark.parametrize("method", ["lapack", "qr"])
def test_random_residuals(method):
    rng = np.random.default_rng(11)
    worst = 0.0
    count = 120 if method == "lapack" else 40
    for _ in range(count):
        n = int(rng.integers(2, 65 if method == "lapack" else 33))
        H = random_complex(rng, n)
        es = eig_dense(H, method=method)
        worst = max(worst, residual(H, es) / np.linalg.norm(H, 2))
        assert es.residual_norm <= 1e-10 * es.matrix_norm
    assert worst < 1e-12


def test_qr_backend_matches_lapack():
    rng = np.random.default_rng(5)
    H = random_complex(rng, 24)
    a = eig_dense(H)
    b = eig_dense(H, method="qr")
    assert np.allclose(a.values, b.values, atol=1e-10)
    # unit-norm vectors agree up to the shared phase convention
    assert np.allclose(np.abs(a.right_vectors.conj().T @ b.right_vectors).diagonal(), 1, atol=1e-8)


def test_hessenberg_form():
    rng = np.random.default_rng(2)
    A = random_complex(rng, 10)
    Hh, Q = hessenberg(A)
    assert np.allclose(np.tril(Hh, -2), 0)
    assert np.allclose(Q @ Hh @ Q.conj().T, A)
    T, Z = schur(A)
    assert np.allclose(np.tril(T, -1), 0)
    assert np.allclose(Z @ T @ Z.conj().T, A, atol=1e-11)


def test_qr_budget_exhaustion_reports_dimension():
    rng = np.random.default_rng(0)
    with pytest.raises(ConvergenceError, match="8x8"):
        schur(random_complex(rng, 8), max_sweeps_per_eig=0)


def test_eig_qr_values():
    vals, vecs = eig_qr(np.array([[2.0, 1.0], [0.0, -1.0]]))
    assert np.allclose(sorted(vals.real), [-1, 2])
    assert np.allclose(np.linalg.norm(vecs, axis=0), 1)


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan, 0], [0, 1]]), np.zeros((0, 0)),
                                 np.ones(3)])
def test_rejects_bad_input(bad):
    with pytest.raises(ValidationError):
        eig_dense(bad)


def test_rejects_oversized():
    with pytest.raises(ValidationError, match="256"):
        eig_dense(np.eye(257))


def test_hermitian_left_equals_right():
    rng = np.random.default_rng(9)
    A = random_complex(rng, 12)
    H = A + A.conj().T
    es = eig_biorthogonal(H)
    assert np.abs(es.values.imag).max() <= 1e-10 * es.matrix_norm
    assert np.allclose(es.left_vectors, es.right_vectors, atol=1e-8)
    assert np.allclose(es.pairing(), np.eye(12), atol=1e-10)


def test_biorthogonal_two_level_nonhermitian():
    es = eig_biorthogonal(effective_two_level(TwoLevelParams(0.0, 2.0, 0.5), 0.0))
    minus_plus = es.left_vectors[:, 1].conj() @ es.right_vectors[:, 0]
    assert abs(minus_plus) < 1e-10
    assert np.allclose(es.pairing(), np.eye(2), atol=1e-10)
    assert np.allclose(np.linalg.norm(es.right_vectors, axis=0), 1)


def test_degenerate_rejected():
    with pytest.raises(DegeneracyError) as info:
        eig_biorthogonal(np.diag([1.0, 1.0]))
    assert info.value.pair == (0, 1)


def test_degenerate_allowed_nonstrict():
    es = biorthogonalize(eig_dense(np.diag([1.0, 1.0, 3.0])), strict=False)
    assert np.allclose(es.pairing(), np.eye(3))


def test_random_biorthogonality():
    rng = np.random.default_rng(21)
    for _ in range(100):
        n = int(rng.integers(2, 41))
        es = eig_biorthogonal(random_complex(rng, n))
        assert np.abs(es.pairing() - np.eye(n)).max() <= 1e-10


@settings(max_examples=200, deadline=None)
@given(delta=st.floats(-3, 3), a=st.floats(0.1, 2), b=st.floats(0.1, 2),
       pa=st.floats(-np.pi, np.pi), pb=st.floats(-np.pi, np.pi))
def test_two_level_spectrum_property(delta, a, b, pa, pb):
    w0, w0p = a * np.exp(1j * pa), b * np.exp(1j * pb)
    es = eig_dense(effective_two_level(TwoLevelParams(delta, w0, w0p), 0.0))
    half = 0.5 * np.sqrt(delta**2 + w0 * w0p + 0j)
    expected = np.sort_complex(np.array([-half, half]))
    got = es.values[np.lexsort((es.values.imag, es.values.real))]
    assert np.allclose(np.sort_complex(got), expected, atol=1e-10)


def test_track_uncoupled_crossing():
    sweep = [(R, eig_biorthogonal(np.diag([R, -R]))) for R in (1.0, 0.5, -0.5, -1.0)]
    out = track_levels(sweep)
    # the level starting at +1 keeps its slot even after the sorted order flips
    up = [es.values[1].real for _, es in out]
    assert np.allclose(up, [1.0, 0.5, -0.5, -1.0])


def test_track_single_point():
    es = eig_biorthogonal(np.diag([0.0, 1.0]))
    out = track_levels([(0.0, es)])
    assert out[0][1] is es


def test_track_ambiguous_raises():
    c = np.cos(np.pi / 4)
    U = np.array([[c, -c], [c, c]])
    a = eig_biorthogonal(np.diag([0.0, 1.0]))
    b = eig_biorthogonal(U @ np.diag([0.0, 1.0]) @ U.T)
    with pytest.raises(TrackingError, match="finer"):
        track_levels([(0.0, a), (1.0, b)])


def test_track_ssh_zero_mode_through_minimum():
    model = nh_ssh(SshParams(20, gamma=1 / 3))
    grid = np.linspace(0.0, 3.0, 601)
    systems = [biorthogonalize(eig_dense(model(t)), strict=False) for t in grid]
    z0 = zero_mode_index(systems[0].values)
    out = track_levels(list(zip(grid, systems)), labels=[z0])
    E = np.array([es.values[z0] for _, es in out])
    # the tracked label stays the zero mode on both sides of the crossover
    assert abs(E[0]) < 1e-8 and abs(E[-1]) < 1e-8
    assert np.abs(E).max() < 1e-3
