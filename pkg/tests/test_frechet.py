"""Directional derivatives, superoperators, oracles, derivative identities."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from phi_entropy_lab import (
    DomainError,
    SingularOperatorError,
    builtin,
    chain_rule_check,
    finite_diff_oracle,
    frechet_d1,
    frechet_d2,
    frechet_d3,
    hs_inner,
    inversion_derivative_check,
    partial_derivative_check,
    superop_inverse,
    superop_matrix,
)
from phi_entropy_lab.catalog import REAL_LINE, ScalarFunction
from phi_entropy_lab.frechet import (
    SuperOperatorMatrix,
    constant_map_family,
    identity_map_family,
    matrix_function_family,
    stack,
    unstack,
)
from phi_entropy_lab.sampling import rng_for, sample_hermitian, sample_hermitian_unit, sample_psd
from phi_entropy_lab.spectral import relative_error

SQ = builtin("square")
XLX = builtin("xlogx")
P15 = builtin("power", 1.5)

CUBIC = ScalarFunction(
    "cubic",
    REAL_LINE,
    (lambda u: np.asarray(u, dtype=float) ** 3,
     lambda u: 3.0 * np.asarray(u, dtype=float) ** 2,
     lambda u: 6.0 * np.asarray(u, dtype=float),
     lambda u: np.full_like(np.asarray(u, dtype=float), 6.0),
     lambda u: np.zeros_like(np.asarray(u, dtype=float))),
)


def test_d1_square_is_anticommutator():
    A = np.diag([1.0, 2.0])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert_allclose(frechet_d1(SQ, A, X), [[0.0, 3.0], [3.0, 0.0]], atol=1e-12)
    for seed in range(5):
        A = sample_psd(4, 0.1, seed)
        X = sample_hermitian(4, seed + 100)
        assert_allclose(frechet_d1(SQ, A, X), A @ X + X @ A, atol=1e-11)


def test_d1_affine_is_constant_slope():
    f = builtin("affine", 1.0, 4.0)
    A = sample_psd(3, 0.1, 0)
    X = sample_hermitian(3, 1)
    assert_allclose(frechet_d1(f, A, X), 4.0 * X, atol=1e-12)


def test_d1_zero_direction():
    assert_allclose(frechet_d1(XLX, np.diag([1.0, 2.0]), np.zeros((2, 2))), np.zeros((2, 2)))


def test_d1_linearity():
    A = sample_psd(3, 0.5, 7)
    X = sample_hermitian(3, 8)
    Y = sample_hermitian(3, 9)
    lhs = frechet_d1(XLX, A, 2.0 * X - 0.7 * Y)
    rhs = 2.0 * frechet_d1(XLX, A, X) - 0.7 * frechet_d1(XLX, A, Y)
    assert_allclose(lhs, rhs, atol=1e-12)


def test_d1_scalar_reduction():
    # at d = 1 the derivative is psi'(a) * h for the function psi itself
    a, h = 1.7, 0.3
    out = frechet_d1(XLX, np.array([[a]]), np.array([[h]]))
    assert out[0, 0].real == pytest.approx(XLX.deriv(a, 1) * h, rel=1e-12)


def test_d2_square_identity():
    for seed in range(5):
        A = sample_psd(3, 0.1, seed)
        X = sample_hermitian(3, seed + 50)
        assert_allclose(frechet_d2(SQ, A, X, X), 2.0 * X @ X, atol=1e-12)


def test_d2_affine_vanishes():
    f = builtin("affine", 0.5, 2.0)
    out = frechet_d2(f, sample_psd(3, 0.1, 1), sample_hermitian(3, 2), sample_hermitian(3, 3))
    assert np.abs(out).max() < 1e-12


def test_d2_commuting_case_reduces_to_second_derivative():
    out = frechet_d2(XLX, np.diag([1.0, 2.0]), np.eye(2), np.eye(2))
    assert_allclose(out, np.diag([1.0, 0.5]), atol=1e-12)


def test_d2_symmetry():
    A = sample_psd(4, 0.5, 4)
    X = sample_hermitian(4, 5)
    Y = sample_hermitian(4, 6)
    assert_allclose(frechet_d2(XLX, A, X, Y), frechet_d2(XLX, A, Y, X), atol=1e-12)


def test_d3_square_vanishes():
    out = frechet_d3(SQ, sample_psd(3, 0.1, 1), sample_hermitian(3, 2),
                     sample_hermitian(3, 3), sample_hermitian(3, 4))
    assert np.abs(out).max() < 1e-9


def test_d3_cubic_scalar_reduction():
    out = frechet_d3(CUBIC, np.eye(2), np.eye(2), np.eye(2), np.eye(2))
    assert_allclose(out, 6.0 * np.eye(2), atol=1e-8)


def test_d3_zero_direction():
    out = frechet_d3(XLX, sample_psd(2, 0.5, 1), sample_hermitian(2, 2),
                     sample_hermitian(2, 3), np.zeros((2, 2)))
    assert np.abs(out).max() == 0.0


def test_d3_permutation_symmetry():
    A = sample_psd(3, 0.5, 11)
    X, Y, W = (sample_hermitian_unit(3, s) for s in (12, 13, 14))
    base = frechet_d3(XLX, A, X, Y, W)
    for perm in [(Y, X, W), (W, Y, X), (X, W, Y)]:
        assert relative_error(base, frechet_d3(XLX, A, *perm)) < 1e-9


def test_d3_hybrid_matches_exact_tensor_path():
    for d in (2, 3, 4):
        A = sample_psd(d, 0.5, d, spectral_cap=4.0)
        X, Y, W = (sample_hermitian_unit(d, 20 + d * 10 + s) for s in range(3))
        hybrid = frechet_d3(XLX, A, X, Y, W)
        exact = frechet_d3(XLX, A, X, Y, W, method="divided_difference")
        assert relative_error(hybrid, exact) < 1e-7


@pytest.mark.parametrize("f", [SQ, XLX, P15], ids=lambda f: f.spec_string())
def test_oracle_agreement(f):
    # smaller version of the acceptance sweep, all three orders
    tols = {1: 1e-6, 2: 1e-4, 3: 1e-3}
    for trial in range(25):
        rng = rng_for(31, "oracle", f.spec_string(), trial)
        d = 2 + trial % 3
        A = sample_psd(d, 0.5, rng, spectral_cap=4.0)
        X = sample_hermitian_unit(d, rng)
        pairs = {
            1: (frechet_d1(f, A, X), finite_diff_oracle(f, A, X, 1)),
            2: (frechet_d2(f, A, X, X), finite_diff_oracle(f, A, X, 2)),
            3: (frechet_d3(f, A, X, X, X), finite_diff_oracle(f, A, X, 3)),
        }
        for order, (exact, approx) in pairs.items():
            assert relative_error(exact, approx) < tols[order], (f.name, order, trial)


def test_oracle_convergence_rate():
    # halving the step shrinks the order-1 error about fourfold
    A = sample_psd(3, 0.5, 77, spectral_cap=4.0)
    X = sample_hermitian_unit(3, 78)
    exact = frechet_d1(XLX, A, X)
    h = 1e-3
    err_h = relative_error(exact, finite_diff_oracle(XLX, A, X, 1, step=h))
    err_h2 = relative_error(exact, finite_diff_oracle(XLX, A, X, 1, step=h / 2))
    assert 2.5 < err_h / err_h2 < 6.0


def test_oracle_affine_second_order_zero():
    f = builtin("affine", 1.0, 2.0)
    out = finite_diff_oracle(f, sample_psd(3, 0.1, 5), sample_hermitian_unit(3, 6), 2)
    assert np.abs(out).max() < 1e-8


def test_oracle_domain_exit_reported():
    A = np.diag([0.05, 0.1])
    X = np.eye(2)
    with pytest.raises(DomainError, match="stencil"):
        finite_diff_oracle(XLX, A, X, 1, step=0.2)


def test_trace_duality():
    # Tr D2phi[A](X, Y) = <X, Dphi'[A](Y)> = <Y, Dphi'[A](X)>
    for f in (SQ, XLX, P15):
        psi = f.derivative()
        for trial in range(10):
            rng = rng_for(41, "duality", f.spec_string(), trial)
            A = sample_psd(3, 0.5, rng, spectral_cap=4.0)
            X = sample_hermitian(3, rng)
            Y = sample_hermitian(3, rng)
            lhs = np.trace(frechet_d2(f, A, X, Y)).real
            mid = hs_inner(X, frechet_d1(psi, A, Y)).real
            rhs = hs_inner(Y, frechet_d1(psi, A, X)).real
            scale = 1.0 + abs(lhs)
            assert abs(lhs - mid) < 1e-8 * scale
            assert abs(lhs - rhs) < 1e-8 * scale


def test_superop_scalar_case():
    T = superop_matrix(XLX.derivative(), np.array([[2.0]]))
    assert T.entries.shape == (1, 1)
    assert T.entries[0, 0].real == pytest.approx(0.5)  # psi'(a) = 1/a
    Tinv = superop_inverse(T)
    assert Tinv.entries[0, 0].real == pytest.approx(2.0)


def test_superop_square_is_twice_identity():
    T = superop_matrix(SQ.derivative(), sample_psd(3, 0.1, 9))
    assert_allclose(T.entries, 2.0 * np.eye(9), atol=1e-10)


def test_superop_diagonal_entries_from_divided_differences():
    T = superop_matrix(XLX.derivative(), np.diag([1.0, 2.0]))
    expected = sorted([1.0, np.log(2.0), np.log(2.0), 0.5])
    assert_allclose(sorted(np.diag(T.entries).real), expected, atol=1e-12)


def test_superop_action_matches_derivative():
    for f in (XLX, P15):
        psi = f.derivative()
        A = sample_psd(3, 0.5, 10)
        T = superop_matrix(psi, A)
        for seed in range(5):
            X = sample_hermitian(3, seed)
            direct = frechet_d1(psi, A, X)
            assert relative_error(T.apply(X), direct) < 1e-9


def test_superop_quadratic_form_positive_definite():
    # psi' > 0 on the spectrum makes the form positive on Hermitian inputs
    A = sample_psd(4, 0.5, 12)
    T = superop_matrix(XLX.derivative(), A)
    for seed in range(10):
        h = sample_hermitian(4, 200 + seed)
        v = stack(h)
        assert (v.conj() @ T.entries @ v).real > 0.0


def test_superop_preserves_hermiticity():
    A = sample_psd(3, 0.5, 13)
    T = superop_matrix(XLX.derivative(), A)
    out = T.apply(sample_hermitian(3, 14))
    assert np.abs(out - out.conj().T).max() < 1e-10


def test_superop_inverse_roundtrip():
    A = sample_psd(3, 0.5, 15)
    T = superop_matrix(XLX.derivative(), A)
    Tinv = superop_inverse(T)
    assert_allclose(Tinv.entries @ T.entries, np.eye(9), atol=1e-8)
    X = sample_hermitian(3, 16)
    assert_allclose(Tinv.apply(T.apply(X)), X, atol=1e-10)


def test_superop_inverse_singular_guard():
    T = SuperOperatorMatrix(2, np.diag([1.0, 1.0, 1.0, 0.0]).astype(complex))
    with pytest.raises(SingularOperatorError) as err:
        superop_inverse(T)
    assert err.value.smallest_singular_value == pytest.approx(0.0)


def test_stack_convention_column_major():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_allclose(stack(X).real, [1.0, 3.0, 2.0, 4.0])
    assert_allclose(unstack(stack(X)), X)
    # vec(B X C) = (C^T kron B) vec(X)
    B = sample_hermitian(2, 17)
    C = sample_hermitian(2, 18)
    assert_allclose(np.kron(C.T, B) @ stack(X), stack(B @ X @ C), atol=1e-12)


def test_inversion_derivative_identity_map():
    A = np.diag([1.0, 2.0])
    h = np.eye(2)
    G = identity_map_family()
    report = inversion_derivative_check(G, A, h, h)
    assert report.holds
    # closed form: -A^{-1} h A^{-1}
    Ainv = np.linalg.inv(A)
    assert_allclose(-Ainv @ h @ Ainv, -np.diag([1.0, 0.25]), atol=1e-14)


def test_inversion_derivative_matrix_function_families():
    A = sample_psd(3, 0.8, 19)
    h = sample_hermitian_unit(3, 20)
    k = sample_hermitian_unit(3, 21)
    for f in (SQ, XLX):
        report = inversion_derivative_check(matrix_function_family(f), A, h, k)
        assert report.holds, report


def test_inversion_derivative_constant_family():
    G = constant_map_family(np.diag([1.0, 3.0]))
    report = inversion_derivative_check(G, np.eye(2), sample_hermitian(2, 1), sample_hermitian(2, 2))
    assert report.holds


def test_inversion_derivative_zero_direction():
    G = identity_map_family()
    report = inversion_derivative_check(G, np.diag([1.0, 2.0]), np.zeros((2, 2)), np.zeros((2, 2)))
    assert report.holds


def test_chain_rule_square_of_square():
    A = np.diag([1.0, 2.0])
    report = chain_rule_check(SQ, SQ, A, np.eye(2))
    assert report.holds


def test_chain_rule_with_identity_inner():
    ident = builtin("affine", 0.0, 1.0)
    A = sample_psd(3, 0.5, 22)
    h = sample_hermitian(3, 23)
    report = chain_rule_check(XLX, ident, A, h)
    assert report.holds


def test_partial_derivative_linear_map():
    F = lambda X, Y: X + Y  # noqa: E731
    report = partial_derivative_check(F, sample_hermitian(3, 1), sample_hermitian(3, 2),
                                      sample_hermitian(3, 3), sample_hermitian(3, 4))
    assert report.holds


def test_partial_derivative_bilinear_map():
    F = lambda X, Y: X @ Y + Y @ X  # noqa: E731
    report = partial_derivative_check(F, sample_hermitian(3, 5), sample_hermitian(3, 6),
                                      sample_hermitian(3, 7), sample_hermitian(3, 8))
    assert report.holds
