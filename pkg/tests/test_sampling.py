"""Samplers: determinism, floors, invariant audits."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from phi_entropy_lab import (
    DomainError,
    haar_unitary,
    rng_for,
    sample_coupled_ensembles,
    sample_ensemble,
    sample_hermitian,
    sample_product,
    sample_psd,
)


def test_same_seed_identical_bytes():
    a = sample_psd(4, 0.5, seed=42)
    b = sample_psd(4, 0.5, seed=42)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_psd(4, 0.5, seed=43))


def test_rng_streams_independent_by_label():
    x = rng_for(1, "alpha").standard_normal(4)
    y = rng_for(1, "beta").standard_normal(4)
    assert not np.allclose(x, y)
    assert_allclose(x, rng_for(1, "alpha").standard_normal(4))


def test_spectral_floor_respected():
    for seed in range(10):
        A = sample_psd(3, 1.0, seed=seed)
        assert np.linalg.eigvalsh(A)[0] >= 1.0 - 1e-12


def test_spectral_cap_construction():
    A = sample_psd(5, 0.5, seed=3, spectral_cap=4.0)
    lam = np.linalg.eigvalsh(A)
    assert lam[0] >= 0.5 - 1e-12 and lam[-1] <= 4.0 + 1e-12
    with pytest.raises(DomainError):
        sample_psd(3, 2.0, seed=1, spectral_cap=1.0)


def test_haar_unitary_is_unitary_and_seeded():
    U = haar_unitary(4, 9)
    assert_allclose(U @ U.conj().T, np.eye(4), atol=1e-12)
    assert np.array_equal(U, haar_unitary(4, 9))


def test_hermitian_sampler():
    H = sample_hermitian(4, 5)
    assert np.abs(H - H.conj().T).max() < 1e-14


def test_ensemble_sampler_invariants():
    E = sample_ensemble(3, 4, seed=6, spectral_floor=0.2)
    assert E.support == 4
    assert abs(E.weights.sum() - 1.0) < 1e-12
    assert E.spectral_floor() >= 0.2 - 1e-12


def test_product_sampler_audit():
    P = sample_product(2, 2, (2, 2), seed=7)
    assert P.support_sizes == (2, 2)
    assert len(list(P.outcomes())) == 4
    for w in P.factor_weights:
        assert abs(float(np.sum(w)) - 1.0) < 1e-12
    P = sample_product(2, 3, 2, seed=8, spectral_floor=0.5)
    for key in P.outcomes():
        assert np.linalg.eigvalsh(P.z_map[key])[0] >= 0.5 - 1e-12


def test_coupled_sampler_shares_weights():
    Z, T = sample_coupled_ensembles(3, 4, seed=9, spectral_floor=1e-3)
    assert np.array_equal(Z.weights, T.weights)
    assert not np.array_equal(Z.atoms, T.atoms)
