"""Deterministic samplers for matrices, ensembles and product ensembles.

Streams are counter-based: a generator is keyed by (seed, labels...) through
a hash, so parallel and serial sweeps draw identical values regardless of
execution order.
"""

from __future__ import annotations

import hashlib
import itertools

import numpy as np

from .entropy import MatrixEnsemble, ProductEnsemble
from .errors import DomainError
from .spectral import hermitian_part


def rng_for(seed: int, *labels) -> np.random.Generator:
    """Independent generator keyed by (seed, labels...); Philox counter-based."""
    material = ":".join([str(int(seed)), *map(str, labels)]).encode()
    key = int.from_bytes(hashlib.blake2b(material, digest_size=16).digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(seed, *labels) -> np.random.Generator:
    """Accept either an integer seed (keyed with labels) or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_for(int(seed), *labels)


def _complex_gaussian(rng: np.random.Generator, d: int) -> np.ndarray:
    return (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)


def haar_unitary(d: int, seed) -> np.ndarray:
    """Haar-distributed unitary via QR with phase fixing for determinism."""
    rng = as_generator(seed, "haar", d)
    Q, R = np.linalg.qr(_complex_gaussian(rng, d))
    phases = np.diagonal(R).copy()
    phases = phases / np.abs(phases)
    return Q * phases


def sample_hermitian(d: int, seed, scale: float = 1.0) -> np.ndarray:
    """GUE-style Hermitian sample, entries O(scale)."""
    rng = as_generator(seed, "hermitian", d)
    G = _complex_gaussian(rng, d)
    return hermitian_part(G) * scale


def sample_hermitian_unit(d: int, seed) -> np.ndarray:
    """Hermitian direction normalized to unit Frobenius norm."""
    H = sample_hermitian(d, seed)
    return H / np.linalg.norm(H)


def sample_psd(d: int, spectral_floor: float = 0.0, seed=0,
               spectral_cap: float | None = None) -> np.ndarray:
    """PSD sample with min eigenvalue >= spectral_floor.

    Default construction is Wishart-type G*G/d + floor*I, whose spread
    exercises divided differences.  With spectral_cap set, eigenvalues are
    drawn uniformly in [spectral_floor, spectral_cap] under a Haar basis.
    """
    if spectral_floor < 0.0:
        raise DomainError(f"spectral floor must be nonnegative, got {spectral_floor}")
    rng = as_generator(seed, "psd", d, spectral_floor)
    if spectral_cap is not None:
        if spectral_cap <= spectral_floor:
            raise DomainError("spectral cap must exceed the floor")
        lam = rng.uniform(spectral_floor, spectral_cap, size=d)
        U = haar_unitary(d, rng)
        return hermitian_part((U * lam) @ U.conj().T)
    G = _complex_gaussian(rng, d)
    return hermitian_part(G.conj().T @ G / d + spectral_floor * np.eye(d))


def sample_ensemble(d: int, atoms: int, seed=0, spectral_floor: float = 0.0,
                    spectral_cap: float | None = None) -> MatrixEnsemble:
    """Random ensemble: uniform-simplex weights over PSD samples."""
    if atoms < 1:
        raise DomainError(f"ensemble needs at least one atom, got {atoms}")
    rng = as_generator(seed, "ensemble", d, atoms)
    weights = rng.dirichlet(np.ones(atoms))
    mats = np.stack([
        sample_psd(d, spectral_floor, rng, spectral_cap) for _ in range(atoms)
    ])
    return MatrixEnsemble(weights, mats)


def sample_product(d: int, n: int, support_sizes, seed=0,
                   spectral_floor: float = 0.0,
                   spectral_cap: float | None = None) -> ProductEnsemble:
    """Random product ensemble with the given per-factor support sizes."""
    if isinstance(support_sizes, int):
        support_sizes = (support_sizes,) * n
    support_sizes = tuple(int(s) for s in support_sizes)
    if len(support_sizes) != n or any(s < 1 for s in support_sizes):
        raise DomainError(f"need {n} positive support sizes, got {support_sizes}")
    rng = as_generator(seed, "product", d, n, support_sizes)
    factors = tuple(rng.dirichlet(np.ones(s)) for s in support_sizes)
    z_map = {
        key: sample_psd(d, spectral_floor, rng, spectral_cap)
        for key in itertools.product(*(range(s) for s in support_sizes))
    }
    return ProductEnsemble(factors, z_map)


def sample_coupled_ensembles(d: int, atoms: int, seed=0,
                             spectral_floor: float = 0.0,
                             spectral_cap: float | None = None):
    """Pair (Z, T) on one sample space: shared weights, independent atoms."""
    rng = as_generator(seed, "coupled", d, atoms)
    weights = rng.dirichlet(np.ones(atoms))
    z_atoms = np.stack([sample_psd(d, spectral_floor, rng, spectral_cap)
                        for _ in range(atoms)])
    t_atoms = np.stack([sample_psd(d, spectral_floor, rng, spectral_cap)
                        for _ in range(atoms)])
    return MatrixEnsemble(weights, z_atoms), MatrixEnsemble(weights, t_atoms)
