"""Directional (Frechet) derivatives of standard matrix functions.

Orders one and two are exact divided-difference evaluations in the
eigenbasis of the base point.  Order three defaults to one central
difference of the exact order-two value; the pure third-divided-difference
path is kept behind a flag for cross-checks at small dimension.  The
module also provides the d^2 x d^2 matricisation of X -> Df[A](X) under
column stacking, its inverse, finite-difference oracles, and checks for
the chain rule and the derivatives of matrix inversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .catalog import (
    ScalarFunction,
    coincidence_threshold,
    dd1_grid,
    dd2_grid,
    dd3_grid,
    require_nodes_in_derivative_domain,
)
from .errors import DimensionMismatchError, DomainError, SingularOperatorError
from .reports import VerificationReport
from .spectral import (
    apply_scalar_function,
    frobenius,
    hermitian_part,
    relative_error,
    spectral_decompose,
    validate_hermitian,
)

# Step factor for the hybrid order-three derivative.
D3_STEP_RTOL = 1e-5

# Condition-number guard for dense superoperator inversion.
SUPEROP_COND_LIMIT = 1e12


def _prepared(f: ScalarFunction, A, directions, order: int):
    A = validate_hermitian(A, "base point")
    mats = []
    for X in directions:
        X = validate_hermitian(X, "direction")
        if X.shape != A.shape:
            raise DimensionMismatchError(
                f"direction shape {X.shape} does not match base point {A.shape}"
            )
        mats.append(X)
    dec = spectral_decompose(A)
    require_nodes_in_derivative_domain(f, dec.eigenvalues, order)
    return dec, mats


def frechet_d1(f: ScalarFunction, A, X) -> np.ndarray:
    """First derivative of the matrix function of f at A in direction X."""
    dec, (X,) = _prepared(f, A, [X], 1)
    U, lam = dec.eigenvectors, dec.eigenvalues
    K = dd1_grid(f, lam)
    Xt = U.conj().T @ X @ U
    return hermitian_part(U @ (K * Xt) @ U.conj().T)


def frechet_d2(f: ScalarFunction, A, X, Y) -> np.ndarray:
    """Second derivative; symmetric bilinear in (X, Y)."""
    dec, (X, Y) = _prepared(f, A, [X, Y], 2)
    U, lam = dec.eigenvectors, dec.eigenvalues
    T2 = dd2_grid(f, lam)
    Xt = U.conj().T @ X @ U
    Yt = U.conj().T @ Y @ U
    core = np.einsum("ikj,ik,kj->ij", T2, Xt, Yt) + np.einsum(
        "ikj,ik,kj->ij", T2, Yt, Xt
    )
    return hermitian_part(U @ core @ U.conj().T)


def frechet_d3(f: ScalarFunction, A, X, Y, W, method: str = "hybrid") -> np.ndarray:
    """Third derivative; symmetric trilinear in (X, Y, W).

    method="hybrid" (default) takes central differences of the exact
    order-two value along each direction and averages, which keeps full
    permutation symmetry.  method="divided_difference" evaluates the exact
    third divided-difference tensor; O(d^4) memory, intended for d <= 4
    cross-checks.
    """
    if method == "hybrid":
        A = validate_hermitian(A, "base point")
        terms = [
            _d3_fd_along(f, A, X, Y, W),
            _d3_fd_along(f, A, X, W, Y),
            _d3_fd_along(f, A, Y, W, X),
        ]
        return (terms[0] + terms[1] + terms[2]) / 3.0
    if method == "divided_difference":
        return _d3_exact(f, A, X, Y, W)
    raise DomainError(f"unknown order-3 method '{method}'")


def _d3_fd_along(f, A, X, Y, W) -> np.ndarray:
    """Central difference of the exact order-two derivative along W."""
    W = validate_hermitian(W, "direction")
    scale = frobenius(W)
    if scale == 0.0:
        return np.zeros_like(np.asarray(A, dtype=complex))
    Wu = W / scale
    h = D3_STEP_RTOL * (1.0 + frobenius(A))
    plus = frechet_d2(f, A + h * Wu, X, Y)
    minus = frechet_d2(f, A - h * Wu, X, Y)
    return scale * (plus - minus) / (2.0 * h)


def _d3_exact(f, A, X, Y, W) -> np.ndarray:
    dec, (X, Y, W) = _prepared(f, A, [X, Y, W], 3)
    U, lam = dec.eigenvectors, dec.eigenvalues
    T3 = dd3_grid(f, lam)
    mats = [U.conj().T @ M @ U for M in (X, Y, W)]
    core = np.zeros((len(lam), len(lam)), dtype=complex)
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    for p in perms:
        core += np.einsum("iklj,ik,kl,lj->ij", T3, mats[p[0]], mats[p[1]], mats[p[2]])
    return hermitian_part(U @ core @ U.conj().T)


# --- superoperator matricisation ---------------------------------------------


def stack(X) -> np.ndarray:
    """Column-stack a matrix: vec(X) concatenates the columns of X."""
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unstack(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatchError(f"cannot unstack a vector of length {v.size}")
    return v.reshape(d, d, order="F")


@dataclass(frozen=True)
class SuperOperatorMatrix:
    """d^2 x d^2 matrix acting on column-stacked d x d matrices."""

    dim: int
    entries: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"superoperator of dim {self.dim} applied to shape {X.shape}"
            )
        return unstack(self.entries @ stack(X))


def superop_matrix(psi: ScalarFunction, A) -> SuperOperatorMatrix:
    """Matricise X -> Dpsi[A](X) under column stacking.

    The caller passes the scalar function psi whose matrix-function
    derivative is wanted (typically the derivative view of a catalog entry).
    Under column stacking, X -> B X C matricises to C^T (x) B, so the map
    is (conj(U) (x) U) diag(vec(psi^[1])) (conj(U) (x) U)* in A's eigenbasis.
    """
    A = validate_hermitian(A, "base point")
    dec = spectral_decompose(A)
    require_nodes_in_derivative_domain(psi, dec.eigenvalues, 1)
    U, lam = dec.eigenvectors, dec.eigenvalues
    K = dd1_grid(psi, lam)
    B = np.kron(U.conj(), U)
    T = (B * stack(K)) @ B.conj().T
    return SuperOperatorMatrix(len(lam), hermitian_part(T))


def superop_inverse(T: SuperOperatorMatrix) -> SuperOperatorMatrix:
    """Dense inverse with a condition-number guard of 1e12."""
    s = np.linalg.svd(T.entries, compute_uv=False)
    smallest = float(s[-1])
    if smallest <= 0.0 or s[0] / smallest > SUPEROP_COND_LIMIT:
        raise SingularOperatorError(
            f"superoperator numerically singular: smallest singular value "
            f"{smallest:.3e}, largest {float(s[0]):.3e}",
            smallest,
        )
    return SuperOperatorMatrix(T.dim, np.linalg.inv(T.entries))


# --- finite-difference oracles ------------------------------------------------

_STENCILS = {
    1: ((1, 1.0), (-1, -1.0)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 1.0), (1, -2.0), (-1, 2.0), (-2, -1.0)),
}
_STENCIL_SCALE = {1: 2.0, 2: 1.0, 3: 2.0}


def default_fd_step(order: int, A, X) -> float:
    """Step balancing truncation against roundoff for the given order."""
    base = {1: 5e-6, 2: 2e-4, 3: 1e-3}[order]
    return base * (1.0 + frobenius(A)) / max(1.0, frobenius(X))


def finite_diff_oracle(f: ScalarFunction, A, X, order: int, step: float | None = None,
                       richardson: bool = False) -> np.ndarray:
    """Central-difference approximation of the order-k derivative along X.

    Independent of the divided-difference engine: only evaluates the matrix
    function itself on a stencil.  With richardson=True the result combines
    steps h and h/2 for fourth-order accuracy.
    """
    if order not in _STENCILS:
        raise DomainError(f"finite-difference oracle supports orders 1..3, got {order}")
    A = validate_hermitian(A, "base point")
    X = validate_hermitian(X, "direction")
    if step is None:
        step = default_fd_step(order, A, X)
    if step <= 0.0:
        raise DomainError(f"step must be positive, got {step}")
    if richardson:
        coarse = finite_diff_oracle(f, A, X, order, step)
        fine = finite_diff_oracle(f, A, X, order, step / 2.0)
        return (4.0 * fine - coarse) / 3.0
    acc = np.zeros_like(A)
    for offset, coeff in _STENCILS[order]:
        try:
            acc = acc + coeff * apply_scalar_function(f, A + offset * step * X)
        except DomainError as exc:
            raise DomainError(
                f"domain exit during stencil evaluation at offset {offset}: {exc}"
            ) from exc
    return hermitian_part(acc / (_STENCIL_SCALE[order] * step**order))


# --- map families and derivative identity checks ------------------------------


@dataclass(frozen=True)
class MapFamily:
    """A matrix map together with its first two directional derivatives."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def identity_map_family() -> MapFamily:
    return MapFamily(
        "identity",
        lambda A: np.asarray(A, dtype=complex),
        lambda A, h: np.asarray(h, dtype=complex),
        lambda A, h, k: np.zeros_like(np.asarray(A, dtype=complex)),
    )


def constant_map_family(C) -> MapFamily:
    C = np.asarray(C, dtype=complex)
    return MapFamily(
        "constant",
        lambda A: C,
        lambda A, h: np.zeros_like(C),
        lambda A, h, k: np.zeros_like(C),
    )


def matrix_function_family(f: ScalarFunction) -> MapFamily:
    return MapFamily(
        f.name,
        lambda A: apply_scalar_function(f, A),
        lambda A, h: frechet_d1(f, A, h),
        lambda A, h, k: frechet_d2(f, A, h, k),
    )


def _inverse_of(M: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 0.0 or s[0] / s[-1] > SUPEROP_COND_LIMIT:
        raise SingularOperatorError(
            f"map value numerically singular: smallest singular value {s[-1]:.3e}",
            float(s[-1]),
        )
    return np.linalg.inv(M)


def inversion_derivative_check(G: MapFamily, A, h, k, tol: float = 1e-5) -> VerificationReport:
    """Check the two derivative identities of A -> G(A)^{-1}.

    First order:  -G^{-1} DG(h) G^{-1}.
    Second order: G^{-1} DG(h) G^{-1} DG(k) G^{-1} + (h <-> k)
                  - G^{-1} D2G(h,k) G^{-1}.
    Both are compared against finite differences of the inverted map.
    """
    A = validate_hermitian(A, "base point")
    h = np.asarray(h, dtype=complex)
    k = np.asarray(k, dtype=complex)
    GA_inv = _inverse_of(G.value(A))

    dG_h = G.d1(A, h)
    dG_k = G.d1(A, k)
    rhs1 = -GA_inv @ dG_h @ GA_inv
    rhs2 = (
        GA_inv @ dG_h @ GA_inv @ dG_k @ GA_inv
        + GA_inv @ dG_k @ GA_inv @ dG_h @ GA_inv
        - GA_inv @ G.d2(A, h, k) @ GA_inv
    )

    s = 1e-5 * (1.0 + frobenius(A)) / max(1.0, frobenius(h), frobenius(k))
    inv = lambda u, v: _inverse_of(G.value(A + u * s * h + v * s * k))  # noqa: E731
    lhs1 = (inv(1, 0) - inv(-1, 0)) / (2.0 * s)
    lhs2 = (inv(1, 1) - inv(1, -1) - inv(-1, 1) + inv(-1, -1)) / (4.0 * s**2)

    err = max(relative_error(lhs1, rhs1), relative_error(lhs2, rhs2))
    return VerificationReport.from_margin(
        f"inversion_derivative[{G.name}]", -err, tol,
        witness={"first_order_error": relative_error(lhs1, rhs1),
                 "second_order_error": relative_error(lhs2, rhs2)},
    )


def compose(f: ScalarFunction, g: ScalarFunction) -> ScalarFunction:
    """Scalar composition f(g(u)) with derivatives to order two."""
    c0 = lambda u: f.deriv(g.deriv(u, 0), 0)  # noqa: E731
    c1 = lambda u: f.deriv(g.deriv(u, 0), 1) * g.deriv(u, 1)  # noqa: E731
    c2 = lambda u: (  # noqa: E731
        f.deriv(g.deriv(u, 0), 2) * g.deriv(u, 1) ** 2
        + f.deriv(g.deriv(u, 0), 1) * g.deriv(u, 2)
    )
    return ScalarFunction(
        name=f"{f.name}({g.name})",
        domain=g.domain,
        evals=(c0, c1, c2),
        deriv_floor=max(f.deriv_floor, g.deriv_floor),
    )


def chain_rule_check(f: ScalarFunction, g: ScalarFunction, A, h,
                     tol: float = 1e-6) -> VerificationReport:
    """Verify D(f o g)[A](h) = Df[g(A)](Dg[A](h)), both sides independent."""
    lhs = frechet_d1(compose(f, g), A, h)
    rhs = frechet_d1(f, apply_scalar_function(g, A), frechet_d1(g, A, h))
    err = relative_error(lhs, rhs)
    return VerificationReport.from_margin(
        f"chain_rule[{f.name} o {g.name}]", -err, tol
    )


def partial_derivative_check(F: Callable[[np.ndarray, np.ndarray], np.ndarray],
                             X, Y, h, k, tol: float = 1e-6) -> VerificationReport:
    """Verify DF[X,Y](h,k) = D_X F(h) + D_Y F(k) by finite differences."""
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    k = np.asarray(k, dtype=complex)
    s = 1e-5 * (1.0 + frobenius(X) + frobenius(Y)) / max(1.0, frobenius(h), frobenius(k))
    total = (F(X + s * h, Y + s * k) - F(X - s * h, Y - s * k)) / (2.0 * s)
    part_x = (F(X + s * h, Y) - F(X - s * h, Y)) / (2.0 * s)
    part_y = (F(X, Y + s * k) - F(X, Y - s * k)) / (2.0 * s)
    err = relative_error(total, part_x + part_y)
    return VerificationReport.from_margin("partial_derivative_additivity", -err, tol)
