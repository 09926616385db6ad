"""Convexity functionals and their equivalence checks.

The bivariate functionals here (Bregman remainder, derivative increment,
second-derivative quadratic form, interpolation gap) characterise the
subadditive entropy classes through joint convexity.  Checks certify
midpoint convexity on sampled pairs, the integral and Taylor relations
connecting the functionals, the inverse-derivative concavity condition,
the fourth-derivative trace inequality, and the conditional Jensen
inequality.  Reports state "no violation in N trials"; they are evidence,
not proofs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import ScalarFunction
from .errors import DomainError
from .frechet import frechet_d1, frechet_d2, frechet_d3, superop_inverse, superop_matrix
from .entropy import MatrixEnsemble, ProductEnsemble, operator_phi_entropy, matrix_phi_entropy
from .reports import VerificationReport
from .spectral import (
    apply_scalar_function,
    frobenius,
    hermitian_part,
    matrix_from_json,
    matrix_to_json,
    normalized_trace,
    validate_hermitian,
)

FUNCTIONAL_NAMES = ("bregman_A", "map_B", "map_C", "gap_F_t")

# The fourth-derivative inequality carries a finite-difference layer, so it
# gets a looser tolerance than the exact-evaluation checks.
CONDITION_E_TOL = 1e-4

DEFAULT_LAMBDAS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class BivariateFunctional:
    """One of the convexity functionals, in trace or operator form."""

    name: str
    phi: ScalarFunction
    variant: str = "trace"
    t: float | None = None

    def __post_init__(self):
        if self.name not in FUNCTIONAL_NAMES:
            raise DomainError(f"unknown functional '{self.name}'; expected {FUNCTIONAL_NAMES}")
        if (self.t is not None) != (self.name == "gap_F_t"):
            raise DomainError("parameter t is required exactly when name == 'gap_F_t'")
        if self.name == "gap_F_t" and not (0.0 <= self.t <= 1.0):
            raise DomainError(f"t must lie in [0, 1], got {self.t}")
        if self.variant not in ("trace", "operator"):
            raise DomainError(f"variant must be 'trace' or 'operator', got '{self.variant}'")

    def label(self) -> str:
        t_part = f",t={self.t:g}" if self.t is not None else ""
        return f"{self.name}[{self.phi.spec_string()},{self.variant}{t_part}]"


def eval_functional(F: BivariateFunctional, u, v):
    """Evaluate the functional at a matrix pair; scalar for the trace variant."""
    f = F.phi
    u = validate_hermitian(u, "u")
    v = validate_hermitian(v, "v")
    if F.name == "bregman_A":
        out = (apply_scalar_function(f, u + v) - apply_scalar_function(f, u)
               - frechet_d1(f, u, v))
    elif F.name == "map_B":
        out = frechet_d1(f, u + v, v) - frechet_d1(f, u, v)
    elif F.name == "map_C":
        out = frechet_d2(f, u, v, v)
    else:
        t = F.t
        out = (t * apply_scalar_function(f, u) + (1.0 - t) * apply_scalar_function(f, v)
               - apply_scalar_function(f, t * u + (1.0 - t) * v))
    out = hermitian_part(out)
    if F.variant == "trace":
        return float(np.trace(out).real)
    return out


def _slack(F: BivariateFunctional, pair1, pair2, lam: float):
    """Convex-combination slack; nonnegative for a jointly convex functional."""
    u1, v1 = pair1
    u2, v2 = pair2
    mix = (lam * u1 + (1.0 - lam) * u2, lam * v1 + (1.0 - lam) * v2)
    combo = lam * np.asarray(eval_functional(F, u1, v1)) \
        + (1.0 - lam) * np.asarray(eval_functional(F, u2, v2))
    gap = combo - np.asarray(eval_functional(F, *mix))
    if F.variant == "trace":
        return float(gap)
    return float(np.linalg.eigvalsh(hermitian_part(gap))[0])


def joint_convexity_test(F: BivariateFunctional, sampler, trials: int, seed: int = 0,
                         lambdas=DEFAULT_LAMBDAS, extra_random_lambdas: int = 2,
                         tol: float | None = None) -> VerificationReport:
    """Midpoint-convexity sweep over sampled pairs.

    sampler(rng) must yield one in-domain (u, v) pair.  Each trial draws two
    pairs and tests the fixed lambda grid plus a few random lambdas; the
    report's margin is the worst slack over all trials.
    """
    from .sampling import rng_for

    worst = np.inf
    worst_witness = None
    scale = 1.0
    for trial in range(trials):
        rng = rng_for(seed, "joint_convexity", F.label(), trial)
        pair1 = sampler(rng)
        pair2 = sampler(rng)
        lams = list(lambdas) + [float(rng.uniform(0.0, 1.0))
                                for _ in range(extra_random_lambdas)]
        for lam in lams:
            slack = _slack(F, pair1, pair2, lam)
            scale = max(scale, abs(slack))
            if slack < worst:
                worst = slack
                worst_witness = _convexity_witness(F, pair1, pair2, lam)
    if tol is None:
        tol = 1e-9 * scale
    return VerificationReport.from_margin(
        f"joint_convexity[{F.label()}]", worst, tol, trials=trials, witness=worst_witness
    )


def _convexity_witness(F: BivariateFunctional, pair1, pair2, lam: float) -> dict:
    return {
        "kind": "joint_convexity",
        "functional": F.name,
        "phi": F.phi.spec_string(),
        "variant": F.variant,
        "t": F.t,
        "lambda": lam,
        "u1": matrix_to_json(pair1[0]), "v1": matrix_to_json(pair1[1]),
        "u2": matrix_to_json(pair2[0]), "v2": matrix_to_json(pair2[1]),
    }


def convexity_slack_at(F: BivariateFunctional, u1, v1, u2, v2, lam: float) -> float:
    """Single-point slack; used for witness replay and counterexample search."""
    return _slack(F, (u1, v1), (u2, v2), lam)


# --- inverse-derivative concavity (condition on the derivative map) -------------


def inverse_derivative_quadratic_form(f: ScalarFunction, A, h) -> float:
    """<h, (Dpsi[A])^{-1} h> with psi the derivative view of f."""
    psi = f.derivative()
    T_inv = superop_inverse(superop_matrix(psi, A))
    h = validate_hermitian(h, "h")
    return float(np.trace(h @ T_inv.apply(h)).real)


def condition_a_slack(f: ScalarFunction, A1, A2, h, lam: float) -> float:
    """Concavity slack of A -> <h, (Dpsi[A])^{-1} h> at one convex combination."""
    A_mix = lam * np.asarray(A1, dtype=complex) + (1.0 - lam) * np.asarray(A2, dtype=complex)
    q_mix = inverse_derivative_quadratic_form(f, A_mix, h)
    q1 = inverse_derivative_quadratic_form(f, A1, h)
    q2 = inverse_derivative_quadratic_form(f, A2, h)
    return q_mix - (lam * q1 + (1.0 - lam) * q2)


def condition_a_check(f: ScalarFunction, sampler, trials: int, seed: int = 0,
                      lambdas=DEFAULT_LAMBDAS, extra_random_lambdas: int = 2,
                      tol: float | None = None) -> VerificationReport:
    """Midpoint-concavity sweep of the inverted derivative map's quadratic form.

    sampler(rng) must yield (A1, A2, h) with A1, A2 positive definite in the
    derivative domain of f.
    """
    from .sampling import rng_for

    worst = np.inf
    worst_witness = None
    scale = 1.0
    for trial in range(trials):
        rng = rng_for(seed, "condition_a", f.spec_string(), trial)
        A1, A2, h = sampler(rng)
        lams = list(lambdas) + [float(rng.uniform(0.0, 1.0))
                                for _ in range(extra_random_lambdas)]
        for lam in lams:
            slack = condition_a_slack(f, A1, A2, h, lam)
            scale = max(scale, abs(slack),
                        abs(inverse_derivative_quadratic_form(f, A1, h)))
            if slack < worst:
                worst = slack
                worst_witness = {
                    "kind": "condition_a", "phi": f.spec_string(), "lambda": lam,
                    "A1": matrix_to_json(A1), "A2": matrix_to_json(A2),
                    "h": matrix_to_json(h),
                }
    if tol is None:
        tol = 1e-9 * scale
    return VerificationReport.from_margin(
        f"condition_a[{f.spec_string()}]", worst, tol, trials=trials, witness=worst_witness
    )


# --- fourth-derivative trace inequality -----------------------------------------


def condition_e_terms(f: ScalarFunction, A, h, k, method: str = "hybrid") -> tuple:
    """Both sides of the third-vs-second derivative trace inequality.

    Returns (lhs, rhs) with lhs = Tr[h Tinv D3psi(k, k, Tinv h)] and
    rhs = 2 Tr[h Tinv D2psi(k, Tinv D2psi(k, Tinv h))], T = Dpsi[A]; at
    d = 1 their difference reduces to the classical fourth-derivative
    criterion.
    """
    A = validate_hermitian(A, "A")
    h = validate_hermitian(h, "h")
    k = validate_hermitian(k, "k")
    lam = np.linalg.eigvalsh(A)
    if lam[0] < 0.5 - 1e-9 or lam[-1] > 4.0 + 1e-9:
        raise DomainError(
            f"condition (e) checks are restricted to spectra in [0.5, 4]; got "
            f"[{lam[0]:.6g}, {lam[-1]:.6g}]"
        )
    psi = f.derivative()
    T_inv = superop_inverse(superop_matrix(psi, A))
    u = T_inv.apply(h)
    lhs = float(np.trace(h @ T_inv.apply(frechet_d3(psi, A, k, k, u, method=method))).real)
    inner = T_inv.apply(frechet_d2(psi, A, k, u))
    rhs = 2.0 * float(np.trace(h @ T_inv.apply(frechet_d2(psi, A, k, inner))).real)
    return lhs, rhs


def condition_e_margin(f: ScalarFunction, A, h, k, method: str = "hybrid") -> float:
    """Relative slack (lhs - rhs) / max(1, |lhs|, |rhs|)."""
    lhs, rhs = condition_e_terms(f, A, h, k, method=method)
    return (lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def condition_e_check(f: ScalarFunction, A, h, k, tol: float = CONDITION_E_TOL,
                      method: str = "hybrid") -> VerificationReport:
    margin = condition_e_margin(f, A, h, k, method=method)
    return VerificationReport.from_margin(
        f"condition_e[{f.spec_string()}]", margin, tol,
        witness={"kind": "condition_e", "phi": f.spec_string(), "method": method,
                 "A": matrix_to_json(A), "h": matrix_to_json(h), "k": matrix_to_json(k)},
    )


def condition_e_scalar_oracle(f: ScalarFunction, a: float, h: float, k: float) -> float:
    """Closed-form d = 1 value: (f'''' f'' - 2 f'''^2) k^2 h^2 / f''^3."""
    d2 = float(f.deriv(a, 2))
    d3 = float(f.deriv(a, 3))
    d4 = float(f.deriv(a, 4))
    return (d4 * d2 - 2.0 * d3**2) * (k * k * h * h) / d2**3


# --- integral and Taylor relations ------------------------------------------------


def _trace_functionals(f: ScalarFunction, variant: str = "trace"):
    A = BivariateFunctional("bregman_A", f, variant)
    B = BivariateFunctional("map_B", f, variant)
    C = BivariateFunctional("map_C", f, variant)
    return A, B, C


def integral_relation_check(f: ScalarFunction, u, v, quadrature_points: int = 32,
                            tol: float = 1e-6) -> VerificationReport:
    """Gauss-Legendre reconstruction of the Bregman and increment functionals.

    bregman_A(u,v) = int_0^1 (1-s) map_C(u+sv, v) ds and
    map_B(u,v)     = int_0^1       map_C(u+sv, v) ds.
    """
    F_A, F_B, F_C = _trace_functionals(f)
    x, w = np.polynomial.legendre.leggauss(quadrature_points)
    s_nodes = 0.5 * (x + 1.0)
    s_weights = 0.5 * w
    u = validate_hermitian(u, "u")
    v = validate_hermitian(v, "v")
    c_vals = np.array([eval_functional(F_C, u + s * v, v) for s in s_nodes])
    quad_A = float(np.sum(s_weights * (1.0 - s_nodes) * c_vals))
    quad_B = float(np.sum(s_weights * c_vals))
    direct_A = eval_functional(F_A, u, v)
    direct_B = eval_functional(F_B, u, v)
    scale = max(1.0, abs(direct_A), abs(direct_B))
    err = max(abs(quad_A - direct_A), abs(quad_B - direct_B)) / scale
    return VerificationReport.from_margin(
        f"integral_relation[{f.spec_string()}]", -err, tol,
        witness={"kind": "integral_relation", "phi": f.spec_string(),
                 "u": matrix_to_json(u), "v": matrix_to_json(v),
                 "quadrature_points": quadrature_points},
    )


def taylor_relation_check(f: ScalarFunction, u, v, eps_sequence=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
                          tol: float = 1e-2) -> VerificationReport:
    """Small-direction expansion of the Bregman and increment functionals.

    bregman_A(u, eps v)/eps^2 -> map_C(u, v)/2 and map_B(u, eps v)/eps^2 ->
    map_C(u, v), with residuals shrinking at least linearly in eps.  The
    margin is minus the worst relative residual at the smallest eps; a
    failed convergence-order fit forces the report to fail (the fitted
    slopes are recorded in the witness).
    """
    F_A, F_B, F_C = _trace_functionals(f)
    eps_sequence = sorted((float(e) for e in eps_sequence), reverse=True)
    u = validate_hermitian(u, "u")
    v = validate_hermitian(v, "v")
    c_half = 0.5 * eval_functional(F_C, u, v)
    c_full = 2.0 * c_half
    scale = max(1.0, abs(c_full))
    res_A, res_B = [], []
    for eps in eps_sequence:
        res_A.append(abs(eval_functional(F_A, u, eps * v) / eps**2 - c_half) / scale)
        res_B.append(abs(eval_functional(F_B, u, eps * v) / eps**2 - c_full) / scale)
    # Residuals below this are cancellation roundoff amplified by 1/eps^2
    # (polynomial case); a convergence-order fit on them is meaningless.
    exact_floor = 1e-7
    slopes = {}
    ok = True
    for name, res in (("A", res_A), ("B", res_B)):
        if max(res) <= exact_floor:
            slopes[name] = None
            continue
        logs = np.log(np.maximum(res, 1e-300))
        slope = float(np.polyfit(np.log(eps_sequence), logs, 1)[0])
        slopes[name] = slope
        if slope < 0.9:
            ok = False
    margin = -max(res_A[-1], res_B[-1])
    if not ok:
        margin = min(margin, -2.0 * tol)  # force failure on a bad convergence order
    return VerificationReport.from_margin(
        f"taylor_relation[{f.spec_string()}]", margin, tol,
        witness={"kind": "taylor_relation", "phi": f.spec_string(), "slopes": slopes,
                 "u": matrix_to_json(u), "v": matrix_to_json(v)},
    )


# --- convexity lemma and conditional Jensen ---------------------------------------


def convexity_lemma_margin(f: ScalarFunction, weights, A_atoms, X_atoms) -> float:
    """E<X, Dpsi[A] X> - <EX, Dpsi[EA] EX>; nonnegative for in-class f."""
    psi = f.derivative()
    weights = np.asarray(weights, dtype=float)
    lhs = 0.0
    for w, A, X in zip(weights, A_atoms, X_atoms):
        lhs += float(w) * float(np.trace(
            np.asarray(X, dtype=complex).conj().T @ frechet_d1(psi, A, X)).real)
    mean_A = hermitian_part(np.einsum("m,mij->ij", weights, np.asarray(A_atoms, dtype=complex)))
    mean_X = hermitian_part(np.einsum("m,mij->ij", weights, np.asarray(X_atoms, dtype=complex)))
    rhs = float(np.trace(mean_X.conj().T @ frechet_d1(psi, mean_A, mean_X)).real)
    return lhs - rhs


def convexity_lemma_check(f: ScalarFunction, weights, A_atoms, X_atoms,
                          tol: float | None = None) -> VerificationReport:
    """Jensen-type lower bound for the derivative-map quadratic form."""
    margin = convexity_lemma_margin(f, weights, A_atoms, X_atoms)
    if tol is None:
        tol = 1e-9 * (1.0 + abs(margin))
    return VerificationReport.from_margin(
        f"convexity_lemma[{f.spec_string()}]", margin, tol,
        witness={"kind": "convexity_lemma", "phi": f.spec_string(),
                 "weights": [float(w) for w in weights],
                 "A": [matrix_to_json(a) for a in A_atoms],
                 "X": [matrix_to_json(x) for x in X_atoms]},
    )


def conditional_jensen_gap(f: ScalarFunction, P: ProductEnsemble) -> np.ndarray:
    """E_1 H(Z | X_1) - H(E_1 Z) for a two-factor product, as an operator.

    E_1 averages over the first factor; H(. | X_1) is the entropy in the
    second factor's randomness at fixed X_1.
    """
    if P.n != 2:
        raise DomainError(f"conditional Jensen check needs exactly two factors, got {P.n}")
    w1 = P.factor_weights[0]
    lhs = np.zeros((P.dim, P.dim), dtype=complex)
    for s1, w in enumerate(w1):
        lhs = lhs + float(w) * operator_phi_entropy(f, P.slice_over_complement(0, s1))
    # E_1 Z is a random matrix in the second factor only.
    w2 = P.factor_weights[1]
    averaged = []
    for s2 in range(len(w2)):
        avg = np.zeros((P.dim, P.dim), dtype=complex)
        for s1, w in enumerate(w1):
            avg = avg + float(w) * P.z_map[(s1, s2)]
        averaged.append(hermitian_part(avg))
    E1Z = MatrixEnsemble(np.asarray(w2, dtype=float), np.stack(averaged))
    rhs = operator_phi_entropy(f, E1Z)
    return hermitian_part(lhs - rhs)


def conditional_jensen_check(f: ScalarFunction, P: ProductEnsemble, variant: str = "trace",
                             tol: float | None = None) -> VerificationReport:
    gap = conditional_jensen_gap(f, P)
    if variant == "trace":
        margin = normalized_trace(gap)
    elif variant == "operator":
        margin = float(np.linalg.eigvalsh(gap)[0])
    else:
        raise DomainError(f"variant must be 'trace' or 'operator', got '{variant}'")
    if tol is None:
        tol = 1e-10 * (1.0 + frobenius(gap))
    return VerificationReport.from_margin(
        f"conditional_jensen[{f.spec_string()},{variant}]", margin, tol,
        witness={"kind": "conditional_jensen", "phi": f.spec_string(), "variant": variant,
                 "product": P.to_json_dict()},
    )
