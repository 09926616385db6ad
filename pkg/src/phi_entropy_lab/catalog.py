"""Registry of scalar convex functions with analytic derivatives.

Each entry carries evaluators for the function and its first four
derivatives, a real domain, and membership tags for the subadditive
entropy classes.  Divided-difference tables built here feed the matrix
derivative engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError

# Class tags.
C1 = "C1"  # classical subadditive entropy class
C2 = "C2"  # trace-functional subadditive class
C3 = "C3"  # operator-valued subadditive class
OPERATOR_CONVEX = "operator_convex"
OUTSIDE_CLASS = "outside_class"

# Derivative evaluators of functions defined on [0, inf) reject arguments
# below this floor; their derivatives diverge at zero.
DERIV_FLOOR = 1e-12

# Below this node spread, divided differences switch from quotient to
# derivative form; the quotient loses all precision as nodes merge.
COINCIDENCE_RTOL = 1e-7


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def contains(self, u: float) -> bool:
        if u < self.lo or (u == self.lo and not self.lo_closed):
            return False
        if u > self.hi or (u == self.hi and not self.hi_closed):
            return False
        return True

    def open_version(self) -> "Interval":
        return Interval(self.lo, self.hi, lo_closed=False, hi_closed=False)

    def __str__(self) -> str:
        lo_b = "[" if self.lo_closed else "("
        hi_b = "]" if self.hi_closed else ")"
        return f"{lo_b}{self.lo:g}, {self.hi:g}{hi_b}"


REAL_LINE = Interval(-np.inf, np.inf, lo_closed=False, hi_closed=False)
HALF_LINE = Interval(0.0, np.inf, lo_closed=True, hi_closed=False)


@dataclass(frozen=True)
class ScalarFunction:
    """A scalar function with derivatives up to order four.

    ``evals[k]`` evaluates the k-th derivative elementwise on numpy arrays;
    an entry may be None when the derivative is unavailable.  ``deriv_floor``
    is the smallest argument the derivative evaluators accept.  Polynomials
    carry ``monomial_coeffs`` so divided differences can be evaluated in
    closed form, free of cancellation.
    """

    name: str
    domain: Interval
    evals: tuple[Callable | None, ...]
    class_tags: frozenset = field(default_factory=frozenset)
    deriv_floor: float = 0.0
    params: tuple = ()
    monomial_coeffs: tuple | None = None

    def __call__(self, u):
        return self.deriv(u, 0)

    def deriv(self, u, order: int):
        if order >= len(self.evals) or self.evals[order] is None:
            raise DomainError(f"'{self.name}' has no derivative of order {order}")
        u = np.asarray(u, dtype=float)
        if order >= 1 and self.deriv_floor > 0.0 and np.any(u < self.deriv_floor):
            raise DomainError(
                f"derivative of '{self.name}' requires arguments >= "
                f"{self.deriv_floor:g}, got {float(np.min(u)):.6g}"
            )
        out = np.asarray(self.evals[order](u), dtype=float)
        return out if out.shape else float(out)

    def derivative(self) -> "ScalarFunction":
        """View of the first derivative, with derivatives shifted down one order."""
        if len(self.evals) < 2 or self.evals[1] is None:
            raise DomainError(f"'{self.name}' has no first derivative")
        coeffs = None
        if self.monomial_coeffs is not None:
            coeffs = tuple(m * c for m, c in enumerate(self.monomial_coeffs))[1:] or (0.0,)
        return ScalarFunction(
            name=self.name + "'",
            domain=self.domain.open_version(),
            evals=self.evals[1:],
            class_tags=frozenset(),
            deriv_floor=self.deriv_floor,
            params=self.params,
            monomial_coeffs=coeffs,
        )

    def has_tag(self, tag: str) -> bool:
        return tag in self.class_tags

    def spec_string(self) -> str:
        if self.params:
            return ":".join([self.name] + [f"{p:g}" for p in self.params])
        return self.name


def _const(c: float):
    return lambda u: np.full_like(np.asarray(u, dtype=float), c)


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    safe = np.where(u > 0.0, u, 1.0)
    return np.where(u > 0.0, u * np.log(safe), 0.0)


_BUILTIN_NAMES = ("affine", "square", "xlogx", "power", "quartic", "exp")


def builtin(name: str, *params: float, allow_outside_class: bool = False) -> ScalarFunction:
    """Construct a catalog function by name.

    Supported: affine(a, b), square, xlogx, power(p) for p in [1, 2],
    quartic, exp.  quartic and exp are shipped purely as counterexample
    fuel and carry the outside_class tag.  power(p) with p outside [1, 2]
    is rejected unless allow_outside_class is set.
    """
    if name == "affine":
        if len(params) != 2:
            raise DomainError("affine requires two parameters a, b")
        a, b = map(float, params)
        return ScalarFunction(
            "affine",
            REAL_LINE,
            (lambda u: a + b * np.asarray(u, dtype=float), _const(b), _const(0.0),
             _const(0.0), _const(0.0)),
            frozenset({C1, C2, C3, OPERATOR_CONVEX}),
            params=(a, b),
            monomial_coeffs=(a, b),
        )
    if name == "square":
        return ScalarFunction(
            "square",
            REAL_LINE,
            (lambda u: np.asarray(u, dtype=float) ** 2,
             lambda u: 2.0 * np.asarray(u, dtype=float),
             _const(2.0), _const(0.0), _const(0.0)),
            frozenset({C1, C2, C3, OPERATOR_CONVEX}),
            monomial_coeffs=(0.0, 0.0, 1.0),
        )
    if name == "xlogx":
        return ScalarFunction(
            "xlogx",
            HALF_LINE,
            (_xlogx,
             lambda u: np.log(u) + 1.0,
             lambda u: 1.0 / u,
             lambda u: -1.0 / u**2,
             lambda u: 2.0 / u**3),
            frozenset({C1, C2}),
            deriv_floor=DERIV_FLOOR,
        )
    if name == "power":
        if len(params) != 1:
            raise DomainError("power requires one exponent parameter p")
        p = float(params[0])
        outside = not (1.0 <= p <= 2.0)
        if outside and not allow_outside_class:
            raise DomainError(
                f"power exponent p={p:g} outside [1, 2]; pass "
                "allow_outside_class=True to construct it anyway"
            )

        def dk(k):
            coeff = 1.0
            for j in range(k):
                coeff *= p - j
            return lambda u, c=coeff, e=p - k: c * np.asarray(u, dtype=float) ** e

        tags = frozenset({OUTSIDE_CLASS}) if outside else frozenset({C1, C2})
        return ScalarFunction(
            "power", HALF_LINE, tuple(dk(k) for k in range(5)), tags,
            deriv_floor=DERIV_FLOOR, params=(p,),
        )
    if name == "quartic":
        return ScalarFunction(
            "quartic",
            REAL_LINE,
            (lambda u: np.asarray(u, dtype=float) ** 4,
             lambda u: 4.0 * np.asarray(u, dtype=float) ** 3,
             lambda u: 12.0 * np.asarray(u, dtype=float) ** 2,
             lambda u: 24.0 * np.asarray(u, dtype=float),
             _const(24.0)),
            frozenset({OUTSIDE_CLASS}),
            monomial_coeffs=(0.0, 0.0, 0.0, 0.0, 1.0),
        )
    if name == "exp":
        exp = lambda u: np.exp(np.asarray(u, dtype=float))  # noqa: E731
        return ScalarFunction(
            "exp", REAL_LINE, (exp, exp, exp, exp, exp), frozenset({OUTSIDE_CLASS})
        )
    raise DomainError(f"unknown function '{name}'; expected one of {_BUILTIN_NAMES}")


def from_spec(spec: str, allow_outside_class: bool = False) -> ScalarFunction:
    """Parse names of the form "square", "power:1.5", "affine:2:3"."""
    parts = spec.split(":")
    try:
        params = tuple(float(p) for p in parts[1:])
    except ValueError as exc:
        raise DomainError(f"malformed function spec '{spec}'") from exc
    return builtin(parts[0], *params, allow_outside_class=allow_outside_class)


# --- divided differences -----------------------------------------------------

# Quotient evaluation amplifies roundoff like eps/spread^order, so each order
# switches to a mean-centered Taylor form inside a band proportional to the
# local node magnitude (the global coincidence threshold is the floor).
TAYLOR_BAND = {1: 1e-4, 2: 1e-3, 3: 3e-3}


def coincidence_threshold(nodes: np.ndarray) -> float:
    nodes = np.asarray(nodes, dtype=float)
    diameter = float(nodes.max() - nodes.min()) if nodes.size else 0.0
    return COINCIDENCE_RTOL * (1.0 + diameter)


def _h1(*vars_):
    return sum(vars_)


def _h2(*vars_):
    p1 = sum(vars_)
    p2 = sum(v * v for v in vars_)
    return 0.5 * (p1 * p1 + p2)


def _h3(*vars_):
    p1 = sum(vars_)
    p2 = sum(v * v for v in vars_)
    p3 = sum(v * v * v for v in vars_)
    return (p1**3 + 3.0 * p1 * p2 + 2.0 * p3) / 6.0


def _poly_dd(coeffs, order, *nodes):
    """Exact divided difference of a polynomial: sum_m c_m h_{m-order}(nodes).

    Complete homogeneous symmetric polynomials carry no cancellation, so
    this path is exact to roundoff for the polynomial catalog entries.
    """
    nodes = np.broadcast_arrays(*[np.asarray(n, dtype=float) for n in nodes])
    hs = (lambda *v: np.ones_like(v[0]), _h1, _h2, _h3)
    out = np.zeros_like(nodes[0])
    for m, c in enumerate(coeffs):
        j = m - order
        if c == 0.0 or j < 0:
            continue
        out = out + c * hs[j](*nodes)
    return out


def _band(order: int, delta: float, *nodes):
    local = np.abs(nodes[0])
    for n in nodes[1:]:
        local = np.maximum(local, np.abs(n))
    return np.maximum(delta, TAYLOR_BAND[order] * local)


def _has_order(f: ScalarFunction, order: int) -> bool:
    return order < len(f.evals) and f.evals[order] is not None


def _dd1(f: ScalarFunction, x, y, delta: float):
    """First divided difference; symmetric, Taylor form near coincidence."""
    if f.monomial_coeffs is not None:
        return _poly_dd(f.monomial_coeffs, 1, x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    close = np.abs(diff) <= _band(1, delta, x, y)
    mid = 0.5 * (x + y)
    safe = np.where(close, 1.0, diff)
    quot = (f.deriv(x, 0) - f.deriv(y, 0)) / safe
    taylor = f.deriv(mid, 1)
    if _has_order(f, 3):
        taylor = taylor + f.deriv(mid, 3) * diff * diff / 24.0
    return np.where(close, taylor, quot)


def _dd2_sorted(f: ScalarFunction, a, b, c, delta: float):
    """Second divided difference on sorted nodes a <= b <= c."""
    if f.monomial_coeffs is not None:
        return _poly_dd(f.monomial_coeffs, 2, a, b, c)
    spread = c - a
    close = spread <= _band(2, delta, a, c)
    mid = (a + b + c) / 3.0
    safe = np.where(close, 1.0, spread)
    quot = (_dd1(f, b, c, delta) - _dd1(f, a, b, delta)) / safe
    taylor = 0.5 * f.deriv(mid, 2)
    if _has_order(f, 4):
        # mean-centered: the linear term drops, leaving the h_2 correction
        sum_sq = (a - mid) ** 2 + (b - mid) ** 2 + (c - mid) ** 2
        taylor = taylor + f.deriv(mid, 4) * sum_sq / 48.0
    return np.where(close, taylor, quot)


def _dd3_sorted(f: ScalarFunction, a, b, c, d, delta: float):
    """Third divided difference on sorted nodes a <= b <= c <= d."""
    if f.monomial_coeffs is not None:
        return _poly_dd(f.monomial_coeffs, 3, a, b, c, d)
    spread = d - a
    close = spread <= _band(3, delta, a, d)
    mid = (a + b + c + d) / 4.0
    safe = np.where(close, 1.0, spread)
    quot = (_dd2_sorted(f, b, c, d, delta) - _dd2_sorted(f, a, b, c, delta)) / safe
    return np.where(close, f.deriv(mid, 3) / 6.0, quot)


def dd1_grid(f: ScalarFunction, nodes: np.ndarray, delta: float | None = None) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    if delta is None:
        delta = coincidence_threshold(nodes)
    return _dd1(f, nodes[:, None], nodes[None, :], delta)


def dd2_grid(f: ScalarFunction, nodes: np.ndarray, delta: float | None = None) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    if delta is None:
        delta = coincidence_threshold(nodes)
    grids = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    s = np.sort(np.stack(grids, axis=-1), axis=-1)
    return _dd2_sorted(f, s[..., 0], s[..., 1], s[..., 2], delta)


def dd3_grid(f: ScalarFunction, nodes: np.ndarray, delta: float | None = None) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    if delta is None:
        delta = coincidence_threshold(nodes)
    grids = np.meshgrid(nodes, nodes, nodes, nodes, indexing="ij")
    s = np.sort(np.stack(grids, axis=-1), axis=-1)
    return _dd3_sorted(f, s[..., 0], s[..., 1], s[..., 2], s[..., 3], delta)


@dataclass(frozen=True)
class DividedDifferenceTable:
    """Symmetric table of divided differences on a node vector.

    values has shape (m,)*(order+1); entries with coincident nodes are
    filled from derivatives of matching order.
    """

    order: int
    nodes: np.ndarray
    values: np.ndarray


def divided_differences(f: ScalarFunction, nodes, order: int) -> DividedDifferenceTable:
    """Build the order-1, -2 or -3 divided-difference table of f on nodes."""
    nodes = np.asarray(nodes, dtype=float)
    if order not in (1, 2, 3):
        raise DomainError(f"divided differences support orders 1..3, got {order}")
    require_nodes_in_derivative_domain(f, nodes, order)
    grid = {1: dd1_grid, 2: dd2_grid, 3: dd3_grid}[order]
    return DividedDifferenceTable(order, nodes, np.asarray(grid(f, nodes), dtype=float))


def require_nodes_in_derivative_domain(f: ScalarFunction, nodes: np.ndarray, order: int) -> None:
    """Nodes must sit strictly inside f's domain, above the derivative floor."""
    interior = f.domain.open_version()
    floor = max(f.deriv_floor, 0.0) if order >= 1 else 0.0
    for u in np.atleast_1d(nodes):
        u = float(u)
        if not interior.contains(u) or u < floor:
            raise DomainError(
                f"node {u:.6g} outside the interior of the domain {f.domain} "
                f"of '{f.name}' (derivative floor {floor:g})"
            )
