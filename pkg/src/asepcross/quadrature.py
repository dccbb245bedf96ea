"""Contour integration on products of circles plus exact residue extraction.

All closed-form probability formulas in this package reduce to integrals of
analytic integrands over products of circles.  The trapezoid rule on a
circle converges geometrically for such integrands and is exact for
truncated Laurent series, so node doubling with a two-iterate stopping rule
gives reliable error control.  A separate series-based residue engine
handles integrands of rational-times-exponential form exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import AccuracyError, ResourceLimitError, ValidationError

DEFAULT_START_NODES = 32
DEFAULT_MAX_NODES = 4096
DEFAULT_NODE_BUDGET = 2**26
EVAL_CHUNK = 2**17

_node_budget = DEFAULT_NODE_BUDGET


def set_node_budget(budget: int) -> None:
    """Set the global per-integral node evaluation cap (CLI --budget)."""
    global _node_budget
    if budget < 64:
        raise ValidationError("node budget must be at least 64")
    _node_budget = int(budget)


def get_node_budget() -> int:
    return _node_budget


@dataclass(frozen=True)
class ContourSpec:
    """A circle in the complex plane used as an integration contour."""

    center: complex = 0.0
    radius: float = 1.0
    orientation: int = 1
    nodes: int = DEFAULT_START_NODES

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("contour radius must be positive")
        if self.orientation not in (1, -1):
            raise ValidationError("orientation must be +1 or -1")
        n = int(self.nodes)
        if n < 8 or n & (n - 1):
            raise ValidationError("node count must be a power of two >= 8")

    def points(self, num: int | None = None) -> np.ndarray:
        num = self.nodes if num is None else num
        theta = 2.0 * np.pi * np.arange(num) / num
        return self.center + self.radius * np.exp(1j * theta)


@dataclass(frozen=True)
class ContourProduct:
    """Ordered list of circles (innermost first) with per-variable roles.

    Roles tag each variable as inner ('z') or outer ('u') type; the nesting
    contract requires every z-type radius to stay below every u-type radius
    when the circles share a common center.
    """

    contours: tuple[ContourSpec, ...]
    roles: tuple[str, ...] = ()

    def __post_init__(self):
        contours = tuple(self.contours)
        roles = tuple(self.roles) if self.roles else ("z",) * len(contours)
        if len(roles) != len(contours):
            raise ValidationError("one role per contour is required")
        if any(r not in ("z", "u") for r in roles):
            raise ValidationError("roles must be 'z' or 'u'")
        z_radii = [c.radius for c, r in zip(contours, roles) if r == "z"]
        u_radii = [c.radius for c, r in zip(contours, roles) if r == "u"]
        if z_radii and u_radii and max(z_radii) >= min(u_radii):
            raise ValidationError("z-type contours must nest inside u-type contours")
        object.__setattr__(self, "contours", contours)
        object.__setattr__(self, "roles", roles)

    @property
    def dim(self) -> int:
        return len(self.contours)


def circle_integrate(f, contour: ContourSpec, nodes: int | None = None) -> complex:
    """(1/2*pi*i) * closed integral of f over the circle, trapezoid rule.

    ``f`` must accept a complex ndarray and return the sampled values.
    Non-finite samples indicate a pole on the contour and raise.
    """
    z = contour.points(nodes)
    vals = np.asarray(f(z), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise AccuracyError("integrand is non-finite on the contour (pole on contour?)")
    return contour.orientation * complex(np.mean(vals * (z - contour.center)))


def product_integrate(
    f,
    cp: ContourProduct,
    tol: float = 1e-10,
    start_nodes: int = DEFAULT_START_NODES,
    max_nodes: int = DEFAULT_MAX_NODES,
    node_budget: int | None = None,
) -> tuple[complex, float]:
    """Tensor-product contour integral with per-dimension node doubling.

    ``f`` receives a complex array of shape (dim, M) holding all node
    tuples and must return the integrand values, shape (M,).  Node counts
    double until two successive iterates differ by less than ``tol``; the
    result is ``(value, est_err)``.  Exceeding the node budget or the
    doubling cap without convergence raises AccuracyError carrying the last
    two iterates.
    """
    if node_budget is None:
        node_budget = _node_budget
    d = cp.dim
    if d == 0:
        return complex(f(np.zeros((0, 1), dtype=complex))[0]), 0.0
    orient = 1
    for c in cp.contours:
        orient *= c.orientation
    spent = 0
    prev = None
    value = None
    n = start_nodes
    while n <= max_nodes:
        total_nodes = n**d
        if spent + total_nodes > node_budget:
            raise AccuracyError(
                f"node budget {node_budget} exhausted before convergence; "
                f"last iterates: {prev} -> {value}"
            )
        axes = [c.points(n) for c in cp.contours]
        spent += total_nodes
        acc = 0.0 + 0.0j
        for start in range(0, total_nodes, EVAL_CHUNK):
            idx = np.arange(start, min(start + EVAL_CHUNK, total_nodes))
            pts = np.empty((d, idx.size), dtype=complex)
            rem = idx
            for k in range(d - 1, -1, -1):
                rem, sub = np.divmod(rem, n)
                pts[k] = axes[k][sub]
            vals = np.asarray(f(pts), dtype=complex)
            if not np.all(np.isfinite(vals)):
                raise AccuracyError("integrand is non-finite on the contour product")
            weight = np.ones(idx.size, dtype=complex)
            for k, c in enumerate(cp.contours):
                weight *= pts[k] - c.center
            acc += np.sum(vals * weight)
        prev = value
        value = orient * complex(acc) / total_nodes
        if prev is not None:
            err = abs(value - prev)
            if err < tol:
                return value, err
        n *= 2
    raise AccuracyError(
        f"contour quadrature did not reach tol={tol}; "
        f"last iterates: {prev} -> {value}"
    )


@dataclass(frozen=True)
class RationalExpDescriptor:
    """Integrand of the form prefactor * exp(exp_coeff*z) * prod (z-a)^e.

    ``factors`` maps points to integer exponents; negative exponents are
    poles.  Repeated points are merged at construction.
    """

    exp_coeff: complex = 0.0
    factors: tuple[tuple[complex, int], ...] = ()
    prefactor: complex = 1.0

    def __post_init__(self):
        merged: dict[complex, int] = {}
        for point, expo in self.factors:
            if expo != int(expo):
                raise ValidationError("factor exponents must be integers")
            point = complex(point)
            for known in merged:
                if abs(known - point) < 1e-12:
                    point = known
                    break
            merged[point] = merged.get(point, 0) + int(expo)
        object.__setattr__(
            self, "factors", tuple((p, e) for p, e in merged.items() if e != 0)
        )

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = self.prefactor * np.exp(self.exp_coeff * z)
        for point, expo in self.factors:
            out = out * (z - point) ** expo
        return out

    def poles(self) -> tuple[complex, ...]:
        return tuple(p for p, e in self.factors if e < 0)


def _binomial_series(shift: complex, exponent: int, length: int) -> np.ndarray:
    """Coefficients of (x + shift)^exponent as a series in x, truncated.

    Exact for all exponents: positive exponents terminate, negative ones use
    the generalized binomial series (requires shift != 0).
    """
    coeffs = np.zeros(length, dtype=complex)
    if shift == 0:
        if exponent < 0:
            raise ValidationError("pole collision: factor vanishes at expansion point")
        if exponent < length:
            coeffs[exponent] = 1.0
        return coeffs
    top = length - 1 if exponent < 0 else min(exponent, length - 1)
    c = shift**exponent
    coeffs[0] = c
    for k in range(1, top + 1):
        c = c * (exponent - k + 1) / (k * shift)
        coeffs[k] = c
    return coeffs


def laurent_residue(
    descriptor: RationalExpDescriptor, at: complex, order_cap: int = 4096
) -> complex:
    """Residue of a rational-times-exponential integrand at one of its poles.

    The residue is the coefficient of x^(b-1) (x = z - pole, b = pole order)
    in the product of the remaining factors; every factor is expanded to
    length b, so the extraction is exact up to rounding.  Pole orders above
    ``order_cap`` are refused.
    """
    at = complex(at)
    order = 0
    rest = []
    for point, expo in descriptor.factors:
        if abs(point - at) < 1e-12:
            if expo >= 0:
                return 0.0 + 0.0j
            order = -expo
            if order > order_cap:
                raise ResourceLimitError(
                    f"pole order {order} exceeds the cap {order_cap}"
                )
        else:
            rest.append((point, expo))
    if order == 0:
        return 0.0 + 0.0j
    if descriptor.exp_coeff != 0:
        series = np.array(
            [descriptor.exp_coeff**k / math.factorial(k) for k in range(order)],
            dtype=complex,
        )
    else:
        series = np.zeros(order, dtype=complex)
        series[0] = 1.0
    series = series * (descriptor.prefactor * np.exp(descriptor.exp_coeff * at))
    for point, expo in rest:
        series = _truncated_multiply(
            series, _binomial_series(at - point, expo, order), order
        )
    return complex(series[order - 1])


def _truncated_multiply(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    return np.convolve(a, b)[:length]


def residue_sum(descriptor: RationalExpDescriptor, points) -> complex:
    """Sum of residues at the given points (deduplicated against factors)."""
    total = 0.0 + 0.0j
    seen: list[complex] = []
    for p in points:
        p = complex(p)
        if any(abs(p - s) < 1e-12 for s in seen):
            continue
        seen.append(p)
        total += laurent_residue(descriptor, p)
    return total


class MultivariatePolynomial:
    """Sparse multivariate polynomial keyed by exponent tuples.

    Supports only what the residue route needs: start from 1, multiply in
    linear factors ``c0 + sum c_k x_k``, and iterate monomials.
    """

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.terms: dict[tuple[int, ...], complex] = {(0,) * nvars: 1.0 + 0.0j}

    def multiply_linear(self, const: complex, coeffs: dict[int, complex]):
        new: dict[tuple[int, ...], complex] = {}
        for expo, c in self.terms.items():
            if const != 0:
                key = expo
                new[key] = new.get(key, 0.0) + c * const
            for var, cv in coeffs.items():
                if cv == 0:
                    continue
                key = tuple(
                    e + 1 if k == var else e for k, e in enumerate(expo)
                )
                new[key] = new.get(key, 0.0) + c * cv
        self.terms = {k: v for k, v in new.items() if v != 0}
        return self

    def multiply_terms(self, other: dict):
        """Multiply by another exponent->coefficient map (exponents may be negative)."""
        new: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                new[key] = new.get(key, 0.0) + c1 * c2
        self.terms = {k: v for k, v in new.items() if v != 0}
        return self

    def items(self):
        return self.terms.items()


def vandermonde_squared_poly(nvars: int) -> MultivariatePolynomial:
    """Expansion of prod_{i != j} (x_j - x_i) into monomials."""
    poly = MultivariatePolynomial(nvars)
    for i in range(nvars):
        for j in range(nvars):
            if i == j:
                continue
            poly.multiply_linear(0.0, {j: 1.0, i: -1.0})
    return poly


def vandermonde_poly(nvars: int) -> MultivariatePolynomial:
    """Expansion of prod_{i < j} (x_j - x_i) into monomials."""
    poly = MultivariatePolynomial(nvars)
    for i in range(nvars):
        for j in range(i + 1, nvars):
            poly.multiply_linear(0.0, {j: 1.0, i: -1.0})
    return poly
