"""Closed-form transition and crossing probability evaluators.

Three families of formulas live here: the two-species TASEP Green's
function (a nested double permutation sum under an (n+m)-fold contour
integral around the origin), the multi-species ASEP formulas built on the
vertex-model partition functions (integrals around 1), and the cumulative
wall-crossing formulas (integrals around the origin, or in inverted
variables around {0, 1, 1-rho} where the integrand becomes rational times
an exponential and residues are extracted exactly).

Every probability-valued result is checked for a vanishing imaginary part
and clamped within [0, 1] only inside a small tolerance band; anything
further out raises AccuracyError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AccuracyError,
    BlockSignatureVector,
    ParticleConfig,
    ResourceLimitError,
    ValidationError,
    signed_permutations,
)
from .quadrature import (
    ContourProduct,
    ContourSpec,
    MultivariatePolynomial,
    RationalExpDescriptor,
    laurent_residue,
    product_integrate,
    residue_sum,
    vandermonde_poly,
    vandermonde_squared_poly,
)
from .vertex import f_mu, sfF_lambda, xi_mu

Z_RADIUS = 0.45
U_RADIUS = 0.80
W_RADIUS = 0.55
DIMENSION_BUDGET = 5
IMAG_TOL = 1e-9
NEG_TOL = 1e-9


@dataclass(frozen=True)
class GreenQuery:
    """Transition probability query for the two-species TASEP."""

    initial: ParticleConfig
    final: ParticleConfig
    t: float
    method: str = "auto"  # auto | laurent | quadrature
    tol: float = 1e-10

    def __post_init__(self):
        if self.t < 0:
            raise ValidationError("t must be >= 0")
        if self.method not in ("auto", "laurent", "quadrature"):
            raise ValidationError("method must be auto, laurent or quadrature")
        if self.initial.n != self.final.n or self.initial.m != self.final.m:
            raise ValidationError("initial and final configs must share (n, m)")


@dataclass(frozen=True)
class CrossingQuery:
    """Total-crossing query between block signature vectors."""

    initial: BlockSignatureVector
    final: BlockSignatureVector
    q: float
    t: float

    def __post_init__(self):
        if self.initial.orientation != "initial":
            raise ValidationError("initial vector must be initial-oriented")
        if self.final.orientation != "final" and self.final.r > 1:
            raise ValidationError("final vector must be final-oriented")
        if self.initial.sizes != self.final.sizes:
            raise ValidationError("block sizes must match")
        if self.q < 0:
            raise ValidationError("q must be >= 0")
        if self.t < 0:
            raise ValidationError("t must be >= 0")


@dataclass(frozen=True)
class WallQuery:
    """Cumulative wall-crossing query: type 1 in [s1, s2), type 2 beyond s2."""

    s1: int
    s2: int
    rho: float
    n: int
    m: int
    t: float

    def __post_init__(self):
        if not 0 <= self.m <= self.n or self.n < 1:
            raise ValidationError("need 0 <= m <= n with n >= 1")
        if not 0 < self.rho <= 1:
            raise ValidationError("rho must lie in (0, 1]")
        if self.t < 0:
            raise ValidationError("t must be >= 0")

    @property
    def feasible(self) -> bool:
        return self.s2 - self.s1 >= self.n - self.m


def _finalize_probability(value: complex, imag_tol=IMAG_TOL, neg_tol=NEG_TOL) -> float:
    if abs(value.imag) > imag_tol:
        raise AccuracyError(
            f"probability has imaginary part {value.imag:.3e} above tolerance"
        )
    v = value.real
    if v < -neg_tol or v > 1.0 + neg_tol:
        raise AccuracyError(f"value {v!r} lies outside [0, 1] beyond tolerance")
    return min(max(v, 0.0), 1.0)


def _spread_radii(n: int, lo: float, hi: float) -> list[float]:
    if n == 1:
        return [0.5 * (lo + hi)]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def eigenfunction_P(nu, p, t, z, u):
    """Generator eigenfunction: the double permutation sum over S_n x S_m.

    ``z`` has shape (n,) or (n, M) and ``u`` shape (m,) or (m, M); the
    spectral points enter symmetrically in the time factor, so it is applied
    once outside the permutation sums.
    """
    nu = [int(x) for x in nu]
    p = [int(x) for x in p]
    n, m = len(nu), len(p)
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 1
    Z = z.reshape(n, -1)
    M = Z.shape[1]
    U = np.asarray(u, dtype=complex).reshape(m, -1) if m else np.zeros((0, M), complex)
    if m and U.shape[1] != M:
        raise ValidationError("z and u must share their node dimension")
    omz = 1.0 - Z
    exp_t = np.ones(M, dtype=complex)
    for i in range(n):
        exp_t = exp_t * np.exp((1.0 / Z[i] - 1.0) * t)
    c = [sum(1 for pi in p if pi >= j) for j in range(1, n + 1)]
    a_pref = np.ones(M, dtype=complex)
    for i in range(n):
        a_pref = a_pref * omz[i] ** (i + 1)
    pow_omz_inv = [
        [omz[k] ** (-(i + 1) - c[i]) for i in range(n)] for k in range(n)
    ]
    pow_z_nu = [[Z[k] ** nu[i] for i in range(n)] for k in range(n)]
    if m:
        omu = 1.0 - U
        cu_pref = np.ones(M, dtype=complex)
        for a in range(m):
            cu_pref = cu_pref * omu[a] ** (a + 1)
        pow_omu_inv = [[omu[a] ** (-(i + 1)) for i in range(m)] for a in range(m)]
        sigma_perms = signed_permutations(m)
    total = np.zeros(M, dtype=complex)
    for perm, sgn in signed_permutations(n):
        term = sgn * a_pref
        for i in range(n):
            term = term * pow_omz_inv[perm[i]][i] * pow_z_nu[perm[i]][i]
        if m:
            uz = []
            for a in range(m):
                diffs = U[a][None, :] - Z[perm, :]
                uz.append(np.cumprod(diffs, axis=0))
            csum = np.zeros(M, dtype=complex)
            for sperm, ssgn in sigma_perms:
                cterm = ssgn * cu_pref
                for i in range(m):
                    a = sperm[i]
                    cterm = cterm * pow_omu_inv[a][i]
                    e = p[i] - 1
                    if e > 0:
                        cterm = cterm * uz[a][e - 1]
                csum += cterm
            term = term * csum
        total += term
    total = total * exp_t
    return complex(total[0]) if scalar else total


def _green_laurent(mu0: int, nu0: int, t: float) -> float:
    """Single free particle: residue of w^(mu-nu-1) e^((w-1)t) at the origin."""
    desc = RationalExpDescriptor(
        exp_coeff=t, factors=(((0.0 + 0.0j), mu0 - nu0 - 1),), prefactor=math.exp(-t)
    )
    return laurent_residue(desc, 0.0).real


def two_tasep_green(query: GreenQuery):
    """Transition probability of the two-species TASEP.

    When the type-2 particles initially occupy indices 1..m, the outer
    integrals reduce to residues at u_i = z_i (the remaining apparent poles
    cancel after symmetrization), which cuts the integral dimension from
    n + m to n; otherwise the full tensor quadrature runs with the u-circles
    enclosing the z-circles.
    """
    value, _, _ = green_evaluation(query)
    return value


def green_evaluation(query: GreenQuery):
    """Like two_tasep_green but also returns (est_err, method)."""
    ini, fin = query.initial, query.final
    n, m = ini.n, ini.m
    mu, nu = ini.positions, fin.positions
    p0, p = ini.type2_indices, fin.type2_indices
    t = query.t
    method = query.method
    if method == "auto":
        method = "laurent" if (n == 1 and m == 0) else "quadrature"
    if method == "laurent":
        if not (n == 1 and m == 0):
            raise ValidationError(
                "laurent evaluation applies to the single-particle case only"
            )
        return _finalize_probability(complex(_green_laurent(mu[0], nu[0], t))), 0.0, "laurent"
    fast = all(p0[i] == i + 1 for i in range(m))
    dims = n if fast else n + m
    if dims > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{dims} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    if fast:
        radii = _spread_radii(n, 0.30, 0.60)
        contours = tuple(ContourSpec(0.0, r) for r in radii)

        def integrand(Z):
            out = eigenfunction_P(nu, p, t, Z, Z[:m])
            for i in range(n):
                out = out * Z[i] ** (-mu[i] - 1) * (1.0 - Z[i]) ** m
            for a in range(m):
                for j in range(a):
                    out = out / (Z[a] - Z[j])
                for j in range(a + 1, n):
                    out = out / (1.0 - Z[j])
            return out

        cp = ContourProduct(contours)
    else:
        contours = tuple(ContourSpec(0.0, Z_RADIUS) for _ in range(n)) + tuple(
            ContourSpec(0.0, U_RADIUS) for _ in range(m)
        )
        cp = ContourProduct(contours, ("z",) * n + ("u",) * m)

        def integrand(ZU):
            Z, U = ZU[:n], ZU[n:]
            out = eigenfunction_P(nu, p, t, Z, U)
            for i in range(n):
                out = out * Z[i] ** (-mu[i] - 1) * (1.0 - Z[i]) ** m
            for a in range(m):
                for j in range(p0[a]):
                    out = out / (U[a] - Z[j])
                for j in range(p0[a], n):
                    out = out / (1.0 - Z[j])
            return out

    value, err = product_integrate(integrand, cp, tol=query.tol)
    return _finalize_probability(value), err, "quadrature"


def _poisson_series_entry(a: int, x: int, t: float) -> float:
    """Residue at the origin of (1-z)^a z^(x-1) e^((1/z - 1)t)."""
    if x < 0 and a >= 0 and x + a < 0:
        return 0.0
    total = 0.0
    j = max(0, -x)
    binom = 1.0
    for jj in range(1, j + 1):
        binom *= (a - jj + 1) / jj
    while True:
        term = (-1.0) ** j * binom * t ** (x + j) / math.factorial(x + j)
        total += term
        j += 1
        if a >= 0 and j > a:
            break
        binom *= (a - j + 1) / j
        if x + j > max(t, 1.0) + 20 and abs(term) < 1e-18 * (abs(total) + 1e-300):
            break
        if x + j > 400:
            break
    return math.exp(-t) * total


def schutz_determinant(mu, nu, t: float) -> float:
    """Single-species TASEP Green's function as an n x n determinant.

    Entry (k, i) is the one-dimensional residue integral with winding
    exponent k - i and displacement nu_i - mu_k, evaluated by series.
    """
    mu = [int(x) for x in mu]
    nu = [int(x) for x in nu]
    n = len(mu)
    mat = np.empty((n, n))
    for k in range(n):
        for i in range(n):
            mat[k, i] = _poisson_series_entry((k + 1) - (i + 1), nu[i] - mu[k], t)
    return float(np.linalg.det(mat))


def schutz_reduction_check(mu_cfg: ParticleConfig, nu_cfg: ParticleConfig, t: float):
    """Compare the full evaluator against the determinant on a single-species
    instance (all type 1 or all type 2).  Returns (green, determinant)."""
    if nu_cfg.m not in (0, nu_cfg.n):
        raise ValidationError("reduction check needs m = 0 or m = n")
    green = two_tasep_green(GreenQuery(mu_cfg, nu_cfg, t))
    det = schutz_determinant(mu_cfg.positions, nu_cfg.positions, t)
    return green, det


def two_tasep_crossing(mu, nu, m: int, t: float, tol: float = 1e-10) -> float:
    """Total-crossing transition probability of the two-species TASEP.

    ``mu`` holds the initial positions with the m type-2 particles first
    (leftmost); ``nu`` the final positions with the type-2 particles last.
    The two determinant blocks couple only through prod (w_j - z_i).
    """
    mu = [int(x) for x in mu]
    nu = [int(x) for x in nu]
    n = len(mu)
    k = n - m
    if any(b <= a for a, b in zip(mu, mu[1:])) or any(
        b <= a for a, b in zip(nu, nu[1:])
    ):
        raise ValidationError("positions must be strictly increasing")
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    contours = tuple(ContourSpec(0.0, Z_RADIUS) for _ in range(m)) + tuple(
        ContourSpec(0.0, W_RADIUS) for _ in range(k)
    )

    def integrand(ZW):
        Z, W = ZW[:m], ZW[m:]
        M = ZW.shape[1]
        out = np.ones(M, dtype=complex)
        for i in range(m):
            out = out * np.exp((1.0 / Z[i] - 1.0) * t) / (1.0 - Z[i]) ** k
        for i in range(k):
            out = out * np.exp((1.0 / W[i] - 1.0) * t)
        for i in range(m):
            for j in range(k):
                out = out * (W[j] - Z[i])
        if m:
            matz = np.empty((M, m, m), dtype=complex)
            for i in range(m):
                for j in range(m):
                    matz[:, i, j] = Z[i] ** (nu[k + j] - mu[i] - 1) * (
                        1.0 - Z[i]
                    ) ** (i - j)
            out = out * np.linalg.det(matz)
        if k:
            matw = np.empty((M, k, k), dtype=complex)
            for i in range(k):
                for j in range(k):
                    matw[:, i, j] = W[i] ** (nu[j] - mu[m + i] - 1) * (
                        1.0 - W[i]
                    ) ** (i - j)
            out = out * np.linalg.det(matw)
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability(value)


def _around_one_radii(q: float, n: int) -> list[float]:
    bounds = [0.25, abs(1.0 - q) / (1.0 + q)]
    if q > 0:
        bounds.append(abs(1.0 - 1.0 / q))
    rmax = 0.9 * min(bounds)
    if rmax <= 0:
        raise ValidationError("no valid contour radius around 1 for this q")
    return _spread_radii(n, 0.7 * rmax, rmax)


def r_asep_transition(mu, nu, q: float, t: float, tol: float = 1e-10) -> float:
    """Rainbow multi-species ASEP transition probability (all colours distinct).

    ``mu`` must be strictly decreasing; ``nu`` strict but unordered.  The
    integrand carries the vertex partition function evaluated at reflected
    arguments; all contours are one small clockwise circle around 1.  At
    q = 0 the partition function degenerates and only fully reversed final
    orders are supported (where the factorized limit applies).
    """
    mu = [int(x) for x in mu]
    nu = [int(x) for x in nu]
    n = len(mu)
    if any(b >= a for a, b in zip(mu, mu[1:])):
        raise ValidationError("mu must be strictly decreasing")
    if len(set(nu)) != n:
        raise ValidationError("nu must have pairwise distinct parts")
    if q == 1:
        raise ValidationError("the symmetric point q = 1 is not supported")
    if q == 0:
        if any(b <= a for a, b in zip(nu, nu[1:])):
            raise ValidationError(
                "q = 0 is supported only for fully reversed final order"
            )
        return rainbow_total_crossing(mu, nu, q, t, tol=tol)
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    radius = min(0.2, abs(q - 1.0) / 3.0)
    contours = tuple(ContourSpec(1.0, radius, orientation=-1) for _ in range(n))
    rq = q**-0.5

    def integrand(Z):
        M = Z.shape[1]
        out = np.ones(M, dtype=complex)
        for i in range(n):
            out = out / Z[i]
            for j in range(i + 1, n):
                out = out * (Z[j] - Z[i]) / (Z[j] - q * Z[i])
        for j in range(n):
            out = out * np.exp(
                (1.0 - q) ** 2 * Z[j] * t / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
            )
            out = out / (1.0 - Z[j])
            out = out * ((1.0 - q * Z[j]) / (1.0 - Z[j])) ** mu[j]
        return out * f_mu(nu, rq / Z, q, rq)

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    value = (-(q**-0.5)) ** sum(nu) * value
    return _finalize_probability(complex(value))


def rainbow_total_crossing(mu, nu, q: float, t: float, tol: float = 1e-10) -> float:
    """Fully factorized total-crossing integral for n distinct colours.

    Requires mu strictly decreasing and nu strictly increasing.  The
    integrand depends on the data only through the differences mu_j - nu_j,
    which realizes the shift-invariance property exactly.
    """
    mu = [int(x) for x in mu]
    nu = [int(x) for x in nu]
    n = len(mu)
    if any(b >= a for a, b in zip(mu, mu[1:])):
        raise ValidationError("mu must be strictly decreasing")
    if any(b <= a for a, b in zip(nu, nu[1:])):
        raise ValidationError("nu must be strictly increasing")
    if q == 1:
        raise ValidationError("the symmetric point q = 1 is not supported")
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    radius = min(0.2, abs(q - 1.0) / 3.0)
    contours = tuple(ContourSpec(1.0, radius, orientation=-1) for _ in range(n))

    def integrand(Z):
        out = np.ones(Z.shape[1], dtype=complex)
        for i in range(n):
            for j in range(i + 1, n):
                out = out * (Z[j] - Z[i]) / (Z[j] - q * Z[i])
        for j in range(n):
            out = out * np.exp(
                (1.0 - q) ** 2 * Z[j] * t / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
            )
            out = out / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
            out = out * ((1.0 - q * Z[j]) / (1.0 - Z[j])) ** (mu[j] - nu[j])
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability((1.0 - q) ** n * value)


def block_crossing(query: CrossingQuery, tol: float = 1e-10) -> float:
    """Total crossing of colour blocks in the multi-species ASEP.

    The integration variables split into blocks matching the signature
    blocks; each block contributes its own symmetrized factor, so variables
    within a block ride on slightly different radii to stay clear of the
    apparent coincident-point poles of the permutation sum.
    """
    mu_vec, lam_vec = query.initial, query.final
    q, t = query.q, query.t
    n = mu_vec.n
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    radii = _around_one_radii(q, n)
    contours = tuple(ContourSpec(1.0, r, orientation=-1) for r in radii)
    sizes = mu_vec.sizes
    offsets = [0]
    for nk in sizes:
        offsets.append(offsets[-1] + nk)

    def integrand(Z):
        out = np.ones(Z.shape[1], dtype=complex)
        for i in range(n):
            for j in range(i + 1, n):
                out = out * (Z[j] - Z[i]) / (Z[j] - q * Z[i])
        for j in range(n):
            out = out * np.exp(
                (1.0 - q) ** 2 * Z[j] * t / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
            )
            out = out / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
        for k, (block_mu, block_lam) in enumerate(zip(mu_vec.blocks, lam_vec.blocks)):
            zb = Z[offsets[k]:offsets[k + 1]]
            out = out * xi_mu(block_mu.parts, zb, q)
            out = out * sfF_lambda(block_lam.parts, zb, q)
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability((1.0 - q) ** n * value)


def tasep_block_crossing(query: CrossingQuery, tol: float = 1e-10) -> float:
    """Block total crossing at q = 0: one determinant per colour block."""
    if query.q != 0:
        raise ValidationError("this evaluator requires q = 0")
    mu_vec, lam_vec = query.initial, query.final
    t = query.t
    n = mu_vec.n
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    radii = _around_one_radii(0.0, n)
    contours = tuple(ContourSpec(1.0, r, orientation=-1) for r in radii)
    sizes = mu_vec.sizes
    offsets = [0]
    for nk in sizes:
        offsets.append(offsets[-1] + nk)

    def integrand(Z):
        M = Z.shape[1]
        out = np.ones(M, dtype=complex)
        for j in range(n):
            out = out * np.exp(Z[j] * t / (1.0 - Z[j]))
        for k in range(len(sizes)):
            for l in range(k + 1, len(sizes)):
                for i in range(offsets[k], offsets[k + 1]):
                    for j in range(offsets[l], offsets[l + 1]):
                        out = out * (Z[j] - Z[i])
        for k, (block_mu, block_lam) in enumerate(zip(mu_vec.blocks, lam_vec.blocks)):
            nk = sizes[k]
            Nk = offsets[k]
            zb = Z[offsets[k]:offsets[k + 1]]
            mat = np.empty((M, nk, nk), dtype=complex)
            for i in range(nk):
                for j in range(nk):
                    mat[:, i, j] = zb[j] ** ((i + 1) - (j + 1) - Nk) * (
                        1.0 - zb[j]
                    ) ** (block_lam.parts[i] - block_mu.parts[j] - 1)
            out = out * np.linalg.det(mat)
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability(value)


def single_species_crossing(mu, lam, q: float, t: float, tol: float = 1e-10) -> float:
    """Single-species ASEP transition between position sets (one block)."""
    mu = [int(x) for x in mu]
    lam = [int(x) for x in lam]
    n = len(mu)
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    base = _around_one_radii(q, n)
    radii = [0.96 * r for r in base]
    contours = tuple(ContourSpec(1.0, r, orientation=-1) for r in radii)

    def integrand(Z):
        out = np.ones(Z.shape[1], dtype=complex)
        for i in range(n):
            for j in range(i + 1, n):
                out = out * (Z[j] - Z[i]) / (Z[j] - q * Z[i])
        for j in range(n):
            out = out * np.exp(
                (1.0 - q) ** 2 * Z[j] * t / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
            )
            out = out / ((1.0 - Z[j]) * (1.0 - q * Z[j]))
        out = out * xi_mu(mu, Z, q) * sfF_lambda(lam, Z, q)
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability((1.0 - q) ** n * value)


def cumulative_crossing_step(mu, m: int, s1: int, s2: int, t: float,
                             tol: float = 1e-10) -> float:
    """Cumulative crossing probability for deterministic initial positions.

    ``mu`` is the full sorted initial vector with the m type-2 particles
    first.  Returns 0 when the wall gap cannot accommodate the type-1 block.
    """
    mu = [int(x) for x in mu]
    n = len(mu)
    k = n - m
    if any(b <= a for a, b in zip(mu, mu[1:])):
        raise ValidationError("mu must be strictly increasing")
    if s2 - s1 < k:
        return 0.0
    if n > DIMENSION_BUDGET:
        raise ResourceLimitError(
            f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
        )
    contours = tuple(ContourSpec(0.0, Z_RADIUS) for _ in range(m)) + tuple(
        ContourSpec(0.0, W_RADIUS) for _ in range(k)
    )

    def integrand(ZW):
        Z, W = ZW[:m], ZW[m:]
        M = ZW.shape[1]
        out = np.ones(M, dtype=complex)
        for i in range(m):
            for j in range(k):
                out = out * (W[j] - Z[i])
        for i in range(m):
            for j in range(i + 1, m):
                out = out * (Z[j] - Z[i])
        for i in range(m):
            out = out * np.exp((1.0 / Z[i] - 1.0) * t)
            out = out * Z[i] ** (s2 - 1 - mu[i]) / (1.0 - Z[i]) ** (n - (i + 1) + 1)
        for i in range(k):
            out = out * np.exp((1.0 / W[i] - 1.0) * t)
            out = out * W[i] ** (s1 - 1 - mu[i + m]) / (1.0 - W[i]) ** (
                k - (i + 1) + 1
            )
        if k:
            mat = np.empty((M, k, k), dtype=complex)
            for i in range(k):
                for j in range(k):
                    mat[:, i, j] = W[i] ** j - W[i] ** (s2 - s1)
            out = out * np.linalg.det(mat)
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability(value)


def _det_expansion_poly(nvars: int, entry_powers) -> dict:
    """Expand det(x_i^{a(i,j)} - x_i^{b(i,j)}) into a sparse exponent map.

    ``entry_powers(i, j)`` returns the pair (a, b) of exponents of variable
    x_i in entry (i, j).
    """
    terms: dict[tuple[int, ...], complex] = {}
    for perm, sgn in signed_permutations(nvars):
        partial = {(0,) * nvars: complex(sgn)}
        for i in range(nvars):
            a, b = entry_powers(i, perm[i])
            new: dict[tuple[int, ...], complex] = {}
            for expo, cf in partial.items():
                for power, sign in ((a, 1.0), (b, -1.0)):
                    key = tuple(
                        e + power if idx == i else e for idx, e in enumerate(expo)
                    )
                    new[key] = new.get(key, 0.0) + cf * sign
            partial = new
        for key, cf in partial.items():
            terms[key] = terms.get(key, 0.0) + cf
    return {k: v for k, v in terms.items() if v != 0}


def _laurent_multi_integral(var_specs, poly_terms) -> complex:
    """Sum of per-variable residue products over the monomials of a polynomial.

    ``var_specs`` is a list of (exp_coeff, base_power, pole_factors,
    residue_points) per variable; each monomial shifts the variable's power.
    """
    cache: dict[tuple[int, int], complex] = {}

    def one_dim(vi: int, extra: int) -> complex:
        key = (vi, extra)
        if key not in cache:
            coeff, base, factors, points = var_specs[vi]
            desc = RationalExpDescriptor(
                exp_coeff=coeff,
                factors=tuple(factors) + ((0.0 + 0.0j, base + extra),),
                prefactor=np.exp(-coeff),
            )
            cache[key] = residue_sum(desc, points)
        return cache[key]

    total = 0.0 + 0.0j
    for expo, cf in poly_terms.items():
        term = complex(cf)
        for vi, e in enumerate(expo):
            term *= one_dim(vi, e)
        total += term
    return total


def cumulative_crossing_bernoulli(
    query: WallQuery, form: str = "inverted", tol: float = 1e-10
) -> float:
    """Cumulative crossing with density-rho initial data for type 2.

    ``form='direct'`` integrates around the origin by quadrature;
    ``form='inverted'`` works in reflected variables where the integrand is
    rational-times-exponential and all residues are extracted exactly.  Both
    forms agree to quadrature accuracy.
    """
    if form not in ("direct", "inverted"):
        raise ValidationError("form must be 'direct' or 'inverted'")
    if not query.feasible:
        return 0.0
    n, m, rho, t = query.n, query.m, query.rho, query.t
    s1, s2 = query.s1, query.s2
    k = n - m
    if form == "direct":
        if n > DIMENSION_BUDGET:
            raise ResourceLimitError(
                f"{n} integration variables exceed the budget {DIMENSION_BUDGET}"
            )
        contours = tuple(ContourSpec(0.0, Z_RADIUS) for _ in range(m)) + tuple(
            ContourSpec(0.0, W_RADIUS) for _ in range(k)
        )

        def integrand(ZW):
            Z, W = ZW[:m], ZW[m:]
            M = ZW.shape[1]
            out = np.ones(M, dtype=complex)
            for i in range(m):
                for j in range(k):
                    out = out * (W[j] - Z[i])
            for i in range(m):
                for j in range(m):
                    if i != j:
                        out = out * (Z[j] - Z[i])
            for i in range(m):
                out = out * np.exp((1.0 / Z[i] - 1.0) * t)
                out = out * Z[i] ** s2 / (
                    (1.0 - Z[i]) ** n * (1.0 - (1.0 - rho) * Z[i])
                )
            for i in range(k):
                out = out * np.exp((1.0 / W[i] - 1.0) * t)
                out = out * W[i] ** (s1 - (i + 1)) / (1.0 - W[i]) ** (k - (i + 1) + 1)
            if k:
                mat = np.empty((M, k, k), dtype=complex)
                for i in range(k):
                    for j in range(k):
                        mat[:, i, j] = W[i] ** j - W[i] ** (s2 - s1)
                out = out * np.linalg.det(mat)
            return out

        value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
        value = rho**m / math.factorial(m) * value
        return _finalize_probability(complex(value))
    # inverted form: variables z_i (m of them) then w_i (k of them)
    poly = MultivariatePolynomial(n)
    for i in range(m):
        for j in range(m):
            if i != j:
                poly.multiply_linear(0.0, {j: 1.0, i: -1.0})
    for i in range(m):
        for j in range(k):
            poly.multiply_linear(0.0, {i: 1.0, m + j: -1.0})
    if k:
        beta = k + s1 - s2 - 1
        det_terms = _det_expansion_poly(k, lambda i, j: (k - (j + 1), beta))
        lifted = {
            (0,) * m + expo: cf for expo, cf in det_terms.items()
        }
        poly.multiply_terms(lifted)
    var_specs = []
    for i in range(m):
        var_specs.append(
            (t, -s2 - m + 1, ((1.0 + 0.0j, -n), (1.0 - rho + 0.0j, -1)),
             (0.0, 1.0, 1.0 - rho))
        )
    for i in range(k):
        var_specs.append(
            (t, -s1 - m, ((1.0 + 0.0j, -(k - (i + 1) + 1)),), (0.0, 1.0))
        )
    value = _laurent_multi_integral(var_specs, dict(poly.items()))
    value = rho**m / math.factorial(m) * value
    return _finalize_probability(complex(value))


def cumulative_crossing_one_wall(
    query: WallQuery, form: str = "collapsed", tol: float = 1e-10
) -> float:
    """Cumulative crossing when the lower wall is irrelevant (s1 <= -m).

    ``form='collapsed'`` evaluates the (m+1)-fold residue integral in which
    the type-1 integrals have collapsed to a single variable;
    ``form='cauchy_binet'`` evaluates the equivalent determinant of
    one-dimensional integrals.  Both carry the overall sign (-1)^(m+1)
    that the successive residue evaluation of the type-1 block produces;
    the constant is pinned against the general two-wall form for m up to 4.
    """
    if query.s1 > -query.m:
        raise ValidationError(
            "one-wall evaluator requires s1 <= -m; use the general form"
        )
    if form not in ("collapsed", "cauchy_binet"):
        raise ValidationError("form must be 'collapsed' or 'cauchy_binet'")
    if not query.feasible:
        return 0.0
    n, m, rho, t = query.n, query.m, query.rho, query.t
    s2 = query.s2
    if form == "collapsed":
        poly = MultivariatePolynomial(m + 1)
        for i in range(m):
            for j in range(m):
                if i != j:
                    poly.multiply_linear(0.0, {j: 1.0, i: -1.0})
        for i in range(m):
            poly.multiply_linear(0.0, {m: 1.0, i: -1.0})
        var_specs = []
        for i in range(m):
            var_specs.append(
                (t, -s2 - m + 1, ((1.0 + 0.0j, -(m + 1)), (1.0 - rho + 0.0j, -1)),
                 (0.0, 1.0, 1.0 - rho))
            )
        var_specs.append((t, n - 2 * m - s2 - 1, ((1.0 + 0.0j, -1),), (0.0,)))
        value = _laurent_multi_integral(var_specs, dict(poly.items()))
        value = (-1.0) ** (m + 1) * rho**m / math.factorial(m) * value
        return _finalize_probability(complex(value))
    # Cauchy-Binet form: det of pairwise z-integrals, then one w-integral
    def z_entry(power_shift: int) -> complex:
        desc = RationalExpDescriptor(
            exp_coeff=t,
            factors=(
                (1.0 + 0.0j, -(m + 1)),
                (1.0 - rho + 0.0j, -1),
                (0.0 + 0.0j, power_shift - s2 - m - 1),
            ),
            prefactor=math.exp(-t),
        )
        return residue_sum(desc, (0.0, 1.0, 1.0 - rho))

    a_mat = np.empty((m, m), dtype=complex)
    b_mat = np.empty((m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            a_mat[i, j] = z_entry((i + 1) + (j + 1))
            b_mat[i, j] = z_entry((i + 1) + (j + 1) + 1)
    # det(w*A - B) expanded in powers of w
    w_poly: dict[int, complex] = {}
    for perm, sgn in signed_permutations(m):
        partial = {0: complex(sgn)}
        for i in range(m):
            new: dict[int, complex] = {}
            for deg, cf in partial.items():
                new[deg + 1] = new.get(deg + 1, 0.0) + cf * a_mat[i, perm[i]]
                new[deg] = new.get(deg, 0.0) - cf * b_mat[i, perm[i]]
            partial = new
        for deg, cf in partial.items():
            w_poly[deg] = w_poly.get(deg, 0.0) + cf
    total = 0.0 + 0.0j
    for deg, cf in w_poly.items():
        desc = RationalExpDescriptor(
            exp_coeff=t,
            factors=((1.0 + 0.0j, -1), (0.0 + 0.0j, n - 2 * m - s2 - 1 + deg)),
            prefactor=math.exp(-t),
        )
        total += cf * laurent_residue(desc, 0.0)
    return _finalize_probability(complex((-1.0) ** (m + 1) * rho**m * total))


def gamma_wall(n: int, s: int, t: float, method: str = "laurent",
               tol: float = 1e-10) -> float:
    """Probability that all n step-start particles (at 1..n) pass the wall s.

    The symmetrized n-fold integral is evaluated exactly by residues at
    {0, 1} after expanding the squared Vandermonde coupling, or by circle
    quadrature for cross-checking.
    """
    if s <= n:
        raise ValidationError("gamma_wall requires s > n")
    if t == 0:
        return 0.0
    if method == "laurent":
        poly = vandermonde_squared_poly(n)
        var_specs = [(t, 1 - s, ((1.0 + 0.0j, -n),), (0.0, 1.0)) for _ in range(n)]
        value = _laurent_multi_integral(var_specs, dict(poly.items()))
        value = value / math.factorial(n)
        return _finalize_probability(complex(value))
    if method != "quadrature":
        raise ValidationError("method must be 'laurent' or 'quadrature'")
    contours = tuple(ContourSpec(0.5, 1.2) for _ in range(n))

    def integrand(Z):
        out = np.ones(Z.shape[1], dtype=complex)
        for i in range(n):
            for j in range(n):
                if i != j:
                    out = out * (Z[j] - Z[i])
        for i in range(n):
            out = out * np.exp((Z[i] - 1.0) * t) * Z[i] ** (1 - s) / (Z[i] - 1.0) ** n
        return out

    value, _ = product_integrate(integrand, ContourProduct(contours), tol=tol)
    return _finalize_probability(value / math.factorial(n))
