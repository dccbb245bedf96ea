"""Runnable numerical checks of the algebraic mechanics behind the formulas.

Each check samples random spectral points on annuli that keep a safety
margin from every declared pole locus, evaluates both sides of one
identity, and reports the worst relative error (denominator max(1, |rhs|)).
The collection doubles as a self-test suite reachable from the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ParticleConfig, ValidationError, signed_permutations
from .formulas import GreenQuery, eigenfunction_P, two_tasep_green
from .quadrature import ContourSpec, circle_integrate

POLE_MARGIN = 0.05


@dataclass(frozen=True)
class IdentityReport:
    name: str
    samples: int
    max_rel_err: float
    threshold: float = 1e-10
    details: str = ""

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.threshold


def _rel_err(lhs, rhs) -> float:
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


def _sample_points(rng, count, lo=0.25, hi=0.9, avoid=(1.0,)):
    """Random complex points on an annulus, min separation from poles/each other."""
    pts = []
    while len(pts) < count:
        r = rng.uniform(lo, hi)
        th = rng.uniform(0, 2 * math.pi)
        z = r * math.cos(th) + 1j * r * math.sin(th)
        if any(abs(z - a) < POLE_MARGIN for a in avoid):
            continue
        if any(abs(z - w) < POLE_MARGIN for w in pts):
            continue
        pts.append(z)
    return np.array(pts)


def check_free_evolution(nu, p, t, z, u, h=1e-3) -> IdentityReport:
    """Central-difference time derivative against the lattice generator action.

    Requires well-separated coordinates; reports the error at step h and
    confirms second-order decay at h/2.
    """
    nu = [int(x) for x in nu]
    if any(b - a < 2 for a, b in zip(nu, nu[1:])):
        raise ValidationError("free evolution check needs nu_{i+1} - nu_i >= 2")
    n = len(nu)
    rhs = -n * eigenfunction_P(nu, p, t, z, u)
    for i in range(n):
        shifted = list(nu)
        shifted[i] -= 1
        rhs = rhs + eigenfunction_P(shifted, p, t, z, u)
    resids = []
    errs = []
    for step in (h, h / 2):
        lhs = (
            eigenfunction_P(nu, p, t + step, z, u)
            - eigenfunction_P(nu, p, t - step, z, u)
        ) / (2 * step)
        resids.append(lhs - rhs)
        errs.append(_rel_err(lhs, rhs))
    # second-order scheme: Richardson extrapolation cancels the O(h^2) term,
    # so a surviving residual signals a genuine identity violation
    extrapolated = (4.0 * resids[1] - resids[0]) / 3.0
    err = float(np.max(np.abs(extrapolated)) / max(1.0, np.max(np.abs(rhs))))
    order_ok = errs[1] < 0.4 * errs[0] or errs[0] < 1e-11
    return IdentityReport(
        "free_evolution",
        1,
        err if order_ok else float("inf"),
        threshold=1e-8,
        details=f"err(h)={errs[0]:.3e} err(h/2)={errs[1]:.3e}",
    )


def check_boundary_conditions(nu, l, p, z, u, case=None) -> IdentityReport:
    """One of the three contact relations at a coordinate collision.

    ``nu`` must satisfy nu[l] == nu[l-1] (1-based l selects the pair); the
    case is inferred from the membership pattern of l and l+1 in p, and a
    ``case`` argument (1, 2 or 3) that contradicts the pattern is rejected.
    """
    nu = [int(x) for x in nu]
    p = tuple(int(x) for x in p)
    if nu[l] != nu[l - 1]:
        raise ValidationError("boundary check needs nu_{l+1} == nu_l")
    in_l = l in p
    in_l1 = (l + 1) in p
    if case is not None:
        pattern = 1 if (in_l and not in_l1) else 2 if (not in_l and in_l1) else 3
        if case != pattern:
            raise ValidationError(
                f"requested case {case} does not match the membership pattern"
            )
    base = eigenfunction_P(nu, p, 0.3, z, u)
    bumped = list(nu)
    bumped[l] += 1
    if in_l and not in_l1:
        case = "first"
        resid = base
        scale = 1.0
    elif not in_l and in_l1:
        case = "second"
        p_swapped = tuple(sorted(set(p) - {l + 1} | {l}))
        resid = (
            base
            - eigenfunction_P(bumped, p_swapped, 0.3, z, u)
            - eigenfunction_P(bumped, p, 0.3, z, u)
        )
        scale = max(1.0, float(np.max(np.abs(base))))
    else:
        case = "third"
        resid = base - eigenfunction_P(bumped, p, 0.3, z, u)
        scale = max(1.0, float(np.max(np.abs(base))))
    err = float(np.max(np.abs(resid))) / scale
    return IdentityReport(f"boundary_{case}", 1, err, threshold=1e-12)


def check_u_factorization(z, u, perm) -> IdentityReport:
    """Factorized form of the symmetrized u-sum when type 2 ends rightmost."""
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n, m = len(z), len(u)
    p = [n - m + j for j in range(1, m + 1)]
    zp = z[list(perm)]
    lhs = 0.0 + 0.0j
    for sperm, ssgn in signed_permutations(m):
        term = complex(ssgn)
        for i in range(m):
            term *= ((1 - u[i]) / (1 - u[sperm[i]])) ** (i + 1)
            for j in range(p[i] - 1):
                term *= u[sperm[i]] - zp[j]
        lhs += term
    rhs = 1.0 + 0.0j
    for i in range(m):
        for j in range(n - m):
            rhs *= u[i] - zp[j]
    for i in range(m):
        for j in range(i + 1, m):
            rhs *= u[i] - u[j]
    for i in range(m):
        rhs /= (1 - u[i]) ** (m - (i + 1))
    for i in range(1, m):
        rhs *= (zp[n - m + i - 1] - 1) ** (m - i)
    return IdentityReport("u_factorization", 1, _rel_err(lhs, rhs), threshold=1e-10)


def _u_sum_with_poles(p, z, perm, u_values, substituted=0, sigma_terms=None):
    """Symmetrized u-part of the transition integrand at fixed z and perm.

    ``u_values`` is an (m, M) array.  The first ``substituted`` variables
    are taken to sit at their residue points u_i = z_i, so their consumed
    simple-pole factor is omitted.  ``sigma_terms`` restricts the
    permutation sum for negative controls.
    """
    z = np.asarray(z, dtype=complex)
    m = len(p)
    U = np.asarray(u_values, dtype=complex).reshape(m, -1)
    M = U.shape[1]
    zp = z[list(perm)]
    out = np.zeros(M, dtype=complex)
    perms = signed_permutations(m)
    if sigma_terms is not None:
        perms = [perms[i] for i in sigma_terms]
    for sperm, ssgn in perms:
        term = np.full(M, complex(ssgn))
        for i in range(m):
            term = term * ((1 - U[i]) / (1 - U[sperm[i]])) ** (i + 1)
            for j in range(p[i] - 1):
                term = term * (U[sperm[i]] - zp[j])
        out += term
    for i in range(m):
        for j in range(i + 1):
            if i < substituted and j == i:
                continue
            out = out / (U[i] - z[j])
    return out


def check_removable_poles(n, m, rng, probe_radius=0.02) -> IdentityReport:
    """Contour probes of the symmetrized integrand around each u_k = z_l.

    After taking residues u_i = z_i for i < k, the probe integral around
    z_l (l < k) must vanish once the permutation sum is complete.  The
    negative control keeps a single permutation term on a configuration
    whose numerator does not vanish at the probed pole; its probe residue
    must be visibly nonzero.
    """
    z = _sample_points(rng, n, lo=0.3, hi=0.7)
    p = sorted(rng.choice(np.arange(1, n + 1), size=m, replace=False).tolist())
    perm = tuple(rng.permutation(n).tolist())
    worst = 0.0
    cases = 0

    def probe(pp, zz, pm, k, l, generic, terms=None):
        mm = len(pp)

        def with_probe(w):
            U = np.empty((mm, len(w)), dtype=complex)
            for i in range(mm):
                if i + 1 < k:
                    U[i] = zz[i]
                elif i + 1 == k:
                    U[i] = w
                else:
                    U[i] = generic[i]
            return _u_sum_with_poles(
                pp, zz, pm, U, substituted=k - 1, sigma_terms=terms
            )

        contour = ContourSpec(complex(zz[l - 1]), probe_radius, nodes=64)
        return circle_integrate(with_probe, contour)

    for k in range(2, m + 1):
        for l in range(1, k):
            generic = _sample_points(rng, m, lo=0.75, hi=0.9, avoid=[1.0] + list(z))
            worst = max(worst, abs(probe(p, z, perm, k, l, generic)))
            cases += 1
    # control: p = (1, 2), first slot of perm not colour 1, so the probed
    # pole u_2 = z_1 survives in each single term and only the sum kills it
    ctrl_p = [1, 2]
    ctrl_perm = tuple([1, 0] + list(range(2, n)))
    ctrl_generic = _sample_points(rng, 2, lo=0.75, hi=0.9, avoid=[1.0] + list(z))
    single = probe(ctrl_p, z, ctrl_perm, 2, 1, ctrl_generic, terms=[0])
    control_ok = abs(single) > 1e-8
    details = f"single-term control residue {abs(single):.3e}"
    if not control_ok:
        worst = float("inf")
    return IdentityReport(
        "removable_poles", cases, worst, threshold=1e-10, details=details
    )


def check_nested_geometric(z, s2, truncation=400) -> IdentityReport:
    """Truncated nested geometric sum against its product form."""
    z = np.asarray(z, dtype=complex)
    m = len(z)
    for i in range(m):
        if abs(np.prod(z[i:])) >= 1.0:
            raise ValidationError("nested geometric sum diverges for these z")

    def nested(level, lower):
        # level counts from the innermost (nu_1) outwards
        if level == m:
            return 1.0 + 0.0j
        total = 0.0 + 0.0j
        for v in range(lower, lower + truncation):
            total += z[level] ** v * nested(level + 1, v + 1)
        return total

    lhs = nested(0, s2)
    rhs = 1.0 + 0.0j
    for i in range(m):
        rhs *= z[i] ** (s2 + i) / (1 - np.prod(z[i:]))
    return IdentityReport(
        "nested_geometric", 1, _rel_err(lhs, rhs), threshold=1e-10
    )


def check_symmetrization(z, s2=3, rho=None) -> IdentityReport:
    """Permutation-sum symmetrization identities behind the wall formulas.

    Checks the Vandermonde form, the wall-exponent form, and (when rho is
    given) the density-weighted variant.
    """
    z = np.asarray(z, dtype=complex)
    m = len(z)
    worst = 0.0
    # plain Vandermonde form
    lhs = 0.0 + 0.0j
    for perm, sgn in signed_permutations(m):
        term = complex(sgn)
        for i in range(m):
            zi = z[perm[i]]
            term *= zi**i * (1 - zi) ** (m - i)
            term /= 1 - np.prod(z[[perm[j] for j in range(i, m)]])
        lhs += term
    vand = 1.0 + 0.0j
    for i in range(m):
        for j in range(i + 1, m):
            vand *= z[j] - z[i]
    worst = max(worst, _rel_err(lhs, vand))
    # wall-exponent form
    lhs2 = 0.0 + 0.0j
    for perm, sgn in signed_permutations(m):
        term = complex(sgn)
        for i in range(m):
            zi = z[perm[i]]
            term *= zi ** (s2 + i) / (1 - zi) ** (i + 1)
            term /= 1 - np.prod(z[[perm[j] for j in range(i, m)]])
        lhs2 += term
    rhs2 = vand
    for i in range(m):
        rhs2 *= z[i] ** s2 / (z[i] - 1) ** (m + 1)
    worst = max(worst, _rel_err(lhs2, rhs2))
    if rho is not None:
        lhs3 = 0.0 + 0.0j
        for perm, sgn in signed_permutations(m):
            term = complex(sgn)
            for i in range(m):
                zi = z[perm[i]]
                term *= ((1 - zi) / zi) ** (i + 1)
                term /= 1 - (1 - rho) * np.prod(z[[perm[j] for j in range(i + 1)]])
            lhs3 += term
        rhs3 = 1.0 + 0.0j
        for i in range(m):
            for j in range(i + 1, m):
                rhs3 *= z[i] - z[j]
        for i in range(m):
            rhs3 *= (1 - z[i]) / (z[i] ** m * (1 - (1 - rho) * z[i]))
        worst = max(worst, _rel_err(lhs3, rhs3))
    return IdentityReport("symmetrization", 1, worst, threshold=1e-10)


def check_initial_condition(mu_cfg: ParticleConfig, span=2) -> IdentityReport:
    """Green's function at t = 0 against the Kronecker delta over a window."""
    import itertools

    n, m = mu_cfg.n, mu_cfg.m
    mu = mu_cfg.positions
    worst = 0.0
    count = 0
    lo = [x - 1 for x in mu]
    hi = [x + span for x in mu]
    for pos in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
        if any(b <= a for a, b in zip(pos, pos[1:])):
            continue
        for p in itertools.combinations(range(1, n + 1), m):
            nu_cfg = ParticleConfig.from_two_species(pos, p)
            expected = 1.0 if (pos == mu and p == mu_cfg.type2_indices) else 0.0
            val = two_tasep_green(GreenQuery(mu_cfg, nu_cfg, 0.0, tol=1e-12))
            worst = max(worst, abs(val - expected))
            count += 1
    return IdentityReport("initial_condition", count, worst, threshold=1e-8)


def run_identity_suite(seed: int = 20240601, samples: int = 100) -> list[IdentityReport]:
    """Run every check at default sampling; the machine-checkable proof shadow."""
    rng = np.random.default_rng(seed)
    reports: list[IdentityReport] = []

    worst_free = None
    for _ in range(max(1, samples // 20)):
        z = _sample_points(rng, 3, lo=0.3, hi=0.7)
        u = _sample_points(rng, 1, lo=0.75, hi=0.9)
        rep = check_free_evolution([0, 2, 5], [2], 0.4, z, u)
        if worst_free is None or rep.max_rel_err > worst_free.max_rel_err:
            worst_free = rep
    reports.append(worst_free)

    worst = {}
    for _ in range(samples):
        z = _sample_points(rng, 3, lo=0.3, hi=0.7)
        for l, p in ((1, (1,)), (1, (2,)), (2, (1,)), (1, (1, 2))):
            u = _sample_points(rng, len(p), lo=0.75, hi=0.9)
            nu = [0, 0, 3] if l == 1 else [0, 2, 2]
            rep = check_boundary_conditions(nu, l, p, z, u)
            if rep.name not in worst or rep.max_rel_err > worst[rep.name].max_rel_err:
                worst[rep.name] = rep
    reports.extend(worst.values())

    worst_u = None
    for _ in range(samples):
        n, m = 4, int(rng.integers(1, 4))
        z = _sample_points(rng, n, lo=0.3, hi=0.7)
        u = _sample_points(rng, m, lo=0.75, hi=0.9)
        perm = tuple(rng.permutation(n).tolist())
        rep = check_u_factorization(z, u, perm)
        if worst_u is None or rep.max_rel_err > worst_u.max_rel_err:
            worst_u = rep
    reports.append(worst_u)

    worst_rp = None
    for m in (2, 3):
        rep = check_removable_poles(4, m, rng)
        if worst_rp is None or rep.max_rel_err > worst_rp.max_rel_err:
            worst_rp = rep
    reports.append(worst_rp)

    worst_ng = None
    for _ in range(max(1, samples // 10)):
        m = int(rng.integers(1, 4))
        z = _sample_points(rng, m, lo=0.2, hi=0.65)
        rep = check_nested_geometric(z, int(rng.integers(-2, 4)))
        if worst_ng is None or rep.max_rel_err > worst_ng.max_rel_err:
            worst_ng = rep
    reports.append(worst_ng)

    worst_sym = None
    for _ in range(samples):
        m = int(rng.integers(1, 4))
        z = _sample_points(rng, m, lo=0.25, hi=0.8)
        rep = check_symmetrization(z, s2=int(rng.integers(0, 5)), rho=float(rng.uniform(0.2, 0.9)))
        if worst_sym is None or rep.max_rel_err > worst_sym.max_rel_err:
            worst_sym = rep
    reports.append(worst_sym)

    reports.append(
        check_initial_condition(ParticleConfig.from_two_species((0, 1), (1,)))
    )
    reports.append(
        check_initial_condition(ParticleConfig.from_two_species((-1, 1), (2,)))
    )
    return reports
