"""Domain types and combinatorial utilities shared by all evaluators.

Particle configurations live on the integer lattice with at most one
particle per site.  Each particle carries a colour (species) label in
``{1, ..., r}``; for the two-species process the canonical encoding is a
sorted position vector together with the sorted set of 1-based indices of
the type-2 particles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

FACTORIAL_CAP = 9
INT64_MAX = 2**63 - 1


class ValidationError(ValueError):
    """Input violates a documented precondition or type invariant."""


class ConfigurationError(ValidationError):
    """Parameters are singular or no admissible contour setup exists."""


class AccuracyError(RuntimeError):
    """A numerical result failed to reach its requested tolerance."""


class ResourceLimitError(RuntimeError):
    """A configured cap (factorial, state-space, node budget) was exceeded."""


def _check_int64(values):
    for v in values:
        if abs(int(v)) > INT64_MAX:
            raise ValidationError(f"position {v} exceeds the 64-bit integer range")


@dataclass(frozen=True)
class ParticleConfig:
    """State of the exclusion process: sorted positions plus colour labels.

    ``positions`` must be strictly increasing; ``species[i]`` is the colour
    of the particle at ``positions[i]``.  For a two-species system the
    type-2 index set ``p`` (1-based, sorted) is available as
    :attr:`type2_indices`.
    """

    positions: tuple[int, ...]
    species: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(int(x) for x in self.positions)
        spec = tuple(int(c) for c in self.species)
        if len(pos) != len(spec):
            raise ValidationError("positions and species must have equal length")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValidationError("positions must be strictly increasing")
        if any(c < 1 for c in spec):
            raise ValidationError("species labels must be >= 1")
        _check_int64(pos)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "species", spec)

    @classmethod
    def from_two_species(cls, positions, type2_indices=()):
        """Build a config from positions and the 1-based type-2 index set."""
        positions = tuple(int(x) for x in positions)
        p = tuple(int(i) for i in type2_indices)
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValidationError("type-2 indices must be strictly increasing")
        if p and (p[0] < 1 or p[-1] > len(positions)):
            raise ValidationError("type-2 indices must lie in {1, ..., n}")
        species = tuple(2 if i + 1 in p else 1 for i in range(len(positions)))
        return cls(positions, species)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def m(self) -> int:
        """Number of type-2 particles (two-species view)."""
        return sum(1 for c in self.species if c == 2)

    @property
    def type2_indices(self) -> tuple[int, ...]:
        """Sorted 1-based indices of type-2 particles; requires r <= 2."""
        if any(c > 2 for c in self.species):
            raise ValidationError("type2_indices is only defined for r <= 2")
        return tuple(i + 1 for i, c in enumerate(self.species) if c == 2)

    def shifted(self, delta: int) -> "ParticleConfig":
        _check_int64(x + delta for x in self.positions)
        return ParticleConfig(tuple(x + delta for x in self.positions), self.species)


@dataclass(frozen=True)
class StrictSignature:
    """Strictly decreasing integer vector; parts may be negative."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        if any(b >= a for a, b in zip(parts, parts[1:])):
            raise ValidationError("signature parts must be strictly decreasing")
        _check_int64(parts)
        object.__setattr__(self, "parts", parts)

    def __len__(self):
        return len(self.parts)


@dataclass(frozen=True)
class BlockSignatureVector:
    """Ordered blocks of strict signatures describing an r-species state.

    ``orientation='initial'`` requires every part of block i to exceed every
    part of block j for i < j (block 1 is rightmost); ``'final'`` requires
    the reverse (block 1 is leftmost).  All parts are pairwise distinct.
    """

    blocks: tuple[StrictSignature, ...]
    orientation: str = "initial"

    def __post_init__(self):
        blocks = tuple(
            b if isinstance(b, StrictSignature) else StrictSignature(tuple(b))
            for b in self.blocks
        )
        if not blocks:
            raise ValidationError("at least one block is required")
        if self.orientation not in ("initial", "final"):
            raise ValidationError("orientation must be 'initial' or 'final'")
        for a, b in zip(blocks, blocks[1:]):
            if self.orientation == "initial":
                if min(a.parts) <= max(b.parts):
                    raise ValidationError(
                        "initial orientation requires strictly decreasing blocks"
                    )
            else:
                if max(a.parts) >= min(b.parts):
                    raise ValidationError(
                        "final orientation requires strictly increasing blocks"
                    )
        object.__setattr__(self, "blocks", blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def r(self) -> int:
        return len(self.blocks)

    def to_particle_config(self) -> ParticleConfig:
        """Flatten to a ParticleConfig with species = block index (1-based)."""
        pairs = []
        for k, block in enumerate(self.blocks, start=1):
            pairs.extend((pos, k) for pos in block.parts)
        pairs.sort()
        return ParticleConfig(
            tuple(p for p, _ in pairs), tuple(c for _, c in pairs)
        )

    @classmethod
    def from_particle_config(cls, config: ParticleConfig, orientation: str):
        """Group a block-ordered configuration into a signature vector."""
        r = max(config.species)
        blocks = []
        for k in range(1, r + 1):
            parts = sorted(
                (pos for pos, c in zip(config.positions, config.species) if c == k),
                reverse=True,
            )
            if not parts:
                raise ValidationError(f"colour {k} has no particles")
            blocks.append(StrictSignature(tuple(parts)))
        return cls(tuple(blocks), orientation)


@dataclass(frozen=True)
class IntegerComposition:
    """Integer vector with no ordering constraint; ``strict`` forbids ties."""

    parts: tuple[int, ...]
    strict: bool = False

    def __post_init__(self):
        parts = tuple(int(x) for x in self.parts)
        if self.strict and len(set(parts)) != len(parts):
            raise ValidationError("strict composition has a repeated part")
        _check_int64(parts)
        object.__setattr__(self, "parts", parts)

    def __len__(self):
        return len(self.parts)


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: backhop rate q, spin s, density rho, time horizon."""

    q: float = 0.0
    s: complex = 0.0
    rho: float = 1.0
    t: float = 0.0
    ell: int = 0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.q < 0:
            raise ValidationError("q must be >= 0")
        if self.t < 0:
            raise ValidationError("t must be >= 0")
        if not 0 < self.rho <= 1:
            raise ValidationError("rho must lie in (0, 1]")
        if self.ell < 0:
            raise ValidationError("ell must be >= 0")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be > 0")


@dataclass(frozen=True)
class ComplexPoint:
    re: float
    im: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValidationError("complex point components must be finite")

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


def validate_standard_regime(mu: ParticleConfig, nu: ParticleConfig) -> bool:
    """True iff nu dominates mu componentwise in positions and type indices."""
    if mu.n != nu.n or mu.m != nu.m:
        raise ValidationError("configurations must have equal n and m")
    if any(b < a for a, b in zip(mu.positions, nu.positions)):
        return False
    return all(b >= a for a, b in zip(mu.type2_indices, nu.type2_indices))


def permutation_sign(perm) -> int:
    """Sign of a permutation given as a tuple of 0-based images."""
    inv = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                inv += 1
    return -1 if inv % 2 else 1


def enumerate_permutations(N: int, cap: int = FACTORIAL_CAP):
    """Yield all permutations of {0, .., N-1} with their signs.

    Raises ResourceLimitError when N exceeds the factorial cap, which guards
    every permutation-sum evaluator against accidental blowups.
    """
    if N < 0:
        raise ValidationError("N must be nonnegative")
    if N > cap:
        raise ResourceLimitError(
            f"permutation sum of size {N} exceeds the factorial cap {cap}"
        )
    sign = 1
    prev = None
    for perm in itertools.permutations(range(N)):
        if prev is None:
            sign = 1
        else:
            sign = permutation_sign(perm)
        prev = perm
        yield perm, sign


def signed_permutations(N: int, cap: int = FACTORIAL_CAP) -> list[tuple[tuple[int, ...], int]]:
    """Materialized list of (permutation, sign), reused across mesh nodes."""
    return list(enumerate_permutations(N, cap))


def inversions(mu) -> int:
    """Number of pairs i < j with mu_i < mu_j (direct double loop)."""
    mu = list(mu)
    return sum(
        1
        for i in range(len(mu))
        for j in range(i + 1, len(mu))
        if mu[i] < mu[j]
    )


def crossing_configs(mu_vec: BlockSignatureVector):
    """Predicate selecting final states whose block order is fully reversed.

    For an initial-oriented block vector the returned predicate accepts a
    ParticleConfig exactly when, for every pair of colours i < j, all
    particles of colour i sit strictly left of all particles of colour j.
    """
    if mu_vec.orientation != "initial":
        raise ValidationError("crossing predicate expects an initial-oriented vector")
    sizes = mu_vec.sizes

    def predicate(config: ParticleConfig) -> bool:
        if config.n != mu_vec.n:
            return False
        counts = [0] * (mu_vec.r + 1)
        for c in config.species:
            if c > mu_vec.r:
                return False
            counts[c] += 1
        if tuple(counts[1:]) != sizes:
            return False
        # species along increasing positions must read 1..1 2..2 ... r..r
        expected = [k for k, nk in enumerate(sizes, start=1) for _ in range(nk)]
        return list(config.species) == expected

    return predicate
