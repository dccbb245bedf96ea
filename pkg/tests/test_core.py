import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asepcross.core import (
    BlockSignatureVector,
    IntegerComposition,
    ModelParams,
    ParticleConfig,
    ResourceLimitError,
    StrictSignature,
    ValidationError,
    crossing_configs,
    enumerate_permutations,
    inversions,
    permutation_sign,
    validate_standard_regime,
)
from conftest import make_blocks


class TestParticleConfig:
    def test_basic(self):
        cfg = ParticleConfig((0, 1, 5), (1, 2, 1))
        assert cfg.n == 3 and cfg.m == 1
        assert cfg.type2_indices == (2,)

    def test_from_two_species(self):
        cfg = ParticleConfig.from_two_species((0, 1, 2), (1, 3))
        assert cfg.species == (2, 1, 2)
        assert cfg.type2_indices == (1, 3)

    def test_rejects_unsorted(self):
        with pytest.raises(ValidationError):
            ParticleConfig((1, 0), (1, 1))
        with pytest.raises(ValidationError):
            ParticleConfig((0, 0), (1, 1))

    def test_rejects_bad_species(self):
        with pytest.raises(ValidationError):
            ParticleConfig((0, 1), (0, 1))

    def test_rejects_out_of_range_indices(self):
        with pytest.raises(ValidationError):
            ParticleConfig.from_two_species((0, 1), (3,))

    def test_int64_guard(self):
        with pytest.raises(ValidationError):
            ParticleConfig((2**63,), (1,))
        cfg = ParticleConfig((2**62,), (1,))
        with pytest.raises(ValidationError):
            cfg.shifted(2**62)

    @given(st.lists(st.integers(-50, 50), min_size=1, max_size=6, unique=True))
    @settings(max_examples=60, deadline=None)
    def test_sorted_positions_accepted(self, xs):
        cfg = ParticleConfig(tuple(sorted(xs)), (1,) * len(xs))
        assert cfg.n == len(xs)

    @given(st.lists(st.integers(-50, 50), min_size=2, max_size=6))
    @settings(max_examples=60, deadline=None)
    def test_duplicate_positions_rejected(self, xs):
        xs = sorted(xs) + [sorted(xs)[-1]]
        with pytest.raises(ValidationError):
            ParticleConfig(tuple(xs), (1,) * len(xs))


class TestSignatures:
    def test_strict_signature(self):
        sig = StrictSignature((3, 1, -2))
        assert len(sig) == 3
        with pytest.raises(ValidationError):
            StrictSignature((3, 3))
        with pytest.raises(ValidationError):
            StrictSignature((1, 2))

    def test_block_vector_orientations(self):
        make_blocks([[5, 3], [1, 0]], "initial")
        make_blocks([[0, -1], [4, 2]], "final")
        with pytest.raises(ValidationError):
            make_blocks([[1, 0], [5, 3]], "initial")
        with pytest.raises(ValidationError):
            make_blocks([[5, 3], [1, 0]], "final")
        with pytest.raises(ValidationError):
            make_blocks([[1, 0]], "sideways")

    def test_roundtrip_with_particle_config(self):
        vec = make_blocks([[5, 3], [1, 0]], "initial")
        cfg = vec.to_particle_config()
        assert cfg.positions == (0, 1, 3, 5)
        assert cfg.species == (2, 2, 1, 1)
        back = BlockSignatureVector.from_particle_config(cfg, "initial")
        assert back.blocks == vec.blocks

    def test_integer_composition_strict_flag(self):
        IntegerComposition((2, 2, 1))
        with pytest.raises(ValidationError):
            IntegerComposition((2, 2, 1), strict=True)


class TestModelParams:
    def test_validation(self):
        ModelParams(q=0.5, rho=0.3, t=2.0, ell=3, epsilon=0.1)
        with pytest.raises(ValidationError):
            ModelParams(q=-1.0)
        with pytest.raises(ValidationError):
            ModelParams(rho=0.0)
        with pytest.raises(ValidationError):
            ModelParams(t=-0.5)
        with pytest.raises(ValidationError):
            ModelParams(epsilon=0.0)


class TestStandardRegime:
    def test_identity_configuration(self):
        mu = ParticleConfig.from_two_species((0, 1), (1,))
        assert validate_standard_regime(mu, mu) is True

    def test_position_violation(self):
        mu = ParticleConfig.from_two_species((0, 1), (1,))
        nu = ParticleConfig.from_two_species((-1, 1), (1,))
        assert validate_standard_regime(mu, nu) is False

    def test_componentwise(self):
        mu = ParticleConfig.from_two_species((0, 1, 2), (1,))
        nu = ParticleConfig.from_two_species((1, 2, 5), (2,))
        assert validate_standard_regime(mu, nu) is True

    def test_dimension_mismatch(self):
        mu = ParticleConfig.from_two_species((0, 1), (1,))
        nu = ParticleConfig.from_two_species((0, 1, 2), (1,))
        with pytest.raises(ValidationError):
            validate_standard_regime(mu, nu)


def _sign_by_cycles(perm):
    seen = [False] * len(perm)
    cycles = 0
    for i in range(len(perm)):
        if seen[i]:
            continue
        cycles += 1
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
    return -1 if (len(perm) - cycles) % 2 else 1


class TestPermutations:
    def test_small_cases(self):
        assert list(enumerate_permutations(1)) == [((0,), 1)]
        two = dict(enumerate_permutations(2))
        assert two == {(0, 1): 1, (1, 0): -1}
        three = list(enumerate_permutations(3))
        assert len(three) == 6
        assert sum(sgn for _, sgn in three) == 0

    @pytest.mark.parametrize("N", range(1, 7))
    def test_counts_and_signs(self, N):
        items = list(enumerate_permutations(N))
        assert len(items) == math.factorial(N)
        assert len({p for p, _ in items}) == math.factorial(N)
        for perm, sgn in items:
            assert sgn == _sign_by_cycles(perm)

    def test_cap_error_names_cap(self):
        with pytest.raises(ResourceLimitError, match="cap 9"):
            list(enumerate_permutations(10))
        assert permutation_sign((1, 0, 2)) == -1

    def test_inversions(self):
        assert inversions((1, 3, 2)) == 2
        assert inversions((3, 2, 1)) == 0


class TestCrossingPredicate:
    def test_two_species(self):
        vec = make_blocks([[0], [-1]], "initial")
        pred = crossing_configs(vec)
        crossed = ParticleConfig((3, 5), (1, 2))
        assert pred(crossed) is True
        uncrossed = ParticleConfig((3, 5), (2, 1))
        assert pred(uncrossed) is False

    def test_single_block_always_true(self):
        vec = make_blocks([[2, 0]], "initial")
        pred = crossing_configs(vec)
        assert pred(ParticleConfig((4, 9), (1, 1))) is True

    def test_requires_initial_orientation(self):
        vec = make_blocks([[0], [3]], "final")
        with pytest.raises(ValidationError):
            crossing_configs(vec)
