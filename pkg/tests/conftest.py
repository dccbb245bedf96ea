import numpy as np
import pytest

from asepcross.core import BlockSignatureVector, StrictSignature


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_blocks(blocks, orientation):
    return BlockSignatureVector(
        tuple(StrictSignature(tuple(b)) for b in blocks), orientation
    )
