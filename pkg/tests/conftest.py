import numpy as np
import pytest
from hypothesis import settings

from nucfrag.fragmentation import FragmentationSpec
from nucfrag.model import ModelParams, ScalingFunction

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def reference_params(**kw) -> ModelParams:
    """n_c = 4, unit constants, phi(N) = N, uniform fragmentation."""
    base = dict(n_c=4, lam=(1.0, 1.0, 1.0), mu=(1.0, 1.0, 1.0), phi=ScalingFunction.power(1.0),
                fragmentation=FragmentationSpec.uniform())
    base.update(kw)
    return ModelParams(**base)


@pytest.fixture
def cstar():
    return reference_params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
