import numpy as np
import pytest

from selfcore.synthetic import PlantedSpec, planted_traces
from selfcore.traces import ActivationTrace, zscore_normalize


def make_trace(values, cid="ck", cycle=0, layer=1, behavior="walk", run="run"):
    return ActivationTrace(checkpoint_id=cid, run_id=run, cycle=cycle, behavior=behavior, layer=layer,
                           values=np.asarray(values, dtype=float))


def norm(values, **kw):
    return zscore_normalize(make_trace(values, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted_chain():
    return planted_traces(PlantedSpec(seed=7))


@pytest.fixture(scope="session")
def stable_chain():
    return planted_traces(PlantedSpec(seed=8, plastic_noise=0.0))
