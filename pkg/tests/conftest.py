import numpy as np
import pytest

from fracomp.population import SyntheticSpec, half_sine_flow, synthesize_subject


def make_spec(model, theta, heart_rate=60.0, r_app=1.05, peak=400.0, **kw):
    return SyntheticSpec(model=model, theta=tuple(theta), r_app=r_app, heart_rate=heart_rate,
                         flow_harmonics=half_sine_flow(heart_rate, peak), **kw)


def make_data(model, theta, **kw):
    """Measured compliance of a noiseless synthetic subject."""
    return synthesize_subject(make_spec(model, theta, **kw)).compliance()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
