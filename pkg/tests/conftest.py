import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from invariants import Case, random_schedule  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@st.composite
def cases(draw, max_J=12):
    """A random schedule with exponents, depth and tree seed."""
    rng = np.random.default_rng(draw(st.integers(0, 2 ** 32 - 1)))
    h_low = draw(st.floats(0.2, 0.9))
    gap = draw(st.one_of(st.just(float("inf")), st.floats(0.2, 4.0)))
    J = draw(st.integers(3, max_J))
    seed = draw(st.integers(0, 2 ** 63 - 1))
    return Case(random_schedule(rng), h_low, h_low + gap, J, seed)


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
