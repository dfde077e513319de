"""Hypothesis strategies for valid model inputs."""
from hypothesis import strategies as st

from twogroup_mt import InitialFractions, ModelParams


@st.composite
def models(draw, equal_rates=False, p_one=False):
    theta = draw(st.floats(0.05, 0.95))
    lam = draw(st.floats(0.1, 5.0))
    alpha = lam if equal_rates else draw(st.floats(0.1, 5.0))
    p = 1.0 if p_one else draw(st.floats(0.0, 1.0))
    # A-side mass x10 + y10 <= theta, x20 <= 1 - theta
    a_used = draw(st.floats(0.05, 1.0)) * theta
    x10 = draw(st.floats(0.05, 1.0)) * a_used
    y10 = a_used - x10
    x20 = draw(st.floats(0.05, 1.0)) * (1.0 - theta)
    z0 = 1.0 - x10 - x20 - y10
    return ModelParams(theta, lam, alpha, p), InitialFractions(x10, x20, y10, z0)


def random_models(rng, count, *, equal_rates=False, p_one=False):
    """Plain-numpy counterpart of ``models`` for large randomized sweeps."""
    out = []
    for _ in range(count):
        theta = rng.uniform(0.05, 0.95)
        lam = rng.uniform(0.1, 5.0)
        alpha = lam if equal_rates else rng.uniform(0.1, 5.0)
        p = 1.0 if p_one else rng.uniform(0.0, 1.0)
        a_used = rng.uniform(0.05, 1.0) * theta
        x10 = rng.uniform(0.05, 1.0) * a_used
        y10 = a_used - x10
        x20 = rng.uniform(0.05, 1.0) * (1.0 - theta)
        z0 = 1.0 - x10 - x20 - y10
        out.append((ModelParams(theta, lam, alpha, p), InitialFractions(x10, x20, y10, z0)))
    return out
