import numpy as np
import pytest


def assert_iowe_close(a, b, rtol=1e-9, atol=1e-12):
    """Equal support and matching log values within tolerance."""
    fa, fb = a.logA, b.logA
    assert fa.shape == fb.shape, (fa.shape, fb.shape)
    sa, sb = np.isfinite(fa), np.isfinite(fb)
    assert np.array_equal(sa, sb), "support differs"
    if sa.any():
        assert np.allclose(fa[sa], fb[sb], rtol=rtol, atol=atol), (
            np.max(np.abs(fa[sa] - fb[sb]))
        )


@pytest.fixture(scope="session")
def rng():
    return np.random.Generator(np.random.Philox(12345))
