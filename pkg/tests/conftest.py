import numpy as np
import pytest

from d2dalloc.model import NetworkInstance, SimParams
from d2dalloc.scenario import generate_instance


@pytest.fixture
def defaults():
    return SimParams()


def build_instance(K, D, *, g_dd=1.6e-7, g_x=1e-12, g_c2d=1e-12, h_d2b=1e-12,
                   g_c2b=1e-10, q_budget=None, **param_overrides):
    """Hand-made instance: scalars broadcast, arrays taken as given."""
    params = SimParams(num_channels=K, num_d2d=D, **param_overrides)
    g_x = np.broadcast_to(np.asarray(g_x, dtype=float), (K, D, D)).copy()
    g_x[:, np.arange(D), np.arange(D)] = 0.0
    g_c2b = np.broadcast_to(np.asarray(g_c2b, dtype=float), (K,)).copy()
    if q_budget is None:
        q_budget = params.tolerance_linear * params.cu_power_w * g_c2b
    return NetworkInstance(
        g_dd=np.broadcast_to(np.asarray(g_dd, dtype=float), (K, D)).copy(),
        g_x=g_x,
        g_c2d=np.broadcast_to(np.asarray(g_c2d, dtype=float), (K, D)).copy(),
        h_d2b=np.broadcast_to(np.asarray(h_d2b, dtype=float), (K, D)).copy(),
        g_c2b=g_c2b,
        q_budget=np.broadcast_to(np.asarray(q_budget, dtype=float), (K,)).copy(),
        params=params,
    )


@pytest.fixture
def make_instance():
    return build_instance


@pytest.fixture(scope="session")
def random_instances():
    """A reusable batch of K=4, D=10 draws."""
    params = SimParams(num_channels=4, num_d2d=10)
    return [generate_instance(params, seed) for seed in range(30)]
