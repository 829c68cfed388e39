import pytest

from lamshoot.ode_core import Params
from lamshoot.search import find_cylinder_delta, find_torus_deltas

# Golden parameters. Each was produced by two searches with different
# integrator controls (default, and rel_tol=1e-12, abs_tol=1e-13, h_init=1e-4,
# safety=0.8) that agreed to better than 1e-11; tests compare at 1e-8.
DELTA_C = {
    (2, -0.4): 0.19557566238,
    (2, -0.05): 0.0098764494039,
    (3, -0.1): 0.076719535839,
}
DELTA_TORI = {
    (2, -0.24): (0.094978296233, 0.174731366730),
}
DELTA_TORUS_SELF_SHRINKER = {2: 0.30909332135, 3: 0.65221165635}
GOLDEN_TOL = 1e-8


@pytest.fixture(scope="session")
def cylinder_m04():
    return find_cylinder_delta(Params(2, -0.4), 1e-11)


@pytest.fixture(scope="session")
def tori_m024():
    return find_torus_deltas(Params(2, -0.24), 1e-12)
