import numpy as np
from _pytest.fixtures import fixture

from darcymg.core import GridHierarchy, PermeabilityField


@fixture
def reservoir() -> GridHierarchy:
    # 20 ft x 10 ft cells
    return GridHierarchy([8, 8], [160.0, 80.0], [2, 2], 2)


@fixture
def reservoir_field(reservoir: GridHierarchy) -> PermeabilityField:
    rng = np.random.default_rng(21)
    kappa = 10.0 ** rng.uniform(0.0, 3.0, reservoir.num_cells)
    return PermeabilityField.isotropic(kappa, reservoir.dim, porosity=0.2)
