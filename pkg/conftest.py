import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from potential import PolyPiece, PotentialSpec, constant_spec, kronig_penney_spec  # noqa: E402

PHI = (1 + math.sqrt(5)) / 2
KP_A = 40.0
KP_Q_DEF = 22 * math.pi ** 2 / (math.sqrt(5) * PHI)


def random_piecewise_constant(rng: np.random.Generator, n_periodic: int = 3, n_defect: int = 2) -> PotentialSpec:
    period = float(rng.uniform(0.8, 2.5))

    def tile(length: float, n: int) -> tuple:
        cuts = np.sort(rng.uniform(0.15, 0.85, n - 1)) * length
        edges = [0.0, *cuts.tolist(), length]
        return tuple(PolyPiece(lo, hi, (float(rng.uniform(-20, 20)),)) for lo, hi in zip(edges, edges[1:]))

    return PotentialSpec(period, tile(period, n_periodic), tile(1.0, n_defect))


@pytest.fixture
def free_spec() -> PotentialSpec:
    return constant_spec(PHI, 0.0, 0.0)


@pytest.fixture(scope="session")
def kp_spec() -> PotentialSpec:
    return kronig_penney_spec(KP_A, PHI, KP_Q_DEF)


@pytest.fixture
def random_specs() -> list:
    rng = np.random.default_rng(20240611)
    return [random_piecewise_constant(rng) for _ in range(5)]
