import math
import os

from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, str(default)))
    except ValueError:
        return default


def _float_env(name: str, default: float) -> float:
    try:
        return float(os.getenv(name, repr(default)))
    except ValueError:
        return default


# Propagation (local error per integrator step, and the E ~ q shear switch)
TOL: float = _float_env("GAPDEFECT_TOL", 1e-10)
SHEAR_TOL: float = _float_env("GAPDEFECT_SHEAR_TOL", 1e-8)

# Energy scans
SCAN_STEP: float = _float_env("GAPDEFECT_SCAN_STEP", 0.5)
SCAN_PHASE_STEP: float = _float_env("GAPDEFECT_SCAN_PHASE_STEP", math.pi / 32)
EDGE_TOL: float = _float_env("GAPDEFECT_EDGE_TOL", 1e-8)
POINT_TOL: float = _float_env("GAPDEFECT_POINT_TOL", 1e-10)
QUAD_TOL: float = _float_env("GAPDEFECT_QUAD_TOL", 1e-9)

# Evans root search
ROOT_GRID_N: int = _int_env("GAPDEFECT_ROOT_GRID_N", 256)
ROOT_TOL: float = _float_env("GAPDEFECT_ROOT_TOL", 1e-10)
SEMI_INFINITE_WINDOW_MIN: float = _float_env("GAPDEFECT_SEMI_INFINITE_WINDOW_MIN", 10.0)

# Box oracle
BOX_PERIODS: int = _int_env("GAPDEFECT_BOX_PERIODS", 12)
BOX_MAX_PERIODS: int = _int_env("GAPDEFECT_BOX_MAX_PERIODS", 400)
BOX_N_GRID: int = _int_env("GAPDEFECT_BOX_N_GRID", 60000)
BOX_DECAY_TARGET: float = _float_env("GAPDEFECT_BOX_DECAY_TARGET", 1e-4)
BOX_ARTIFACT_MASS: float = _float_env("GAPDEFECT_BOX_ARTIFACT_MASS", 0.1)

# Diophantine (decimal digits for non-quadratic inputs; 40 digits > 80 bits)
MP_DPS: int = _int_env("GAPDEFECT_MP_DPS", 40)

# Postmortem dumps for count diagnostics
DIAGNOSTIC_DIR: str = os.getenv("GAPDEFECT_DIAGNOSTIC_DIR", "diagnostics")
