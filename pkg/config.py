import math
import os
from dotenv import load_dotenv

load_dotenv()

# UMD constant of the target space (Hilbert-Schmidt matrices by default)
C_X = float(os.getenv("LAB_C_X", math.pi ** 2))

# Tolerances
TOLERANCE = float(os.getenv("LAB_TOLERANCE", "1e-10"))
DET_THRESHOLD = float(os.getenv("LAB_DET_THRESHOLD", "1e-10"))

# Non-tangential cone sampling
CONE_RATIO = float(os.getenv("LAB_CONE_RATIO", "1.05"))
CONE_X_SAMPLES = int(os.getenv("LAB_CONE_X_SAMPLES", "64"))
CONE_REFINE = int(os.getenv("LAB_CONE_REFINE", "1"))

# Runs
THREADS = int(os.getenv("LAB_THREADS", "1"))
SEED = int(os.getenv("LAB_SEED", "0"))

# Directories and logging
OUTPUT_DIR = os.getenv("LAB_OUTPUT_DIR", os.path.join(os.getcwd(), 'results'))
LOGS_DIR = os.getenv("LAB_LOGS_DIR", os.path.join(os.getcwd(), 'logs'))
LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "INFO")


def default_tolerances() -> dict[str, float]:
    """Every tolerance a run depends on, as recorded in its summary."""
    return {
        "tolerance": TOLERANCE,
        "det_threshold": DET_THRESHOLD,
        "cone_ratio": CONE_RATIO,
        "cone_x_samples": CONE_X_SAMPLES,
        "cone_refine": CONE_REFINE,
    }
