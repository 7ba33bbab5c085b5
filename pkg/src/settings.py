"""Environment-driven configuration shared by the stage scripts and the CLI."""

from os import environ
from pathlib import Path

# Resolve paths relative to project root
PROJECT_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = Path(environ.get("SCHOOL_FLU_DATA_DIR", PROJECT_ROOT / "data"))

LOG_LEVEL = environ.get("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Parallelism and reproducibility
THREADS = int(environ.get("SCHOOL_FLU_THREADS", "1"))
SEED = int(environ.get("SCHOOL_FLU_SEED", "20111"))

# Bundled fixtures
ERGM_COEFFICIENTS_FNAME = environ.get("ERGM_COEFFICIENTS_FNAME", "ergm_coefficients.json")
DEGREE_PARAMS_FNAME = environ.get("DEGREE_PARAMS_FNAME", "degree_params.json")
VIRAL_LOAD_CURVES_FNAME = environ.get("VIRAL_LOAD_CURVES_FNAME", "viral_load_curves.txt")
SURVEY_FNAME = environ.get("SURVEY_FNAME", "contact_survey.csv")


def data_path(fname: str) -> Path:
    return DATA_DIR / fname
