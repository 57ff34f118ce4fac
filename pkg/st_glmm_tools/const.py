"""Constants for the st_glmm_tools package."""

from enum import Enum
from pathlib import Path

VERSION = "0.1.0"

# Geometry

EARTH_RADIUS_KM = 6371.0
APERTURE_FACTOR = 1.5
NORTH_POLE = (0.0, 90.0)
ADJACENCY_NEIGHBORS = 4
PD_RELATIVE_TOLERANCE = 1e-10

# Arctic mean function

COAST_DISTANCE_KM = 50.0
ARCTIC_COVARIATE_COUNT = 9
ARCTIC_COVARIATE_FIELDS = ["x_su", "x_wi", "x_pl", "d_cs"]

# Sampler defaults

DEFAULT_ITERATIONS = 14_000
DEFAULT_BURN_IN = 2_000
DEFAULT_THIN = 3
ACCEPTANCE_BAND = (0.26, 0.50)
ACCEPTANCE_TARGET = 0.38
ADAPTATION_EXPONENT = 0.6
COVARIANCE_ADAPTATION_START = 200
COVARIANCE_REGULARIZATION = 1e-8
NEWTON_MAX_ITERATIONS = 100
NEWTON_GRADIENT_TOLERANCE = 1e-6
DEFAULT_LOG_EVERY = 1_000

# Summaries

ICE_CUTOFF = 0.15
TRANSITION_THRESHOLD = 0.5
BAND_HALF_WIDTH = 0.5
HOVMOLLER_HALF_BANDWIDTH_KM = 37.5
HOVMOLLER_LEVELS = (0.9, 0.5)
PIXEL_AREA_KM2 = 625.0
PREDICTIVE_QUANTILES = (0.05, 0.5, 0.95)
CREDIBLE_QUANTILES = (0.025, 0.975)

# Validation

SIGMA2_XI_SWEEP = (0.025, 0.050, 0.075, 0.100)

# Environment

THREADS_ENV_VAR = "ST_GLMM_THREADS"

# Output Directories and Files

DEFAULT_OUTPUT_PATH = Path("output")
MANIFEST_JSON = "manifest.json"
LAYOUT_CSV = "layout.csv"
SCALARS_CSV = "scalars.csv"
DIAGNOSTICS_CSV = "diagnostics.csv"
ACCEPTANCE_CSV = "acceptance.csv"
TRACE_CSV = "trace.csv"
K_BIN = "K.bin"
U_BIN = "U.bin"
ETA_BIN = "eta.bin"
XI_BIN = "xi.bin"
DATASET_CSV = "dataset.csv"
TRUTH_CSV = "truth.csv"
PARAMS_JSON = "params.json"
COVARIATE_INPUTS_CSV = "covariate_inputs.csv"
CENTERS_CSV = "centers.csv"
PREDICTIONS_CSV = "predictions.csv"
RMSPE_CSV = "rmspe.csv"
PARAMETERS_CSV = "parameters.csv"
SENSITIVITY_CSV = "sensitivity.csv"
CHAIN_DIR_PREFIX = "chain_"

FIXTURES_PATH = Path(__file__).parent / "fixtures"
POLAR_CAP_CENTERS_CSV = FIXTURES_PATH / "polar_cap_centers.csv"

# File Headers

DATASET_COLUMNS = ["t", "coord1", "coord2", "z"]
TRUTH_COLUMNS = ["t", "coord1", "coord2", "y", "p"]
COVARIATE_INPUT_COLUMNS = ["t", "coord1", "coord2", *ARCTIC_COVARIATE_FIELDS]
CENTERS_COLUMNS = ["res", "coord1", "coord2"]
TARGET_COLUMNS = ["t", "coord1", "coord2"]
PREDICTION_COLUMNS = ["t", "coord1", "coord2", "mean", "sd", "q05", "q50", "q95"]
MASK_COLUMNS = ["index"]
COVARIATE_PREFIX = "cov"

FLOAT64_SIZE = 8


class Metric(Enum):
    """Distance metrics."""

    PLANAR = "planar"
    GREAT_CIRCLE = "great_circle"


class Scale(Enum):
    """Prediction scales."""

    Y = "y"
    P = "p"
    Z = "z"


class SummaryReport(Enum):
    """Summary sub-reports."""

    BANDS = "bands"
    HOVMOLLER = "hovmoller"
    SEMIVARIOGRAM = "semivariogram"
    ACCURACY = "accuracy"
    TRANSITIONS = "transitions"
    EXTENT = "extent"
    PARAMETERS = "parameters"

    @property
    def file_name(self) -> str:
        return f"{self.value}.csv"


class ExitCode(int, Enum):
    """Process exit codes."""

    SUCCESS = 0
    USAGE = 1
    NUMERICAL = 2


class RandomStream(int, Enum):
    """Fixed keys mixed into SeedSequence entropy so streams never collide."""

    CHAIN = 1
    XI = 2
    PREDICT = 3
    FORECAST = 4
    HOLDOUT = 5
    SIMULATE = 6
    Z_DRAWS = 7
