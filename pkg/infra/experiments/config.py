from pathlib import Path

# CSV schema; bump the version whenever a column changes meaning or position
CSV_SCHEMA_VERSION = 2
CSV_COLUMNS = [
    "schema_version",
    "run_id",
    "seed",
    "load",
    "scheme",
    "selection",
    "handoffs",
    "form1",
    "form2",
    "form3",
    "mean_latency_us",
    "median_latency_us",
    "p95_latency_us",
    "loss_probability",
    "max_inter_frame_us",
    "p95_inter_frame_us",
    "emitted",
    "delivered",
    "dropped",
]

# Sweep defaults
DEFAULT_LOADS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
DEFAULT_WORKERS = 1

# Exit codes of the command line
EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3

# Reference scenarios shipped with the package
EXAMPLES_DIR = Path(__file__).resolve().parent / "examples"
REFERENCE_SCENARIO = EXAMPLES_DIR / "reference.yaml"
