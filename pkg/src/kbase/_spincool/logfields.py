"""
Names for fields for logging to keep logs consistent. Separators should be underscores.
"""

ALGORITHM = "algorithm"
BACKEND = "backend"
SPINS = "spins"
EPSILON0 = "epsilon0"
LEVEL = "level"
REPETITIONS = "repetitions"
STEPS = "steps"
TARGET_BIAS = "target_bias_over_eps0"
OUTPUT_DIR = "output_dir"
EXIT_CODE = "exit_code"
ERROR_CODE = "error_code"
VERSION = "version"
