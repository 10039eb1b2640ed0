# Copyright 2025 Spectrum MDL Project
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Configuration constants for Spectrum MDL
All magic values and configuration settings are defined here
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Versions
ARTIFACT_VERSION = "1.0.0"
MODEL_FORMAT_VERSION = 1
CSV_SCHEMA_VERSION = 1

# File Paths
OUTPUT_ROOT = Path(os.getenv("SPECTRUM_MDL_OUTPUT_ROOT", "runs"))

# Logging
LOG_LEVEL = os.getenv("SPECTRUM_MDL_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Training defaults
DEFAULT_SPARSITY_WEIGHT = 0.1
DEFAULT_PATTERN_PENALTY_WEIGHT = 0.1
DEFAULT_STE_BAND = 0.05
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_BATCH_SIZE = 32
GRADIENT_CHECK_FLOOR = 1e-6  # Denominator floor for relative gradient error
GRADIENT_CHECK_MARGIN = 10  # Gradient check keeps pre-activations this many h away from a, b

# Robustness search
ALPHA_FLOOR_EXPONENT = 20  # alpha_min = (b - a) / 2**20
ASCENT_FACTOR = 1.25
MAX_ASCENT_PASSES = 8
DEFAULT_SEARCH_ITERATIONS = 16
LATTICE_MAX_DIMS = 3
LATTICE_POINT_LIMIT = 10**6
DEFAULT_LATTICE_POINTS = 20_000
MAX_CORNER_VECTORS = 256
DECODER_CHUNK_ROWS = 65_536

# Pattern statistics
ENUMERATION_MAX_PATTERNS = 20
LOG1P_RATIO_MAX_DRAWS = 4096  # Above this, binomial ratios use gammaln

# Essence
ESSENCE_GRID_BUDGET = 10**7
DEFAULT_PACKING_RESTARTS = 4
DISTANCE_TOLERANCE = 1e-12

# Information diagnostics
DEFAULT_INFO_BINS = 64
IMAGE_INFO_BINS = 256
NULL_PERMUTATIONS = 20

# Demo supports: two disks and a ring
TWO_CIRCLE_CENTERS = ((2.0, 2.0), (5.0, 2.0))
TWO_CIRCLE_RADIUS = 1.2
RING_CENTER = (3.5, 2.0)
RING_RADII = (0.6, 1.2)

# Upload limits for the HTTP surface
ALLOWED_UPLOAD_EXTENSIONS = {".csv"}
MAX_UPLOAD_SIZE_MB = 20

# CLI exit codes
EXIT_OK = 0
EXIT_INCOMPATIBLE = 2
EXIT_CERTIFICATION_FAILED = 3
EXIT_CONFIG_ERROR = 4
