DOMAIN = "gsema"

SSE_ZSCORE = "zscore"
SSE_SSGSEA = "ssgsea"
SSE_GSVA = "gsva"
SSE_SINGSCORE = "singscore"
SSE_METHODS = [SSE_ZSCORE, SSE_SSGSEA, SSE_GSVA, SSE_SINGSCORE]

KERNEL_GAUSSIAN = "gaussian"
KERNEL_POISSON = "poisson"

MODEL_FEM = "fem"
MODEL_REM = "rem"

STANDARDIZE_ROW = "row"
STANDARDIZE_MATRIX = "matrix"

DEFAULT_SSE_METHOD = SSE_ZSCORE
DEFAULT_SSGSEA_ALPHA = 0.25
DEFAULT_GSVA_KERNEL = KERNEL_GAUSSIAN
DEFAULT_GSVA_BANDWIDTH_FACTOR = 0.25
DEFAULT_POISSON_OFFSET = 0.5
DEFAULT_MIN_SET_SIZE = 7

DEFAULT_ACTIVITY_THRESHOLD = 0.65
DEFAULT_MODEL = MODEL_REM
DEFAULT_ALPHA = 0.05

# prior df above this is reported as infinite
PRIOR_DF_CAP = 1e6
TRIGAMMA_TOL = 1e-8
TRIGAMMA_MAX_ITER = 50

DEFAULT_THREADS = 1
DEFAULT_SEED = 20240101
DEFAULT_ITERATIONS = 100

SPIKED_PATHWAY = "Simulated_Pathway"

CASE_TOKEN = "case"
CONTROL_TOKEN = "control"

# rng substream tags: SeedSequence([seed, tag, *counters])
STREAM_DESIGN = 0
STREAM_STUDY = 1
STREAM_PERMUTE = 2

FLOAT_FORMAT = "%.17g"

RESULTS_FILE = "results.tsv"
EFFECTS_FILE = "effects.tsv"
FILTER_REPORT_FILE = "filter_report.tsv"
RUN_METADATA_FILE = "run_metadata.json"
PERMUTATION_FILE = "permutation_report.tsv"
PERMUTATION_SUMMARY_FILE = "permutation_summary.json"
MANIFEST_FILE = "manifest.tsv"
GMT_FILE = "gene_sets.gmt"
TRUTH_FILE = "truth.json"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
