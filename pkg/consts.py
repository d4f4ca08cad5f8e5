from enum import Enum

SCHEMA_VERSION = 1

DEFAULT_TRAIN_FRACTION = 0.8
DEFAULT_MIN_RATINGS = 5
DEFAULT_THRESHOLD = 4.0

DEFAULT_EPOCHS = 10_000
DEFAULT_BATCH_SIZE = 512
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8
CLIP_NORM = 10.0

SIGNIFICANCE_LEVEL = 0.01
EXACT_WILCOXON_MAX = 10

EXHAUSTIVE_MAX_NODES = 64
LP_MAX_NODES = 300
MAX_ENUMERATED_SETS = 500_000
MAX_PRICING_ROUNDS = 5_000
PRICING_TOLERANCE = 1e-9


class DataFormat(str, Enum):
    TSV_RATING = "tsv_rating"
    TSV_CLICK = "tsv_click"


class Setting(str, Enum):
    INTERACTED = "interacted"
    ALL = "all"


class Variant(str, Enum):
    C = "c"
    P = "p"
    CP = "cp"


class CountMode(str, Enum):
    RAW = "raw"
    POSITIVE = "positive"


class CoverMethod(str, Enum):
    LP = "lp"
    EXHAUSTIVE = "exhaustive"



class Scorer(str, Enum):
    NETWORK = "network"
    DOT = "dot"
