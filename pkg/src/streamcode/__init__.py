"""Low-delay streaming erasure codes for burst and isolated packet losses."""
__version__ = "0.1.0"

from .gf import GF, get_field
from .code import (
    CodeSpec, build_erlc, build_maxspan, build_rlc, build_uncoded,
    encode, encode_stream, truncated_generator, parse_code,
)
from .metrics import (
    closed_form_cT, closed_form_dT, column_distance_oracle, column_span_oracle,
    recoverable, tradeoff_table,
)
from .channel import (
    FritchmanParams, GilbertElliottParams, fritchman_trace, ge_trace, periodic_trace,
)
from .decode import LossReport, StreamingDecoder, run, run_stream
from .sim import ExperimentConfig, SimReport, run_experiment
