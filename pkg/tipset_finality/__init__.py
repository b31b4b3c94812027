"""Tipset finality calculator - error-probability bounds for tipset-based chains.

Given per-round block counts of the observed heaviest chain, bounds the
probability that the tipset at round s is reorganized out by round c, from a
full node's view (`node`) or from on-chain data only (`actor`).

The honest advantage is G(s, c) = blocks in rounds s+1..c; the target round's
own tipset is not counted, since the lead windows already end at s.
"""

__version__ = "0.1.0"

from .actor import actor_error_probability, actor_report, bpz_pmf
from .chain import ChainTrace, FinalityReport, ReportEntry, load_trace, parse_trace
from .config import CalculatorConfig, NetworkParams, TruncationConfig, load_config
from .errors import (
    DegenerateConditionError,
    DomainError,
    FinalityError,
    FormatError,
    GapError,
    RangeError,
)
from .node import error_probability, node_report
from .simulate import SimConfig, generate_trace

__all__ = [
    "CalculatorConfig",
    "ChainTrace",
    "DegenerateConditionError",
    "DomainError",
    "FinalityError",
    "FinalityReport",
    "FormatError",
    "GapError",
    "NetworkParams",
    "RangeError",
    "ReportEntry",
    "SimConfig",
    "TruncationConfig",
    "actor_error_probability",
    "actor_report",
    "bpz_pmf",
    "error_probability",
    "generate_trace",
    "load_config",
    "load_trace",
    "node_report",
    "parse_trace",
]
