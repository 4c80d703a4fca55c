"""Average-sign diagnostics for the off-diagonal series expansion of quantum partition functions."""

__version__ = "0.1.0"

from .divided_differences import (  # noqa: E402
    DividedDifferenceTable,
    dd_exp,
    dd_exp_recursive,
    dd_exp_signed_log,
    dd_exp_taylor,
)
from .exact import GroundStateClass, SignReport, exact_sign, ground_state_sign_class, trace_exp  # noqa: E402
from .expansion import (  # noqa: E402
    Configuration,
    enumerate_closed,
    series_partition,
    series_sign,
    weight,
)
from .pmr import PmrHamiltonian, decompose, recompose, stoquasticize  # noqa: E402
from .sampler import SamplerParams, run as sample_sign  # noqa: E402

__all__ = [
    "Configuration",
    "DividedDifferenceTable",
    "GroundStateClass",
    "PmrHamiltonian",
    "SamplerParams",
    "SignReport",
    "dd_exp",
    "dd_exp_recursive",
    "dd_exp_signed_log",
    "dd_exp_taylor",
    "decompose",
    "enumerate_closed",
    "exact_sign",
    "ground_state_sign_class",
    "recompose",
    "sample_sign",
    "series_partition",
    "series_sign",
    "stoquasticize",
    "trace_exp",
    "weight",
]
