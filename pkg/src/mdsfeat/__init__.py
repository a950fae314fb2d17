"""Fixed-length features from pairwise distances via iterated
Levenberg-Marquardt multidimensional scaling."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConnectivityError,
    DataError,
    DegenerateConfigurationError,
    DimensionError,
    IngestionError,
    InvalidArgumentError,
    MdsFeatError,
    MeasurementError,
    NumericalError,
)
from .mds import Embedding, IlmaOptions, RunTrace, encode_new, ilma_fit, raw_stress, smacof_fit, stress1  # noqa: E402

__all__ = [
    "ConnectivityError",
    "DataError",
    "DegenerateConfigurationError",
    "DimensionError",
    "Embedding",
    "IlmaOptions",
    "IngestionError",
    "InvalidArgumentError",
    "MdsFeatError",
    "MeasurementError",
    "NumericalError",
    "RunTrace",
    "encode_new",
    "ilma_fit",
    "raw_stress",
    "smacof_fit",
    "stress1",
]
