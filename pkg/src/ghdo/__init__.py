"""Autoregressive Gram-Hadamard density operators for open spin chains.

Positivity-guaranteed neural parametrization of mixed states, direct
sampling of the diagonal and of the joint superoperator distribution, and
regularized variational time evolution under Lindblad dynamics, verified
against a dense exact-diagonalization oracle at small system size.
"""
import os as _os

# Honored thread knob; must act before numpy initializes its BLAS pools.
_threads = _os.environ.get("GHDO_NUM_THREADS")
if _threads:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import (  # noqa: E402
    CapacityError,
    CheckpointError,
    ConfigurationError,
    DegenerateAmplitudeError,
    DegenerateBatchError,
    GhdoError,
    InputError,
    NonUniqueSteadyStateError,
)
from .lindblad import LindbladModel, LocalOperator, build_tfim  # noqa: E402
from .models import (  # noqa: E402
    NetworkAghdo,
    TabulatedAghdo,
    TabulatedGhdo,
    from_classical,
    from_dense,
    maximally_mixed,
)
from .network import NetworkSpec  # noqa: E402
from .tdvp import TdvpConfig  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CheckpointError",
    "ConfigurationError",
    "DegenerateAmplitudeError",
    "DegenerateBatchError",
    "GhdoError",
    "InputError",
    "LindbladModel",
    "LocalOperator",
    "NetworkAghdo",
    "NetworkSpec",
    "NonUniqueSteadyStateError",
    "TabulatedAghdo",
    "TabulatedGhdo",
    "TdvpConfig",
    "build_tfim",
    "from_classical",
    "from_dense",
    "maximally_mixed",
]
