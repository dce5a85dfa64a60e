# SPDX-License-Identifier: MIT

"""
Graph signal imputation from masked one-bit observations.
"""

from __future__ import annotations

from typing import Callable

from . import baseline, data, exceptions, gan, graph, neural, observe, signals
from ._config import get_threads, set_threads
from ._version_info import VersionInfo
from .baseline import GdConfig, gd_impute
from .data import Dataset, Normalization, metrics, normalize
from .gan import GanConfig, TrainerState, impute, train
from .graph import Graph, SpectralDecomposition, knn_graph, laplacian, spectral_decompose
from .observe import Observation, observe as observe_signal


__all__ = [
    "Dataset",
    "GanConfig",
    "GdConfig",
    "Graph",
    "Normalization",
    "Observation",
    "SpectralDecomposition",
    "TrainerState",
    "baseline",
    "data",
    "exceptions",
    "gan",
    "gd_impute",
    "get_threads",
    "graph",
    "impute",
    "knn_graph",
    "laplacian",
    "metrics",
    "neural",
    "normalize",
    "observe",
    "observe_signal",
    "set_threads",
    "signals",
    "spectral_decompose",
    "train",
]

_FALLBACK_VERSION = "0.1.0"


def _make_getattr(mod_name: str) -> Callable:
    """
    Create a metadata proxy for packaging information that uses *mod_name* in
    its errors.
    """

    def __getattr__(name: str):
        if name not in ("__version__", "__version_info__"):
            msg = f"module {mod_name} has no attribute {name}"
            raise AttributeError(msg)

        from importlib.metadata import PackageNotFoundError, version

        try:
            ver = version("gsimpute")
        except PackageNotFoundError:
            ver = _FALLBACK_VERSION

        if name == "__version_info__":
            return VersionInfo.from_version_string(ver)
        return ver

    return __getattr__


__getattr__ = _make_getattr(__name__)
