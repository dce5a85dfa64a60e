# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from gsimpute.graph import knn_graph

from .helpers import path_graph


@pytest.fixture(name="path6")
def _path6():
    return path_graph(6)


@pytest.fixture(name="knn32")
def _knn32():
    pts = np.random.default_rng(7).random((32, 2))
    return knn_graph(pts, 4)
