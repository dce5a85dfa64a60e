# SPDX-License-Identifier: MIT

"""
Exceptions raised by *gsimpute*.

Every class derives from `GsiError` and from the closest builtin exception,
so ``except ValueError`` keeps working for callers that do not know about
this package.
"""

from __future__ import annotations


class GsiError(Exception):
    """
    Base class for all errors raised by *gsimpute*.

    .. versionadded:: 0.1.0
    """


class DimensionMismatch(GsiError, ValueError):
    """
    Two operands disagree on the number of graph nodes (or on a layer width).

    .. versionadded:: 0.1.0
    """


class ShapeMismatch(GsiError, ValueError):
    """
    Gradients or optimizer accumulators are not shaped like the parameters
    they belong to.

    .. versionadded:: 0.1.0
    """


class InvalidK(GsiError, ValueError):
    """
    A neighbor count or bandwidth is outside its admissible range.

    .. versionadded:: 0.1.0
    """


class DuplicatePoints(GsiError, ValueError):
    """
    Two nodes share identical features and the requested edge weighting
    cannot represent their zero distance.

    .. versionadded:: 0.1.0
    """


class NotSymmetric(GsiError, ValueError):
    """
    A matrix that has to be symmetric is not.

    .. versionadded:: 0.1.0
    """


class NoConvergence(GsiError, RuntimeError):
    """
    An iterative solver exhausted its sweep budget.

    .. versionadded:: 0.1.0
    """


class InvalidProbability(GsiError, ValueError):
    """
    A probability lies outside its admissible interval.

    .. versionadded:: 0.1.0
    """


class InvalidEntry(GsiError, ValueError):
    """
    A signed observation contains a value other than -1, 0 or +1.

    .. versionadded:: 0.1.0
    """


class StaleTape(GsiError, ValueError):
    """
    A backward pass was given a tape recorded for a different network or
    batch.

    .. versionadded:: 0.1.0
    """


class InvalidArchitecture(GsiError, ValueError):
    """
    Layer widths or activations do not describe a valid network.

    .. versionadded:: 0.1.0
    """


class IndexOutOfRange(GsiError, IndexError):
    """
    A node index does not exist on the graph.

    .. versionadded:: 0.1.0
    """


class EmptyDataset(GsiError, ValueError):
    """
    Training was requested on zero realizations.

    .. versionadded:: 0.1.0
    """


class DivergedLoss(GsiError, ArithmeticError):
    """
    A monitored loss became NaN or infinite.

    It mirrors `FloatingPointError` in spirit but is raised by the training
    loops themselves, after the offending epoch or iteration.

    .. versionadded:: 0.1.0
    """

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.msg = msg
        self.step = step

    def __str__(self):
        return str(self.msg)


class InvalidDecay(GsiError, ValueError):
    """
    A spectral filter decay is negative or not finite.

    .. versionadded:: 0.1.0
    """


class BadMagic(GsiError, ValueError):
    """
    A binary file does not start with the expected magic number.

    .. versionadded:: 0.1.0
    """


class TruncatedFile(GsiError, ValueError):
    """
    A binary file holds fewer bytes than its header announces.

    .. versionadded:: 0.1.0
    """


class UnsupportedType(GsiError, ValueError):
    """
    An IDX file stores an element type other than unsigned bytes.

    .. versionadded:: 0.1.0
    """


class DegenerateRange(GsiError, ValueError):
    """
    Normalization was requested for data whose minimum equals its maximum.

    .. versionadded:: 0.1.0
    """


class EmptyIndexSet(GsiError, ValueError):
    """
    An error metric was requested over an empty set of nodes.

    .. versionadded:: 0.1.0
    """


class DatasetFormatError(GsiError, ValueError):
    """
    A dataset, checkpoint or edge-list file is malformed.

    .. versionadded:: 0.1.0
    """


class ConfigError(GsiError, ValueError):
    """
    An experiment configuration is invalid.

    *key* is the dotted path of the offending entry (for example
    ``gan.batch_size``), *reason* says what is wrong with it.

    .. versionadded:: 0.1.0
    """

    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason

    def __str__(self):
        return f"{self.key}: {self.reason}"
