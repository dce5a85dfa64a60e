# SPDX-License-Identifier: MIT

"""
A small dense feedforward network engine: forward pass, exact reverse-mode
gradients and Adam updates, all written out by hand over `numpy`.

Batches are row-major: a batch of ``B`` inputs is a ``B x in`` matrix and a
layer computes ``act(X W^T + b)``.
"""

from __future__ import annotations

import logging
import struct

from pathlib import Path
from typing import Literal

import numpy as np

from attrs import define, field, frozen, validators

from .exceptions import (
    BadMagic,
    DatasetFormatError,
    DimensionMismatch,
    DivergedLoss,
    InvalidArchitecture,
    ShapeMismatch,
    StaleTape,
    TruncatedFile,
)


__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "DenseNet",
    "Layer",
    "Tape",
    "adam_step",
    "backward",
    "forward",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
]

logger = logging.getLogger(__name__)

Activation = Literal["tanh", "sigmoid", "identity"]
Role = Literal["generator", "discriminator"]

ACTIVATIONS = ("tanh", "sigmoid", "identity")
_ACTIVATION_TAGS = {name: tag for tag, name in enumerate(ACTIVATIONS)}

NET_MAGIC = b"GSNN1"


def _activate(z, activation):
    if activation == "tanh":
        return np.tanh(z)
    if activation == "sigmoid":
        # Overflow-free logistic function.
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _activation_slope(y, activation):
    """
    Derivative of the activation, expressed through its output *y*.
    """
    if activation == "tanh":
        return 1.0 - y * y
    if activation == "sigmoid":
        return y * (1.0 - y)
    return np.ones_like(y)


@define(eq=False)
class Layer:
    """
    One affine map followed by an elementwise activation.
    """

    weight: np.ndarray = field(converter=lambda w: np.array(w, dtype=np.float64))
    bias: np.ndarray = field(converter=lambda b: np.array(b, dtype=np.float64))
    activation: str = field(validator=validators.in_(ACTIVATIONS))

    @bias.validator
    def _check_bias(self, attribute, value):
        if self.weight.ndim != 2 or value.shape != (self.weight.shape[0],):
            msg = (
                f"'{attribute.name}' has shape {value.shape} but the weight "
                f"matrix is {self.weight.shape}."
            )
            raise InvalidArchitecture(msg)

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


def _check_chain(inst, attribute, layers):
    if not layers:
        msg = "A network needs at least one layer."
        raise InvalidArchitecture(msg)
    for lo, hi in zip(layers, layers[1:]):
        if hi.in_dim != lo.out_dim:
            msg = f"Layer widths do not chain: {lo.out_dim} feeds a layer expecting {hi.in_dim}."
            raise InvalidArchitecture(msg)


@define(eq=False)
class DenseNet:
    """
    A stack of `Layer` objects with a role tag telling generator parameters
    (theta) from discriminator parameters (psi).

    Parameters are mutated in place by `adam_step`; use `copy` for a
    read-only snapshot.
    """

    layers: list = field(validator=_check_chain)
    role: str = field(
        default="generator",
        validator=validators.in_(("generator", "discriminator")),
    )

    @property
    def in_dim(self):
        return self.layers[0].in_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    @property
    def dims(self):
        return (self.in_dim, *(layer.out_dim for layer in self.layers))

    @property
    def activations(self):
        return tuple(layer.activation for layer in self.layers)

    def params(self):
        """
        Parameter arrays in canonical order ``[W_0, b_0, W_1, b_1, ...]``.
        These are the live arrays, not copies.
        """
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self):
        return DenseNet(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
            role=self.role,
        )

    def is_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.params())


@frozen
class Tape:
    """
    Intermediates of one forward pass: the input of every layer, its
    pre-activation and its activation.
    """

    inputs: tuple
    pre_activations: tuple
    outputs: tuple

    @property
    def batch_size(self):
        return self.inputs[0].shape[0]


def _as_batch(batch, width, what):
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        msg = f"'{what}' has shape {arr.shape}, expected (B, {width})."
        raise DimensionMismatch(msg)
    return arr


def forward(net, batch):
    """
    Run *batch* (``B x in``) through *net*.

    Returns:
        tuple[numpy.ndarray, Tape]: The ``B x out`` output and the tape
        `backward` needs.
    """
    y = _as_batch(batch, net.in_dim, "batch")
    inputs, pres, outs = [], [], []
    for layer in net.layers:
        inputs.append(y)
        z = y @ layer.weight.T + layer.bias
        y = _activate(z, layer.activation)
        pres.append(z)
        outs.append(y)
    return y, Tape(tuple(inputs), tuple(pres), tuple(outs))


def backward(net, tape, output_grad):
    """
    Reverse-mode pass for the scalar loss whose gradient with respect to the
    network output is *output_grad*.

    Per-sample contributions are summed, so a loss that averages over the
    batch has to fold the ``1 / B`` into *output_grad*.

    Returns:
        tuple[list[numpy.ndarray], numpy.ndarray]: Gradients in the order of
        `DenseNet.params` and the gradient with respect to the input batch.

    Raises:
        gsimpute.exceptions.StaleTape:
            If *tape* was not recorded by *net* on a batch matching
            *output_grad*.
    """
    if len(tape.inputs) != len(net.layers) or any(
        x.shape[1] != layer.in_dim or o.shape[1] != layer.out_dim
        for x, o, layer in zip(tape.inputs, tape.outputs, net.layers)
    ):
        msg = f"Tape does not belong to a network with dims {net.dims}."
        raise StaleTape(msg)
    delta = np.asarray(output_grad, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[None, :]
    if delta.shape != tape.outputs[-1].shape:
        msg = f"Output gradient has shape {delta.shape}, tape recorded {tape.outputs[-1].shape}."
        raise StaleTape(msg)

    grads = [None] * (2 * len(net.layers))
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        delta = delta * _activation_slope(tape.outputs[idx], layer.activation)
        grads[2 * idx] = delta.T @ tape.inputs[idx]
        grads[2 * idx + 1] = delta.sum(axis=0)
        delta = delta @ layer.weight
    return grads, delta


@define(eq=False)
class AdamState:
    """
    First and second moment accumulators for every parameter of one
    network, plus the step counter and hyperparameters.
    """

    m: list
    v: list
    lr: float = field(default=1e-3, validator=validators.ge(0))
    beta1: float = field(default=0.9, validator=[validators.ge(0), validators.lt(1)])
    beta2: float = field(default=0.999, validator=[validators.ge(0), validators.lt(1)])
    eps: float = field(default=1e-8, validator=validators.gt(0))
    t: int = field(default=0, validator=validators.ge(0))

    @classmethod
    def for_net(cls, net, **hyper):
        """
        Fresh zero accumulators shaped like *net*'s parameters.
        """
        zeros = [np.zeros_like(p) for p in net.params()]
        return cls([z.copy() for z in zeros], zeros, **hyper)


def adam_step(net, state, grads):
    """
    Apply one bias-corrected Adam update to *net* in place.

    Returns:
        tuple[DenseNet, AdamState]: *net* and *state*, both updated.

    Raises:
        gsimpute.exceptions.ShapeMismatch:
            If *grads* or the accumulators do not match the parameters.

        gsimpute.exceptions.DivergedLoss:
            If the update leaves a non-finite parameter.
    """
    params = net.params()
    if not (len(grads) == len(params) == len(state.m) == len(state.v)):
        msg = f"Expected {len(params)} gradient arrays, got {len(grads)}."
        raise ShapeMismatch(msg)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not (np.shape(g) == p.shape == m.shape == v.shape):
            msg = f"Gradient of shape {np.shape(g)} for a parameter of shape {p.shape}."
            raise ShapeMismatch(msg)

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)

    if not net.is_finite():
        msg = f"Non-finite {net.role} parameter after Adam step {state.t}."
        raise DivergedLoss(msg, step=state.t)
    return net, state


def init_params(layer_dims, activations, rng_seed, *, role="generator", zero=False):
    """
    Build a network with Glorot-uniform weights, ``U(-a, a)`` with
    ``a = sqrt(6 / (in + out))``, and zero biases.

    Args:
        layer_dims (Sequence[int]): ``(in_0, out_0, out_1, ...)``.

        activations (Sequence[str]): One activation per layer.

        rng_seed (int): Seed; equal seeds give bitwise-identical networks.

        role (str): ``"generator"`` or ``"discriminator"``.

        zero (bool): Zero weights as well, for analytic test fixtures.

    Raises:
        gsimpute.exceptions.InvalidArchitecture:
            On fewer than two dims, non-positive widths, a wrong number of
            activations or an unknown activation.
    """
    dims = [int(d) for d in layer_dims]
    acts = list(activations)
    if len(dims) < 2 or any(d < 1 for d in dims):
        msg = f"Layer dims must hold at least two positive widths (got {dims})."
        raise InvalidArchitecture(msg)
    if len(acts) != len(dims) - 1:
        msg = f"{len(dims) - 1} layers need as many activations (got {len(acts)})."
        raise InvalidArchitecture(msg)
    unknown = [a for a in acts if a not in ACTIVATIONS]
    if unknown:
        msg = f"Unknown activation {unknown[0]!r}; choose from {ACTIVATIONS}."
        raise InvalidArchitecture(msg)

    rng = np.random.default_rng(rng_seed)
    layers = []
    for fan_in, fan_out, act in zip(dims, dims[1:], acts):
        if zero:
            w = np.zeros((fan_out, fan_in))
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return DenseNet(layers, role=role)


_COUNT = struct.Struct("<I")
_LAYER_HEAD = struct.Struct("<IIB")


def save_checkpoint(net, path):
    """
    Write *net* as ``GSNN1``: magic, layer count (uint32), per layer
    ``in, out`` (uint32) and an activation tag (uint8), then every parameter
    as little-endian float64 in row-major order, ``W_0, b_0, W_1, ...``.
    """
    with Path(path).open("wb") as f:
        f.write(NET_MAGIC)
        f.write(_COUNT.pack(len(net.layers)))
        for layer in net.layers:
            f.write(_LAYER_HEAD.pack(layer.in_dim, layer.out_dim, _ACTIVATION_TAGS[layer.activation]))
        for p in net.params():
            f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path, role="generator"):
    """
    Read a network written by `save_checkpoint`.

    Raises:
        gsimpute.exceptions.BadMagic: On a foreign file.
        gsimpute.exceptions.TruncatedFile: If parameters are missing.
        gsimpute.exceptions.DatasetFormatError: On an unknown activation tag.
    """
    raw = Path(path).read_bytes()
    if raw[: len(NET_MAGIC)] != NET_MAGIC:
        msg = f"{path}: not a GSNN1 checkpoint."
        raise BadMagic(msg)
    pos = len(NET_MAGIC)
    try:
        (count,) = _COUNT.unpack_from(raw, pos)
        pos += _COUNT.size
        heads = []
        for _ in range(count):
            heads.append(_LAYER_HEAD.unpack_from(raw, pos))
            pos += _LAYER_HEAD.size
    except struct.error:
        msg = f"{path}: checkpoint header is truncated."
        raise TruncatedFile(msg) from None

    layers = []
    for fan_in, fan_out, tag in heads:
        if tag >= len(ACTIVATIONS):
            msg = f"{path}: unknown activation tag {tag}."
            raise DatasetFormatError(msg)
        sizes = (fan_out * fan_in, fan_out)
        if len(raw) < pos + 8 * sum(sizes):
            msg = f"{path}: parameters are truncated."
            raise TruncatedFile(msg)
        w = np.frombuffer(raw, dtype="<f8", count=sizes[0], offset=pos).reshape(fan_out, fan_in)
        pos += 8 * sizes[0]
        b = np.frombuffer(raw, dtype="<f8", count=sizes[1], offset=pos)
        pos += 8 * sizes[1]
        layers.append(Layer(w, b, ACTIVATIONS[tag]))
    return DenseNet(layers, role=role)
