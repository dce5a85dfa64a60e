# SPDX-License-Identifier: MIT

"""
Graph-regularized adversarial imputation from masked one-bit observations.

The generator maps ``[s_bar ; (1 - m) * z]`` to an estimate ``x_hat`` in
``(-1, 1)^N``. The discriminator sees a signed version of ``x_hat`` next to
a hint vector that reveals the mask everywhere except at one node ``n`` and
outputs, per node, the probability that the node was observed; only
``p[n]`` enters the losses.

Training alternates discriminator and generator Adam steps. During
generator steps ``sign`` is replaced by the smooth surrogate
``tanh(. / tau)`` so that gradients reach the generator; discriminator
steps and all evaluations use the hard sign.
"""

from __future__ import annotations

import csv
import logging
import math

from pathlib import Path
from typing import Literal

import numpy as np

from attrs import define, field, frozen, validators

from . import signals
from . import validators as gv
from .converters import to_bool, to_int_tuple
from .exceptions import (
    DimensionMismatch,
    DivergedLoss,
    EmptyDataset,
    IndexOutOfRange,
)
from .graph import Graph, SpectralDecomposition
from .neural import AdamState, adam_step, backward, forward, init_params
from .observe import Observation, quantize


__all__ = [
    "HISTORY_COLUMNS",
    "GanConfig",
    "GeneratorLosses",
    "GraphRegularizer",
    "HintedBatch",
    "TrainerState",
    "discriminate",
    "discriminator_objective",
    "draw_batch",
    "generate",
    "generator_objective",
    "impute",
    "impute_many",
    "loss_d",
    "loss_g1",
    "loss_g2",
    "loss_g2_grad",
    "loss_g3",
    "loss_g3_grad",
    "make_generator_input",
    "make_hint",
    "make_hints",
    "new_trainer",
    "train",
    "write_loss_history",
]

logger = logging.getLogger(__name__)

Regularizer = Literal["tv_l2", "bl_energy", "tv_l1"]
HintPolicy = Literal["redraw", "fixed"]

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before any log.
PROB_EPS = 1e-7

HISTORY_COLUMNS = ("loss_d", "loss_g1", "loss_g2", "loss_g3", "loss_g_total")


@frozen(kw_only=True)
class GanConfig:
    """
    Hyperparameters of adversarial training.

    ``beta = 0`` drops the graph regularizer and recovers the plain hinted
    adversarial imputer.
    """

    alpha: float = field(default=10.0, converter=float, validator=validators.ge(0))
    beta: float = field(default=0.1, converter=float, validator=validators.ge(0))
    batch_size: int = field(default=64, validator=[gv.integer(), validators.gt(0)])
    epochs: int = field(default=200, validator=[gv.integer(), validators.gt(0)])
    d_steps_per_g_step: int = field(
        default=1, validator=[gv.integer(), validators.gt(0)]
    )
    surrogate_temperature: float = field(
        default=0.5, converter=float, validator=validators.gt(0)
    )
    lr_g: float = field(default=1e-3, converter=float, validator=validators.ge(0))
    lr_d: float = field(default=1e-3, converter=float, validator=validators.ge(0))
    rng_seed: int = field(default=0, validator=gv.integer())
    regularizer: str = field(
        default="tv_l2", validator=validators.in_(("tv_l2", "bl_energy", "tv_l1"))
    )
    bandwidth: int = field(default=10, validator=[gv.integer(), validators.ge(0)])
    hidden_widths: tuple = field(default=(256, 128), converter=to_int_tuple)
    combine_observed: bool = field(default=False, converter=to_bool)
    hint_policy: str = field(default="redraw", validator=validators.in_(("redraw", "fixed")))

    @hidden_widths.validator
    def _check_widths(self, attribute, value):
        if any(w < 1 for w in value):
            msg = f"'{attribute.name}' must hold positive widths (got {value!r})."
            raise ValueError(msg)


@frozen
class HintedBatch:
    """
    Everything one training step draws at random: the observations of the
    batch, generator noise, the hinted node of every row and the hints.
    """

    observations: Observation
    noise: np.ndarray
    hint_nodes: np.ndarray
    hints: np.ndarray

    @property
    def size(self):
        return self.noise.shape[0]


@frozen
class GeneratorLosses:
    """
    Batch means of the three generator losses and their weighted total.
    """

    g1: float
    g2: float
    g3: float
    total: float


@define(eq=False)
class TrainerState:
    """
    Generator and discriminator with their optimizer states, and the
    per-epoch loss history (one entry per completed epoch in every column of
    `HISTORY_COLUMNS`).
    """

    generator: object
    generator_opt: AdamState
    discriminator: object
    discriminator_opt: AdamState
    config: GanConfig
    epoch: int = 0
    history: dict = field(factory=lambda: {c: [] for c in HISTORY_COLUMNS})

    @property
    def n_nodes(self):
        return self.generator.out_dim


@frozen
class GraphRegularizer:
    """
    The graph term of the generator objective, bound to the graph artifacts
    it needs: a `Graph` for ``tv_l2``/``tv_l1``, a `SpectralDecomposition`
    for ``bl_energy``.
    """

    kind: str = field(validator=validators.in_(("tv_l2", "bl_energy", "tv_l1")))
    graph: Graph | None = None
    spectrum: SpectralDecomposition | None = None
    bandwidth: int = 0

    def __attrs_post_init__(self):
        if self.kind == "bl_energy" and self.spectrum is None:
            msg = "The bl_energy regularizer needs a spectral decomposition."
            raise ValueError(msg)
        if self.kind != "bl_energy" and self.graph is None:
            msg = f"The {self.kind} regularizer needs a graph."
            raise ValueError(msg)

    @classmethod
    def build(cls, artifacts, kind="tv_l2", bandwidth=0):
        """
        Bind *kind* to *artifacts*: a `Graph`, a `SpectralDecomposition` or a
        ``(graph, spectrum)`` pair.
        """
        graph = spectrum = None
        items = artifacts if isinstance(artifacts, tuple) else (artifacts,)
        for item in items:
            if isinstance(item, Graph):
                graph = item
            elif isinstance(item, SpectralDecomposition):
                spectrum = item
        return cls(kind, graph, spectrum, bandwidth)

    @property
    def n_nodes(self):
        return (self.graph or self.spectrum).n_nodes

    def value(self, x):
        if self.kind == "tv_l2":
            return signals.tv_l2(self.graph, x)
        if self.kind == "tv_l1":
            return signals.tv_l1(self.graph, x)
        return signals.bl_energy(self.spectrum, x, self.bandwidth)

    def grad(self, x):
        if self.kind == "tv_l2":
            return signals.tv_l2_grad(self.graph, x)
        if self.kind == "tv_l1":
            return signals.tv_l1_subgrad(self.graph, x)
        return signals.bl_energy_grad(self.spectrum, x, self.bandwidth)


def make_generator_input(obs, z):
    """
    Generator input ``[s_bar ; (1 - m) * z]``: noise only at unobserved
    nodes. Works on one realization or on a stacked batch.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != obs.mask.shape:
        msg = f"Noise has shape {z.shape} but observations have {obs.mask.shape}."
        raise DimensionMismatch(msg)
    return np.concatenate([obs.signed.astype(np.float64), (1 - obs.mask) * z], axis=-1)


def generate(gen, gen_input):
    """
    Run the generator; the output keeps the rank of *gen_input*.
    """
    arr = np.asarray(gen_input, dtype=np.float64)
    if arr.shape[-1] != gen.in_dim:
        msg = f"Generator expects width {gen.in_dim}, got {arr.shape[-1]}."
        raise DimensionMismatch(msg)
    out, _ = forward(gen, arr)
    return out[0] if arr.ndim == 1 else out


def make_hint(m, n):
    """
    Hint vector equal to the mask *m* except ``h[n] = 0.5``.

    Raises:
        gsimpute.exceptions.IndexOutOfRange: If *n* is not a node of *m*.
    """
    m = np.asarray(m)
    if not 0 <= n < m.shape[-1]:
        msg = f"Hint node {n} is outside [0, {m.shape[-1]})."
        raise IndexOutOfRange(msg)
    h = m.astype(np.float64)
    h[n] = 0.5
    return h


def make_hints(masks, nodes):
    """
    Row-wise `make_hint` for an ``B x N`` mask matrix.
    """
    masks = np.asarray(masks)
    nodes = np.asarray(nodes)
    if np.any((nodes < 0) | (nodes >= masks.shape[-1])):
        msg = f"Hint nodes must lie in [0, {masks.shape[-1]})."
        raise IndexOutOfRange(msg)
    h = masks.astype(np.float64)
    h[np.arange(h.shape[0]), nodes] = 0.5
    return h


def _signed_view(x_hat, tau, hard):
    if hard:
        return quantize(x_hat).astype(np.float64)
    return np.tanh(np.asarray(x_hat, dtype=np.float64) / tau)


def _disc_input(q, hints, observed, combine_observed):
    if combine_observed:
        q = observed.mask * observed.signed + (1 - observed.mask) * q
    return np.concatenate([q, hints], axis=-1)


def discriminate(disc, x_hat, h, tau=0.5, hard=True, *, observed=None):
    """
    Per-node probabilities that each node was observed, from ``[q ; h]``
    where ``q = sign(x_hat)`` (*hard*) or ``tanh(x_hat / tau)``.

    When *observed* is given, ``q`` is overwritten by the observed signs at
    observed nodes before it reaches the discriminator.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x_hat.shape != h.shape or 2 * x_hat.shape[-1] != disc.in_dim:
        msg = (
            f"Discriminator of width {disc.in_dim} cannot take a signal of "
            f"shape {x_hat.shape} with hints of shape {h.shape}."
        )
        raise DimensionMismatch(msg)
    q = _signed_view(x_hat, tau, hard)
    p, _ = forward(disc, _disc_input(q, h, observed, observed is not None))
    return p[0] if x_hat.ndim == 1 else p


def _clamp(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def loss_d(p_n, m_n):
    """
    Discriminator cross-entropy ``-[m log p + (1 - m) log(1 - p)]``.
    """
    p = _clamp(np.asarray(p_n, dtype=np.float64))
    m = np.asarray(m_n, dtype=np.float64)
    return -(m * np.log(p) + (1.0 - m) * np.log1p(-p))


def _loss_d_slope(p_n, m_n):
    inside = (p_n > PROB_EPS) & (p_n < 1.0 - PROB_EPS)
    p = _clamp(p_n)
    return np.where(inside, -m_n / p + (1.0 - m_n) / (1.0 - p), 0.0)


def loss_g1(p_n, m_n):
    """
    Adversarial generator loss ``-(1 - m) log p``: small when the
    discriminator believes an unobserved node was observed.
    """
    p = _clamp(np.asarray(p_n, dtype=np.float64))
    m = np.asarray(m_n, dtype=np.float64)
    return -(1.0 - m) * np.log(p)


def _loss_g1_slope(p_n, m_n):
    inside = (p_n > PROB_EPS) & (p_n < 1.0 - PROB_EPS)
    return np.where(inside, -(1.0 - m_n) / _clamp(p_n), 0.0)


def loss_g2(s_bar, m, x_hat, tau=0.5, hard=True):
    """
    Sign-agreement loss ``sum_i m_i (s_bar_i - sigma(x_hat_i))^2`` with
    ``sigma = sign`` (*hard*) or ``tanh(. / tau)``; one value per row.
    """
    s_bar = np.asarray(s_bar, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if not (s_bar.shape == m.shape == x_hat.shape):
        msg = f"Shapes differ: s_bar {s_bar.shape}, m {m.shape}, x_hat {x_hat.shape}."
        raise DimensionMismatch(msg)
    resid = s_bar - _signed_view(x_hat, tau, hard)
    return np.sum(m * resid**2, axis=-1)


def loss_g2_grad(s_bar, m, x_hat, tau=0.5):
    """
    Gradient of the smooth form of `loss_g2` with respect to *x_hat*.
    """
    s_bar = np.asarray(s_bar, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    t = np.tanh(np.asarray(x_hat, dtype=np.float64) / tau)
    return -2.0 * m * (s_bar - t) * (1.0 - t * t) / tau


def loss_g3(artifacts, x_hat, regularizer="tv_l2", bandwidth=0):
    """
    Graph regularizer of the generated signal: ``tv_l2`` by default,
    ``bl_energy`` with bandwidth *bandwidth*, or ``tv_l1``.
    """
    return GraphRegularizer.build(artifacts, regularizer, bandwidth).value(x_hat)


def loss_g3_grad(artifacts, x_hat, regularizer="tv_l2", bandwidth=0):
    """
    Gradient (a subgradient for ``tv_l1``) of `loss_g3`.
    """
    return GraphRegularizer.build(artifacts, regularizer, bandwidth).grad(x_hat)


def draw_batch(rng, observations, hint_nodes=None):
    """
    Draw fresh standard-normal noise and, unless *hint_nodes* is given, one
    hint node per row uniformly at random.
    """
    b, n = observations.mask.shape
    noise = rng.standard_normal((b, n))
    if hint_nodes is None:
        hint_nodes = rng.integers(0, n, size=b)
    hint_nodes = np.asarray(hint_nodes, dtype=np.int64)
    return HintedBatch(observations, noise, hint_nodes, make_hints(observations.mask, hint_nodes))


def _hinted(values, batch):
    return values[np.arange(batch.size), batch.hint_nodes]


def discriminator_objective(gen, disc, batch, cfg):
    """
    Batch-mean discriminator cross-entropy at the hinted nodes, with the
    generator frozen and hard signs.

    Returns:
        tuple[float, list[numpy.ndarray]]: The loss and its gradient with
        respect to the discriminator parameters.
    """
    obs = batch.observations
    x_hat, _ = forward(gen, make_generator_input(obs, batch.noise))
    q = _signed_view(x_hat, cfg.surrogate_temperature, hard=True)
    p, tape = forward(disc, _disc_input(q, batch.hints, obs, cfg.combine_observed))

    p_n = _hinted(p, batch)
    m_n = _hinted(obs.mask, batch).astype(np.float64)
    out_grad = np.zeros_like(p)
    out_grad[np.arange(batch.size), batch.hint_nodes] = _loss_d_slope(p_n, m_n) / batch.size
    grads, _ = backward(disc, tape, out_grad)
    return float(np.mean(loss_d(p_n, m_n))), grads


def generator_objective(gen, disc, batch, regularizer, cfg):
    """
    Batch mean of ``L_G1 + alpha L_G2 + beta L_G3`` in its smooth form, with
    the discriminator frozen.

    Returns:
        tuple[GeneratorLosses, list[numpy.ndarray]]: The loss terms and the
        gradient of the total with respect to the generator parameters.
    """
    obs = batch.observations
    tau = cfg.surrogate_temperature
    b, n = obs.mask.shape
    mask = obs.mask.astype(np.float64)
    signed = obs.signed.astype(np.float64)

    x_hat, gtape = forward(gen, make_generator_input(obs, batch.noise))
    q = np.tanh(x_hat / tau)
    p, dtape = forward(disc, _disc_input(q, batch.hints, obs, cfg.combine_observed))

    p_n = _hinted(p, batch)
    m_n = _hinted(mask, batch)
    g1 = loss_g1(p_n, m_n)
    g2 = loss_g2(signed, mask, x_hat, tau, hard=False)
    g3 = regularizer.value(x_hat)
    total = g1 + cfg.alpha * g2 + cfg.beta * g3

    p_grad = np.zeros_like(p)
    p_grad[np.arange(b), batch.hint_nodes] = _loss_g1_slope(p_n, m_n) / b
    _, d_in_grad = backward(disc, dtape, p_grad)
    q_grad = d_in_grad[:, :n]
    if cfg.combine_observed:
        q_grad = q_grad * (1.0 - mask)
    x_grad = q_grad * (1.0 - q * q) / tau
    x_grad += cfg.alpha * loss_g2_grad(signed, mask, x_hat, tau) / b
    if cfg.beta:
        x_grad += cfg.beta * regularizer.grad(x_hat) / b
    grads, _ = backward(gen, gtape, x_grad)

    losses = GeneratorLosses(
        g1=float(np.mean(g1)),
        g2=float(np.mean(g2)),
        g3=float(np.mean(g3)),
        total=float(np.mean(total)),
    )
    return losses, grads


def new_trainer(n_nodes, cfg):
    """
    Freshly initialized generator and discriminator for graphs of
    *n_nodes* nodes. Both take ``2 N`` inputs; the generator uses ``tanh``
    everywhere, the discriminator ends in a ``sigmoid``.
    """
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(2)
    dims = (2 * n_nodes, *cfg.hidden_widths, n_nodes)
    n_layers = len(dims) - 1
    gen = init_params(dims, ["tanh"] * n_layers, seeds[0], role="generator")
    disc = init_params(
        dims, ["tanh"] * (n_layers - 1) + ["sigmoid"], seeds[1], role="discriminator"
    )
    return TrainerState(
        generator=gen,
        generator_opt=AdamState.for_net(gen, lr=cfg.lr_g),
        discriminator=disc,
        discriminator_opt=AdamState.for_net(disc, lr=cfg.lr_d),
        config=cfg,
    )


def _progress(iterable, show, desc):
    if not show:
        return iterable
    from tqdm.auto import tqdm

    return tqdm(iterable, desc=desc, unit="epoch", leave=False)


def train(
    dataset,
    artifacts,
    cfg,
    *,
    state=None,
    callback=None,
    show_progress=False,
):
    """
    Alternating minibatch training.

    Every minibatch gets ``cfg.d_steps_per_g_step`` discriminator updates
    followed by one generator update, each with fresh noise and (under the
    ``redraw`` hint policy) fresh hint nodes. The loss history records
    per-epoch means weighted by batch size.

    Args:
        dataset (Observation): ``R x N`` stacked observations.

        artifacts:
            A `Graph`, a `SpectralDecomposition` or a ``(graph, spectrum)``
            pair, whatever ``cfg.regularizer`` needs.

        cfg (GanConfig): Hyperparameters.

        state (TrainerState | None):
            Continue from this state instead of initializing one.

        callback (typing.Callable | None):
            Called as ``callback(state)`` after every epoch.

        show_progress (bool): Display a `tqdm` progress bar.

    Raises:
        gsimpute.exceptions.EmptyDataset: If *dataset* holds no realization.

        gsimpute.exceptions.DimensionMismatch:
            If the dataset, graph and networks disagree on ``N``.

        gsimpute.exceptions.DivergedLoss:
            If an epoch-mean loss is not finite.
    """
    if dataset.mask.ndim != 2 or dataset.mask.shape[0] == 0:
        msg = "Training needs at least one realization (an R x N observation)."
        raise EmptyDataset(msg)
    r, n = dataset.mask.shape
    regularizer = GraphRegularizer.build(artifacts, cfg.regularizer, cfg.bandwidth)
    if regularizer.n_nodes != n:
        msg = f"Dataset has {n} nodes but the graph has {regularizer.n_nodes}."
        raise DimensionMismatch(msg)
    if state is None:
        state = new_trainer(n, cfg)
    elif state.n_nodes != n:
        msg = f"Dataset has {n} nodes but the networks were built for {state.n_nodes}."
        raise DimensionMismatch(msg)

    rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed).spawn(3)[2])
    fixed_nodes = rng.integers(0, n, size=r) if cfg.hint_policy == "fixed" else None

    logger.info(
        "Training on %d realizations of %d nodes for %d epochs (alpha=%g, beta=%g, %s).",
        r, n, cfg.epochs, cfg.alpha, cfg.beta, cfg.regularizer,
    )
    for _ in _progress(range(cfg.epochs), show_progress, f"beta={cfg.beta:g}"):
        sums = dict.fromkeys(HISTORY_COLUMNS, 0.0)
        d_seen = 0
        perm = rng.permutation(r)
        for start in range(0, r, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            obs = dataset[idx]
            nodes = None if fixed_nodes is None else fixed_nodes[idx]

            for _ in range(cfg.d_steps_per_g_step):
                batch = draw_batch(rng, obs, nodes)
                ld, d_grads = discriminator_objective(
                    state.generator, state.discriminator, batch, cfg
                )
                adam_step(state.discriminator, state.discriminator_opt, d_grads)
                sums["loss_d"] += ld * len(idx)
                d_seen += len(idx)

            batch = draw_batch(rng, obs, nodes)
            losses, g_grads = generator_objective(
                state.generator, state.discriminator, batch, regularizer, cfg
            )
            adam_step(state.generator, state.generator_opt, g_grads)
            sums["loss_g1"] += losses.g1 * len(idx)
            sums["loss_g2"] += losses.g2 * len(idx)
            sums["loss_g3"] += losses.g3 * len(idx)
            sums["loss_g_total"] += losses.total * len(idx)

        means = {
            col: sums[col] / (d_seen if col == "loss_d" else r)
            for col in HISTORY_COLUMNS
        }
        state.epoch += 1
        for col in HISTORY_COLUMNS:
            state.history[col].append(means[col])
        bad = [col for col, v in means.items() if not math.isfinite(v)]
        if bad:
            msg = f"Epoch {state.epoch}: non-finite {', '.join(bad)}."
            raise DivergedLoss(msg, step=state.epoch)
        logger.debug(
            "epoch %d: loss_d=%.4f loss_g1=%.4f loss_g2=%.4f loss_g3=%.4f total=%.4f",
            state.epoch, *(means[c] for c in HISTORY_COLUMNS),
        )
        if callback is not None:
            callback(state)
    return state


def impute(state, obs, z):
    """
    Imputed signal ``G([s_bar ; (1 - m) * z])``; parameters are not touched.
    """
    return generate(state.generator, make_generator_input(obs, z))


def impute_many(state, obs, rng_seed):
    """
    Impute stacked observations with noise drawn from *rng_seed*.
    """
    rng = np.random.default_rng(rng_seed)
    return impute(state, obs, rng.standard_normal(obs.mask.shape))


def write_loss_history(state, path):
    """
    Write the per-epoch loss history as CSV with columns ``epoch``,
    ``loss_d``, ``loss_g1``, ``loss_g2``, ``loss_g3`` and ``loss_g_total``.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(("epoch", *HISTORY_COLUMNS))
        for e in range(state.epoch):
            writer.writerow((e + 1, *(repr(state.history[c][e]) for c in HISTORY_COLUMNS)))
