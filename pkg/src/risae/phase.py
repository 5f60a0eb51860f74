"""RIS phase selection: closed-form alignment, grid search and the learned net."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelRealization, effective_channel, sample_rayleigh
from .nn import Activation, Adam, BatchNorm, Dense, DimensionError, Sequential
from .nn.checkpoint import CheckpointError, load_checkpoint, load_network, network_entries, save_checkpoint
from .nn.optim import TrainSchedule, schedule_step
from .streams import stream

log = logging.getLogger(__name__)

SEARCH_BUDGET = 2 ** 24


class SearchBudgetError(ValueError):
    """Raised when an exhaustive phase grid is too large to enumerate."""


class DivergenceError(RuntimeError):
    pass


def optimal_phases_closed_form(ch):
    """Phases that co-phase every cascade term with the direct path.

    ``theta[n] = exp(j (arg h_d - arg cascade[n]))``; a zero cascade term gets
    ``theta[n] = 1`` and ``h_d = 0`` reduces to ``exp(-j arg cascade[n])``.
    """
    c = ch.cascade
    hd = np.asarray(ch.h_d)[..., None]
    theta = np.exp(1j * (np.angle(hd) - np.angle(c)))
    return np.where(c == 0, 1.0 + 0j, theta)


def optimal_gain(ch):
    """``|h_d| + sum |cascade|``, the largest achievable ``|h_eff|``."""
    return np.abs(ch.h_d) + np.abs(ch.cascade).sum(axis=-1)


def grid_phases(levels):
    return np.exp(2j * np.pi * np.arange(levels) / levels)


def exhaustive_phase_search(ch, levels):
    """Best grid point of ``levels`` uniformly spaced phases per element.

    Grid points are enumerated lexicographically (element 0 most
    significant); ties keep the earliest point.
    """
    n = ch.n_elements
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if float(levels) ** n > SEARCH_BUDGET:
        raise SearchBudgetError(f"{levels}^{n} grid points exceed the budget of 2^24")
    cascade = np.ascontiguousarray(np.asarray(ch.cascade, dtype=np.complex128).reshape(n))
    digits, _ = kernels.exhaustive_search(cascade, complex(ch.h_d), int(levels))
    return grid_phases(levels)[digits]


def ris_features(ch):
    """``[re(cascade), im(cascade), re(h_d), im(h_d)]`` along the last axis."""
    c = ch.cascade
    hd = np.asarray(ch.h_d)[..., None]
    return np.concatenate([c.real, c.imag, hd.real, hd.imag], axis=-1)


def hidden_widths(n_elements):
    return [32 * n_elements, 16 * n_elements, 8 * n_elements, 4 * n_elements]


class RisNet:
    """Dense net mapping channel features to ``N`` phase angles.

    Four Dense + ReLU + BN blocks of widths 32N, 16N, 8N, 4N, then a linear
    Dense layer emitting angles ``phi``; ``theta = exp(j phi)``.
    """

    def __init__(self, n_elements, rng=None, dtype=np.float64):
        self.n_elements = n_elements
        self.dtype = dtype
        rng = np.random.default_rng() if rng is None else rng
        layers = []
        width = 2 * n_elements + 2
        for w in hidden_widths(n_elements):
            layers += [Dense(width, w, rng, dtype), Activation("relu"), BatchNorm(w, dtype=dtype)]
            width = w
        layers.append(Dense(width, n_elements, rng, dtype))
        self.net = Sequential(layers)

    def angles(self, features, training=False):
        if features.shape[-1] != 2 * self.n_elements + 2:
            raise DimensionError(
                f"RIS net input has {features.shape[-1]} features, expected {2 * self.n_elements + 2}"
            )
        return self.net.forward(features.astype(self.dtype, copy=False), training)

    def forward(self, features, training=False):
        return np.exp(1j * self.angles(features, training).astype(np.float64))

    def save(self, stem, seed, meta=None):
        meta = dict(meta or {})
        meta["N"] = self.n_elements
        return save_checkpoint(stem, network_entries("ris", self.net), "ris-net", seed, meta)

    @classmethod
    def load(cls, stem):
        manifest, arrays = load_checkpoint(stem)
        if manifest["tag"] != "ris-net":
            raise CheckpointError(f"checkpoint tag {manifest['tag']!r} is not a RIS net")
        dtype = np.dtype(arrays["ris"]["0.weight"].dtype)
        net = cls(int(manifest["meta"]["N"]), np.random.default_rng(0), dtype)
        load_network(net.net, arrays, "ris")
        return net, manifest

    def phases(self, ch):
        """Inference-mode reflection coefficients for a (batched) realization."""
        feats = ris_features(ch)
        flat = feats.reshape(-1, feats.shape[-1])
        theta = self.forward(flat)
        return theta.reshape(feats.shape[:-1] + (self.n_elements,))


def ris_net_forward(features, net):
    return net.forward(np.asarray(features))


def gain_loss_and_grad(phi, cascade, h_d):
    """``-mean |h_eff|^2`` and its derivative with respect to the angles."""
    theta = np.exp(1j * phi)
    terms = theta * cascade
    h = h_d + terms.sum(axis=-1)
    b = phi.shape[0]
    loss = -float(np.mean(np.abs(h) ** 2))
    grad = (2.0 / b) * np.imag(np.conj(h)[:, None] * terms)
    return loss, grad


@dataclass
class PretrainResult:
    net: RisNet
    history: list = field(default_factory=list)
    lr_history: list = field(default_factory=list)
    efficiency: float = float("nan")
    epochs_run: int = 0


def efficiency(net, ch):
    """Mean ``|h_eff(net)| / |h_eff(closed form)|`` over a batch of realizations."""
    theta = net.phases(ch)
    achieved = np.abs(effective_channel(ch, theta))
    best = optimal_gain(ch)
    ok = best > 0
    ratio = np.where(ok, achieved / np.where(ok, best, 1.0), 1.0)
    return float(np.mean(ratio))


def pretrain_ris_net(
    n_elements,
    dataset_size=200_000,
    schedule=None,
    seed=0,
    val_fraction=0.2,
    batch_size=128,
    lr=1e-3,
    test_size=5000,
    dtype=np.float64,
    progress=None,
):
    """Unsupervised pre-training that maximizes ``mean |h_eff|^2``.

    Returns a :class:`PretrainResult` whose ``efficiency`` is measured on a
    held-out set of ``test_size`` fresh realizations.
    """
    schedule = schedule or TrainSchedule(
        max_epochs=1000, early_stop_patience=20, lr_plateau_patience=10, lr_factor=0.33
    )
    net = RisNet(n_elements, stream(seed, "ris", "init"), dtype)
    n_val = max(1, int(round(dataset_size * val_fraction)))
    n_train = dataset_size - n_val
    train = sample_rayleigh(n_elements, stream(seed, "ris", "train"), n_train)
    val = sample_rayleigh(n_elements, stream(seed, "ris", "val"), n_val)
    test = sample_rayleigh(n_elements, stream(seed, "ris", "test"), test_size)
    x_train, x_val = ris_features(train).astype(dtype), ris_features(val).astype(dtype)
    c_train, c_val = train.cascade, val.cascade
    opt = Adam(lr=lr)
    params = net.net.named_params()
    result = PretrainResult(net)
    best_state = None
    best_val = np.inf
    for epoch in range(schedule.max_epochs):
        order = stream(seed, "ris", "shuffle", epoch).permutation(n_train)
        for start in range(0, n_train, batch_size):
            idx = order[start:start + batch_size]
            if idx.size < 2:
                continue
            phi = net.angles(x_train[idx], training=True)
            loss, grad = gain_loss_and_grad(phi, c_train[idx], train.h_d[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite RIS loss at epoch {epoch} batch {start // batch_size}")
            net.net.backward(grad.astype(dtype))
            opt.update(params, net.net.named_grads())
        phi = net.angles(x_val)
        val_loss, _ = gain_loss_and_grad(phi, c_val, val.h_d)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite RIS validation loss at epoch {epoch}")
        result.history.append(val_loss)
        result.lr_history.append(opt.lr)
        if val_loss < best_val:
            best_val = val_loss
            best_state = _snapshot(net.net)
        decision, _ = schedule_step(schedule, result.history, opt.state)
        if progress:
            progress(epoch, val_loss, opt.lr)
        log.debug("ris epoch %d val_loss %.6f lr %.3g", epoch, val_loss, opt.lr)
        if decision == "stop":
            break
    result.epochs_run = len(result.history)
    _restore(net.net, best_state)
    result.efficiency = efficiency(net, test)
    return result


def _snapshot(seq):
    return (
        {k: v.copy() for k, v in seq.named_params().items()},
        {k: v.copy() for k, v in seq.named_state().items()},
    )


def _restore(seq, snap):
    if snap is None:
        return
    params, state = snap
    live = seq.named_params()
    for k, v in params.items():
        live[k][...] = v
    seq.load_named_state(state)
