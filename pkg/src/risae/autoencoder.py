"""Convolutional end-to-end autoencoder over the RIS channel.

Transmitter: one-hot symbols -> 3 x (Conv1D + BN) with ELU, ELU, linear ->
power normalization. The default kernel width of 1 maps each symbol on its
own; wider kernels let neighbouring symbols in a block shape each codeword. Channel: one Rayleigh realization per block, RIS phases
from a frozen phase selector, AWGN. Receiver: 3 x (Conv1D + BN) with ELU,
ELU, softmax over the ``2^k`` messages.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .baseline.curves import BerCurve, BerPoint
from .channel import NoiseSpec, effective_channel, sample_rayleigh
from .estimation import dft_reflection_matrix, estimated_csi_pipeline
from .nn import Activation, Adam, BatchNorm, Conv1D, DimensionError, Sequential, cross_entropy, softmax
from .nn.checkpoint import load_checkpoint, load_network, network_entries, optimizer_entries, save_checkpoint
from .nn.optim import TrainSchedule, schedule_step
from .phase import DivergenceError, optimal_phases_closed_form, ris_features
from .streams import stream

log = logging.getLogger(__name__)

RX_INPUTS = ("equalized", "raw")
CSI_FEATURES = ("effective", "full")
PHASE_SELECTORS = ("learned", "closed_form")
POWER_EPS = 1e-18
WIDTH = 256


@dataclass
class TrainConfig:
    k: int = 1
    n: int = 1
    N: int = 16
    train_symbols: int = 1_280_000
    val_fraction: float = 0.2
    test_symbols: int = 3_200_000
    batch_train: int = 128
    batch_test: int = 64
    train_eb_n0_db: float = 16.0
    block_len: int = 8
    kernel_size: int = 1
    lr: float = 1e-3
    rx_input: str = "equalized"
    csi_features: str = "effective"
    phase_selector: str = "learned"
    train_with_estimates: bool = False
    dtype: str = "float64"
    schedule: TrainSchedule = field(
        default_factory=lambda: TrainSchedule(
            max_epochs=150, early_stop_patience=100, lr_plateau_patience=50, lr_factor=0.1
        )
    )

    def __post_init__(self):
        if isinstance(self.schedule, dict):
            self.schedule = TrainSchedule(**self.schedule)
        self.validate()

    def validate(self):
        if self.k < 1 or self.n < 1:
            raise ValueError("k and n must be >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.train_symbols <= 0:
            raise ValueError("train_symbols must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.block_len < 1 or self.batch_train < 1 or self.batch_test < 1:
            raise ValueError("block_len and batch sizes must be >= 1")
        if self.rx_input not in RX_INPUTS:
            raise ValueError(f"rx_input must be one of {RX_INPUTS}")
        if self.csi_features not in CSI_FEATURES:
            raise ValueError(f"csi_features must be one of {CSI_FEATURES}")
        if self.phase_selector not in PHASE_SELECTORS:
            raise ValueError(f"phase_selector must be one of {PHASE_SELECTORS}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    @property
    def rate(self):
        return self.k / self.n

    @property
    def n_classes(self):
        return 2 ** self.k

    @property
    def blocks_per_batch(self):
        return max(1, self.batch_train // self.block_len)

    def to_dict(self):
        return asdict(self)


def desk_config(**overrides):
    """Scaled-down preset: 100k symbols, 30 epochs, 16 dB training."""
    base = dict(
        train_symbols=100_000,
        test_symbols=200_000,
        schedule=TrainSchedule(max_epochs=30, early_stop_patience=100, lr_plateau_patience=50, lr_factor=0.1),
    )
    base.update(overrides)
    return TrainConfig(**base)


@dataclass
class SymbolBatch:
    k: int
    labels: np.ndarray  # (B, L) message indices

    @property
    def onehot(self):
        return np.eye(2 ** self.k)[self.labels]

    @property
    def bits(self):
        shifts = np.arange(self.k - 1, -1, -1)
        return (self.labels[..., None] >> shifts) & 1

    @classmethod
    def random(cls, k, blocks, block_len, rng):
        return cls(k, rng.integers(0, 2 ** k, size=(blocks, block_len), dtype=np.int64))


def power_normalize(x, eps=POWER_EPS):
    """Scale each example so the mean energy per complex channel use is 1.

    Returns ``(normalized, scale)``; ``scale`` is needed for the backward pass.
    """
    uses = x.shape[1] * x.shape[2] / 2
    energy = np.sum(x * x, axis=(1, 2), keepdims=True) / uses
    scale = np.sqrt(energy + eps)
    return x / scale, scale


def power_normalize_backward(grad, x, scale):
    uses = x.shape[1] * x.shape[2] / 2
    dot = np.sum(grad * x, axis=(1, 2), keepdims=True)
    return grad / scale - x * dot / (uses * scale ** 3)


def mean_power(x):
    uses = x.shape[1] * x.shape[2] / 2
    return np.sum(x * x, axis=(1, 2)) / uses


def _to_complex(x):
    return x[..., 0::2] + 1j * x[..., 1::2]


def _to_real(z):
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=z.real.dtype)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


class CnnAutoencoder:
    def __init__(self, cfg, rng=None):
        self.cfg = cfg
        rng = np.random.default_rng() if rng is None else rng
        dtype = np.dtype(cfg.dtype)
        self.dtype = dtype
        m, n, ks = cfg.n_classes, cfg.n, cfg.kernel_size
        self.tx = Sequential(
            [
                Conv1D(m, WIDTH, ks, rng, dtype), BatchNorm(WIDTH, dtype=dtype), Activation("elu"),
                Conv1D(WIDTH, WIDTH, ks, rng, dtype), BatchNorm(WIDTH, dtype=dtype), Activation("elu"),
                Conv1D(WIDTH, 2 * n, ks, rng, dtype), BatchNorm(2 * n, dtype=dtype), Activation("linear"),
            ]
        )
        rx_in = 2 * n + self.csi_width
        self.rx = Sequential(
            [
                Conv1D(rx_in, WIDTH, ks, rng, dtype), BatchNorm(WIDTH, dtype=dtype), Activation("elu"),
                Conv1D(WIDTH, WIDTH, ks, rng, dtype), BatchNorm(WIDTH, dtype=dtype), Activation("elu"),
                Conv1D(WIDTH, m, ks, rng, dtype), BatchNorm(m, dtype=dtype),
            ]
        )
        self._cache = None

    @property
    def csi_width(self):
        return 2 if self.cfg.csi_features == "effective" else 2 * self.cfg.N + 2

    def params(self):
        p = {f"tx.{k}": v for k, v in self.tx.named_params().items()}
        p.update({f"rx.{k}": v for k, v in self.rx.named_params().items()})
        return p

    def grads(self):
        g = {f"tx.{k}": v for k, v in self.tx.named_grads().items()}
        g.update({f"rx.{k}": v for k, v in self.rx.named_grads().items()})
        return g

    def encode(self, onehot, training=False):
        if onehot.ndim != 3 or onehot.shape[2] != self.cfg.n_classes:
            raise DimensionError(
                f"encoder expects (batch, length, {self.cfg.n_classes}) one-hot input, got {onehot.shape}"
            )
        raw = self.tx.forward(onehot.astype(self.dtype, copy=False), training)
        x, scale = power_normalize(raw)
        self._tx_cache = (raw, scale)
        return x

    def receiver_input(self, y, h_known, csi):
        """Receiver features ``[signal (2n), csi]`` with the CSI tiled along the block.

        ``y`` is complex ``(B, L, n)``; ``h_known`` is the effective channel
        the receiver believes in, ``(B,)``; ``csi`` is ``(B, csi_width)``.
        """
        if self.cfg.rx_input == "equalized":
            sig = y / h_known[:, None, None]
        else:
            sig = y
        b, length = y.shape[0], y.shape[1]
        tiled = np.broadcast_to(csi[:, None, :], (b, length, csi.shape[-1]))
        return np.concatenate([_to_real(sig), tiled], axis=-1).astype(self.dtype, copy=False)

    def decode_logits(self, rx_in, training=False):
        if rx_in.shape[-1] != 2 * self.cfg.n + self.csi_width:
            raise DimensionError(
                f"receiver expects {2 * self.cfg.n + self.csi_width} features, got {rx_in.shape[-1]}"
            )
        return self.rx.forward(rx_in, training)

    def decode(self, rx_in, training=False):
        return softmax(self.decode_logits(rx_in, training))

    def forward(self, labels, h_true, h_known, csi, noise, training=False):
        """Full pass for one batch; ``noise`` is complex ``(B, L, n)``, already scaled."""
        onehot = np.eye(self.cfg.n_classes, dtype=self.dtype)[labels]
        x = self.encode(onehot, training)
        xc = _to_complex(x)
        y = h_true[:, None, None] * xc + noise
        rx_in = self.receiver_input(y, h_known, csi)
        probs = self.decode(rx_in, training)
        self._cache = (onehot, x, h_true, h_known)
        return probs, x

    def backward(self, dlogits):
        onehot, x, h_true, h_known = self._cache
        d_in = self.rx.backward(dlogits)
        n = self.cfg.n
        d_sig = _to_complex(d_in[..., : 2 * n])
        # real-pair gradient of y = a * z is conj(a) * dy for complex a
        if self.cfg.rx_input == "equalized":
            d_y = d_sig * np.conj(1.0 / h_known)[:, None, None]
        else:
            d_y = d_sig
        d_x = _to_real(d_y * np.conj(h_true)[:, None, None]).astype(self.dtype, copy=False)
        raw, scale = self._tx_cache
        d_raw = power_normalize_backward(d_x, raw, scale)
        self.tx.backward(d_raw)

    def predict(self, labels, h_true, h_known, csi, noise):
        probs, _ = self.forward(labels, h_true, h_known, csi, noise, training=False)
        return np.argmax(probs, axis=-1)

    def save(self, stem, seed, meta=None, optimizer=None):
        entries = network_entries("tx", self.tx) + network_entries("rx", self.rx)
        if optimizer is not None:
            entries += optimizer_entries("adam", optimizer)
        meta = dict(meta or {})
        meta["train_config"] = self.cfg.to_dict()
        return save_checkpoint(stem, entries, "cnn-ae", seed, meta)

    @classmethod
    def load(cls, stem):
        manifest, arrays = load_checkpoint(stem)
        if manifest["tag"] != "cnn-ae":
            raise ValueError(f"checkpoint tag {manifest['tag']!r} is not a CNN autoencoder")
        cfg = TrainConfig(**manifest["meta"]["train_config"])
        model = cls(cfg, np.random.default_rng(0))
        load_network(model.tx, arrays, "tx")
        load_network(model.rx, arrays, "rx")
        return model, manifest


def _phase_selector(cfg, ris_net):
    if cfg.phase_selector == "learned":
        if ris_net is None:
            raise ValueError("phase_selector='learned' needs a pre-trained RIS net")
        return ris_net.phases
    return optimal_phases_closed_form


def _csi(cfg, h_known, known_ch):
    if cfg.csi_features == "effective":
        return np.stack([h_known.real, h_known.imag], axis=-1)
    return ris_features(known_ch)


def _link(cfg, ch, selector, spec, rng_pilot, estimated):
    """``((h_true, h_known, csi), estimate)`` for a batch of block realizations."""
    est = None
    if estimated:
        sched = dft_reflection_matrix(cfg.N)
        theta, _, est = estimated_csi_pipeline(ch, sched, spec, rng_pilot, selector)
        known = est.as_realization()
        h_known = effective_channel(known, theta)
    else:
        theta = selector(ch)
        known = ch
        h_known = effective_channel(ch, theta)
    h_true = effective_channel(ch, theta)
    return (h_true, h_known, _csi(cfg, h_known, known)), est


def _noise(rng, spec, shape):
    std = np.sqrt(spec.sigma_sq)
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _power_tol(dtype):
    return 1e-9 if dtype == np.float64 else 1e-5


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    channel_streams: list = field(default_factory=list)
    best_epoch: int = 0
    wall_time: float = 0.0

    def rows(self):
        return [
            (i + 1, t, v, lr)
            for i, (t, v, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr))
        ]


def _validation_set(cfg, seed, n_blocks, selector, spec):
    symbols = SymbolBatch.random(cfg.k, n_blocks, cfg.block_len, stream(seed, "val", "symbols"))
    ch = sample_rayleigh(cfg.N, stream(seed, "val", "channel"), n_blocks)
    link, _ = _link(cfg, ch, selector, spec, stream(seed, "val", "pilot"), cfg.train_with_estimates)
    noise = _noise(stream(seed, "val", "noise"), spec, (n_blocks, cfg.block_len, cfg.n))
    return symbols.labels, link, noise


def _val_loss(model, labels, link, noise, chunk=1024):
    total = 0.0
    h_true, h_known, csi = link
    for s in range(0, labels.shape[0], chunk):
        sl = slice(s, s + chunk)
        probs, _ = model.forward(labels[sl], h_true[sl], h_known[sl], csi[sl], noise[sl])
        loss, _ = cross_entropy(probs, np.eye(model.cfg.n_classes)[labels[sl]])
        total += loss * labels[sl].size
    return total / labels.size


def train_e2e(cfg, ris_net=None, seed=0, progress=None):
    """Train transmitter and receiver end to end through the frozen RIS channel.

    Returns ``(model, history)``; the model holds the weights of the epoch
    with the lowest validation loss.
    """
    cfg.validate()
    t0 = time.perf_counter()
    selector = _phase_selector(cfg, ris_net)
    model = CnnAutoencoder(cfg, stream(seed, "ae", "init"))
    spec = NoiseSpec(cfg.train_eb_n0_db, cfg.rate)
    total_blocks = cfg.train_symbols // cfg.block_len
    val_blocks = max(1, int(round(total_blocks * cfg.val_fraction)))
    train_blocks = total_blocks - val_blocks
    train_labels = SymbolBatch.random(cfg.k, train_blocks, cfg.block_len, stream(seed, "train", "symbols")).labels
    val = _validation_set(cfg, seed, val_blocks, selector, spec)
    opt = Adam(lr=cfg.lr)
    params = model.params()
    history = TrainHistory()
    best = (np.inf, None)
    tol = _power_tol(model.dtype)
    bpb = cfg.blocks_per_batch
    eye = np.eye(cfg.n_classes, dtype=model.dtype)
    for epoch in range(cfg.schedule.max_epochs):
        order = stream(seed, "train", "shuffle", epoch).permutation(train_blocks)
        losses = []
        for b, start in enumerate(range(0, train_blocks, bpb)):
            idx = order[start:start + bpb]
            labels = train_labels[idx]
            key = ("train", epoch, b)
            history.channel_streams.append(key)
            ch = sample_rayleigh(cfg.N, stream(seed, *key, "channel"), idx.size)
            link, _ = _link(cfg, ch, selector, spec, stream(seed, *key, "pilot"), cfg.train_with_estimates)
            noise = _noise(stream(seed, *key, "noise"), spec, labels.shape + (cfg.n,))
            probs, x = model.forward(labels, *link, noise, training=True)
            power_err = np.max(np.abs(mean_power(x) - 1.0))
            if power_err > tol:
                raise AssertionError(f"power constraint violated by {power_err:.3g} at epoch {epoch} batch {b}")
            loss, dlogits = cross_entropy(probs, eye[labels])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch} batch {b}")
            model.backward(dlogits)
            opt.update(params, model.grads())
            losses.append(loss)
        val_loss = _val_loss(model, *val)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        history.train_loss.append(float(np.mean(losses)))
        history.val_loss.append(float(val_loss))
        history.lr.append(opt.lr)
        if val_loss < best[0]:
            best = (val_loss, _snapshot(model))
        if progress:
            progress(epoch, history.train_loss[-1], val_loss, opt.lr)
        log.info("epoch %d train %.5f val %.5f lr %.2g", epoch + 1, history.train_loss[-1], val_loss, opt.lr)
        decision, _ = schedule_step(cfg.schedule, history.val_loss, opt.state)
        if decision == "stop":
            break
    _restore(model, best[1])
    history.best_epoch = int(np.argmin(history.val_loss))
    history.wall_time = time.perf_counter() - t0
    model.optimizer = opt
    return model, history


def _snapshot(model):
    return (
        {k: v.copy() for k, v in model.params().items()},
        {k: v.copy() for k, v in model.tx.named_state().items()},
        {k: v.copy() for k, v in model.rx.named_state().items()},
    )


def _restore(model, snap):
    if snap is None:
        return
    params, tx_state, rx_state = snap
    live = model.params()
    for k, v in params.items():
        live[k][...] = v
    model.tx.load_named_state(tx_state)
    model.rx.load_named_state(rx_state)


def evaluate_ber(
    model,
    eb_n0_list,
    num_symbols,
    csi_mode="perfect",
    seed=0,
    ris_net=None,
    eval_batch_symbols=8192,
    min_errors_warning=100,
    pilot_eb_n0_db=None,
):
    """Bit-error rate of a trained model over an Eb/N0 sweep.

    Random draws at each sweep point depend only on ``(seed, point, batch)``,
    so ``perfect`` and ``estimated`` runs see identical symbols, channels and
    noise and differ only in the CSI available to the RIS and receiver.
    Pilots share the data Eb/N0 unless ``pilot_eb_n0_db`` fixes their level.
    """
    if csi_mode not in ("perfect", "estimated"):
        raise ValueError("csi_mode must be 'perfect' or 'estimated'")
    cfg = model.cfg
    selector = _phase_selector(cfg, ris_net)
    blocks = max(1, num_symbols // cfg.block_len)
    bpb = max(1, eval_batch_symbols // cfg.block_len)
    points = []
    warnings = []
    nmse = []
    for i, eb_n0_db in enumerate(sorted(float(e) for e in eb_n0_list)):
        spec = NoiseSpec(eb_n0_db, cfg.rate)
        pilot_spec = spec if pilot_eb_n0_db is None else NoiseSpec(pilot_eb_n0_db, cfg.rate)
        errors = 0
        bits = 0
        est_err = 0.0
        est_pow = 0.0
        for b, start in enumerate(range(0, blocks, bpb)):
            count = min(bpb, blocks - start)
            labels = SymbolBatch.random(cfg.k, count, cfg.block_len, stream(seed, "eval", i, b, "symbols")).labels
            ch = sample_rayleigh(cfg.N, stream(seed, "eval", i, b, "channel"), count)
            noise = _noise(stream(seed, "eval", i, b, "noise"), spec, labels.shape + (cfg.n,))
            pilot_rng = stream(seed, "eval", i, b, "pilot")
            link, est = _link(cfg, ch, selector, pilot_spec, pilot_rng, csi_mode == "estimated")
            if est is not None:
                truth = np.concatenate([ch.h_d[:, None], ch.cascade], axis=-1)
                guess = np.concatenate([est.h_d_hat[:, None], est.cascade_hat], axis=-1)
                est_err += float(np.sum(np.abs(guess - truth) ** 2))
                est_pow += float(np.sum(np.abs(truth) ** 2))
            pred = model.predict(labels, *link, noise)
            errors += int(kernels.bit_errors(
                np.ascontiguousarray(pred.reshape(-1), dtype=np.int64),
                np.ascontiguousarray(labels.reshape(-1), dtype=np.int64),
            ))
            bits += labels.size * cfg.k
        if errors < min_errors_warning:
            warnings.append(f"{eb_n0_db:g} dB: only {errors} bit errors in {bits} bits")
        points.append(BerPoint(eb_n0_db, errors, bits))
        if csi_mode == "estimated":
            nmse.append(est_err / est_pow)
    meta = {
        "name": f"cnn_ae_k{cfg.k}_n{cfg.n}_N{cfg.N}_{csi_mode}",
        "model": "cnn-ae",
        "k": cfg.k,
        "n": cfg.n,
        "N": cfg.N,
        "csi_mode": csi_mode,
        "seed": seed,
        "warnings": warnings,
    }
    if csi_mode == "estimated":
        meta["estimation_nmse"] = nmse
        meta["pilot_eb_n0_db"] = "data" if pilot_eb_n0_db is None else pilot_eb_n0_db
    return BerCurve(points, meta)
