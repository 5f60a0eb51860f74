"""Adam and the plateau / early-stopping schedule used by both trainers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels_py, kernels


@dataclass
class OptimizerState:
    lr: float = 1e-3
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    # history length at the last LR reduction; plateau windows restart there
    plateau_anchor: int = 0


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = OptimizerState(lr=lr)
        self._tmp = {}

    @property
    def lr(self):
        return self.state.lr

    def update(self, params, grads):
        """Apply one bias-corrected Adam step in place on ``params``."""
        for name, g in grads.items():
            # a finite sum implies finite entries; only a non-finite sum needs the full scan
            if not np.isfinite(np.sum(g)) and not np.all(np.isfinite(g)):
                bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
                raise FloatingPointError(
                    f"non-finite gradient for {name!r} ({bad} entries) at step {self.state.step + 1}"
                )
        st = self.state
        st.step += 1
        b1, b2 = self.beta1, self.beta2
        step_size = st.lr / (1.0 - b1 ** st.step)
        inv_c2 = 1.0 / math.sqrt(1.0 - b2 ** st.step)
        for name, g in grads.items():
            p = params[name]
            if name not in st.m:
                st.m[name] = np.zeros_like(p)
                st.v[name] = np.zeros_like(p)
            m, v = st.m[name], st.v[name]
            if p.flags.c_contiguous and g.flags.c_contiguous and g.dtype == p.dtype:
                kernels.adam_step(
                    p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1), b1, b2, step_size, inv_c2, self.eps
                )
            else:
                tmp = self._tmp.setdefault(name, np.empty_like(p))
                _kernels_py.adam_step(p, g, m, v, b1, b2, step_size, inv_c2, self.eps, tmp)
        return params


@dataclass
class TrainSchedule:
    max_epochs: int = 150
    early_stop_patience: int = 100
    lr_plateau_patience: int = 50
    lr_factor: float = 0.1
    min_delta: float = 1e-4

    def __post_init__(self):
        if self.early_stop_patience < 1 or self.lr_plateau_patience < 1:
            raise ValueError("patience values must be >= 1")
        if not 0.0 < self.lr_factor < 1.0:
            raise ValueError(f"lr_factor must lie in (0, 1), got {self.lr_factor}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


def best_epoch(history, min_delta=1e-4):
    """Index of the last epoch that improved on all earlier ones by more than ``min_delta``."""
    best, idx = history[0], 0
    for i, v in enumerate(history):
        if v < best - min_delta:
            best, idx = v, i
    return idx


def schedule_step(sched, history, st):
    """Decide ``"continue"`` or ``"stop"`` after the latest validation loss.

    A window counts the best epoch itself, so ``P`` consecutive epochs with
    no improvement beyond the first of them exhaust a patience of ``P``.
    Reduces ``st.lr`` in place when the plateau patience runs out.
    """
    if not history:
        raise ValueError("history must be non-empty")
    idx = best_epoch(history, sched.min_delta)
    stale = len(history) - idx
    if len(history) - max(idx, st.plateau_anchor) >= sched.lr_plateau_patience:
        st.lr *= sched.lr_factor
        st.plateau_anchor = len(history)
    if stale >= sched.early_stop_patience:
        return "stop", st
    return "continue", st
