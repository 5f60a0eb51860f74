"""Experiment pipelines that turn a validated config into files on disk.

Every run writes ``manifest.json`` into its output directory. The manifest
echoes the config and records seeds, wall time, the package version and the
artifact list. A run that fails part-way still writes a manifest, with
``status = "failed"`` and ``partial = true``.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
from pathlib import Path

import numpy as np

from .. import __version__, kernels
from ..autoencoder import CnnAutoencoder, evaluate_ber, train_e2e
from ..phase import RisNet, pretrain_ris_net
from .config import ExperimentConfig
from .curves import compare_curves, write_report
from .modulation import get_scheme
from .montecarlo import monte_carlo_ber

log = logging.getLogger(__name__)


class RunError(RuntimeError):
    """A pipeline failed after validation; partial artifacts may exist."""


def _g(x):
    return format(float(x), ".17g")


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for epoch, tr, va, lr in history.rows():
            w.writerow([epoch, _g(tr), _g(va), _g(lr)])


def write_ris_history_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "val_loss", "lr"])
        for i, (v, lr) in enumerate(zip(result.history, result.lr_history)):
            w.writerow([i + 1, _g(v), _g(lr)])


class _Run:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.artifacts = []
        self.info = {}

    def add(self, path):
        self.artifacts.append(str(Path(path).relative_to(self.out)))

    def ris_net(self, needed):
        cfg = self.cfg
        if not needed:
            return None
        if cfg.ris_checkpoint:
            net, manifest = RisNet.load(cfg.ris_checkpoint)
            if net.n_elements != cfg.N:
                raise RunError(f"RIS checkpoint has N={net.n_elements}, config has N={cfg.N}")
            self.info["ris_checkpoint"] = str(cfg.ris_checkpoint)
            return net
        return self.pretrain()

    def pretrain(self):
        cfg = self.cfg
        res = pretrain_ris_net(
            cfg.N,
            dataset_size=cfg.ris_dataset_size,
            schedule=cfg.ris_schedule(),
            seed=cfg.seed,
            test_size=cfg.ris_test_size,
            dtype=np.dtype(cfg.ris_dtype).type,
            progress=lambda e, v, lr: log.info("ris epoch %d val %.4f lr %.3g", e + 1, v, lr),
        )
        stem = self.out / "ris"
        json_path, bin_path = res.net.save(stem, cfg.seed, {"efficiency": res.efficiency, "epochs": res.epochs_run})
        self.add(json_path)
        self.add(bin_path)
        hist = self.out / "ris_history.csv"
        write_ris_history_csv(hist, res)
        self.add(hist)
        self.info.update(ris_checkpoint=str(stem), ris_efficiency=res.efficiency, ris_epochs=res.epochs_run)
        return res.net

    def curve(self, curve, name):
        path = curve.write(self.out / name)
        self.add(path)
        self.add(path.with_suffix(".meta.json"))
        return path

    def train_ae(self, ris):
        cfg = self.cfg
        tc = cfg.train_config()
        model, history = train_e2e(
            tc,
            ris_net=ris,
            seed=cfg.seed,
            progress=lambda e, tr, va, lr: log.info("epoch %d train %.5f val %.5f", e + 1, tr, va),
        )
        meta = {"ris_checkpoint": self.info.get("ris_checkpoint", ""), "best_epoch": history.best_epoch + 1}
        json_path, bin_path = model.save(self.out / "ae", cfg.seed, meta, model.optimizer)
        self.add(json_path)
        self.add(bin_path)
        hist = self.out / "history.csv"
        write_history_csv(hist, history)
        self.add(hist)
        self.info.update(best_epoch=history.best_epoch + 1, epochs=len(history.val_loss),
                         train_wall_time=history.wall_time)
        return model

    def evaluate(self, model, ris, csi_mode):
        cfg = self.cfg
        curve = evaluate_ber(
            model, cfg.eb_n0_db, cfg.test_symbols, csi_mode=csi_mode, seed=cfg.seed,
            ris_net=ris, pilot_eb_n0_db=cfg.pilot_level,
        )
        self.curve(curve, f"ber_ae_{csi_mode}")
        return curve


def _pipeline(run):
    cfg = run.cfg
    if cfg.kind == "ris_pretrain":
        run.pretrain()
    elif cfg.kind in ("ae_perfect", "ae_estimated"):
        ris = run.ris_net(cfg.phase_selector == "learned")
        model = run.train_ae(ris)
        perfect = run.evaluate(model, ris, "perfect")
        if cfg.kind == "ae_estimated":
            estimated = run.evaluate(model, ris, "estimated")
            report = compare_curves([perfect, estimated], ["perfect", "estimated"])
            write_report(report, run.out / "compare.csv", run.out / "compare.txt")
            run.add(run.out / "compare.csv")
            run.add(run.out / "compare.txt")
    elif cfg.kind == "baseline_mc":
        ris = run.ris_net(cfg.phase_source == "learned")
        curve = monte_carlo_ber(
            get_scheme(cfg.scheme), cfg.N, cfg.eb_n0_db, min_errors=cfg.min_errors,
            max_bits=cfg.max_bits, phase_source=cfg.phase_source, seed=cfg.seed,
            channel=cfg.channel, ris_net=ris,
        )
        run.curve(curve, f"ber_{cfg.scheme}_{cfg.phase_source}")
    else:  # pragma: no cover - validate() rejects unknown kinds
        raise RunError(f"unknown experiment kind {cfg.kind!r}")


def _check_writable(out):
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")


def _finish(run, status, t0, error=None):
    manifest = {
        "status": status,
        "partial": status != "complete",
        "config": run.cfg.to_dict(),
        "seed": run.cfg.seed,
        "library_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "wall_time_s": time.perf_counter() - t0,
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "artifacts": sorted(run.artifacts),
        **run.info,
    }
    if error is not None:
        manifest["error"] = f"{type(error).__name__}: {error}"
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return manifest


def run_experiment(cfg: ExperimentConfig):
    """Run ``cfg`` end to end and return the manifest dict."""
    cfg.validate()
    run = _Run(cfg)
    _check_writable(run.out)
    t0 = time.perf_counter()
    try:
        _pipeline(run)
    except Exception as exc:
        _finish(run, "failed", t0, exc)
        raise RunError(f"{cfg.kind} failed: {exc}") from exc
    return _finish(run, "complete", t0)


def evaluate_checkpoint(cfg: ExperimentConfig, checkpoint):
    """Evaluate a saved autoencoder under ``cfg.csi_mode``; returns the manifest."""
    cfg.validate()
    run = _Run(cfg)
    _check_writable(run.out)
    t0 = time.perf_counter()
    try:
        model, manifest = CnnAutoencoder.load(checkpoint)
        ris = None
        if model.cfg.phase_selector == "learned":
            ref = cfg.ris_checkpoint or manifest["meta"].get("ris_checkpoint", "")
            if not ref:
                raise RunError("model uses learned phases but no RIS checkpoint is known")
            ris, _ = RisNet.load(ref)
            run.info["ris_checkpoint"] = str(ref)
        run.info["checkpoint"] = str(checkpoint)
        run.evaluate(model, ris, cfg.csi_mode)
    except Exception as exc:
        _finish(run, "failed", t0, exc)
        raise RunError(f"evaluation failed: {exc}") from exc
    return _finish(run, "complete", t0)
