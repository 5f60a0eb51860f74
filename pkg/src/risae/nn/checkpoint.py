"""Checkpoint files: a JSON manifest plus a little-endian binary blob.

``<stem>.json`` lists every array (group, name, kind, shape, dtype) in blob
order; ``<stem>.bin`` holds the arrays concatenated in row-major order.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _paths(stem):
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".json"), stem.with_suffix(".bin")


def network_entries(group, net):
    """Flatten a :class:`~risae.nn.layers.Sequential` into checkpoint entries."""
    entries = []
    for i, layer in enumerate(net.layers):
        for name, arr in list(layer.params.items()) + list(layer.state().items()):
            entries.append((group, f"{i}.{name}", layer.kind, arr))
    return entries


def optimizer_entries(group, opt):
    entries = []
    for name in sorted(opt.state.m):
        entries.append((group, f"m.{name}", "adam", opt.state.m[name]))
        entries.append((group, f"v.{name}", "adam", opt.state.v[name]))
    return entries


def save_checkpoint(stem, entries, tag, seed, meta=None):
    """Write ``entries`` (``(group, name, kind, array)`` tuples) to ``stem``."""
    json_path, bin_path = _paths(stem)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    layers = []
    offset = 0
    with open(bin_path, "wb") as fh:
        for group, name, kind, arr in entries:
            arr = np.asarray(arr)
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            data = np.ascontiguousarray(le).tobytes()
            fh.write(data)
            layers.append(
                {
                    "group": group,
                    "name": name,
                    "kind": kind,
                    "shape": list(arr.shape),
                    "dtype": arr.dtype.name,
                    "offset": offset,
                    "nbytes": len(data),
                }
            )
            offset += len(data)
    manifest = {
        "format_version": FORMAT_VERSION,
        "tag": tag,
        "seed": seed,
        "meta": meta or {},
        "layers": layers,
    }
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return json_path, bin_path


def load_checkpoint(stem):
    """Return ``(manifest, arrays)`` with ``arrays[group][name] -> ndarray``."""
    json_path, bin_path = _paths(stem)
    manifest = json.loads(json_path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {manifest.get('format_version')!r}"
        )
    blob = bin_path.read_bytes()
    arrays = {}
    for entry in manifest["layers"]:
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        start = entry["offset"]
        chunk = blob[start:start + entry["nbytes"]]
        if len(chunk) != entry["nbytes"]:
            raise CheckpointError(f"blob truncated at {entry['group']}/{entry['name']}")
        arr = np.frombuffer(chunk, dtype=dtype).reshape(entry["shape"])
        arrays.setdefault(entry["group"], {})[entry["name"]] = arr.astype(dtype.newbyteorder("="))
    return manifest, arrays


def load_network(net, arrays, group):
    """Copy a checkpoint group back into ``net``; shapes must match exactly."""
    stored = arrays.get(group)
    if stored is None:
        raise CheckpointError(f"checkpoint has no group {group!r}")
    state = {}
    for i, layer in enumerate(net.layers):
        for name, arr in layer.params.items():
            key = f"{i}.{name}"
            if key not in stored:
                raise CheckpointError(f"missing {group}/{key}")
            if stored[key].shape != arr.shape:
                raise CheckpointError(
                    f"{group}/{key}: checkpoint shape {stored[key].shape} != model shape {arr.shape}"
                )
            arr[...] = stored[key]
        for name in ("running_mean", "running_var"):
            key = f"{i}.{name}"
            if key in stored:
                state[key] = stored[key].copy()
    net.load_named_state(state)
    return net
