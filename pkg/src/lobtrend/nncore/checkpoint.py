"""Checkpoint serialization: parameters, layer state, optimizer state.

Parameter values are stored as raw little-endian float32; the container
itself is byte-stable, so save -> load -> save reproduces identical bytes.
The model description needed for reconstruction travels in the header
(``meta["model"]``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..binio import read_container, write_container
from .graph import ModelGraph

CHECKPOINT_FORMAT = "lobtrend-checkpoint"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, graph: ModelGraph, optimizer=None,
                    extra_meta: dict | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    param_names = []
    for name, arr in graph.params().items():
        arrays[f"param.{name}"] = arr.astype(np.float32)
        param_names.append(name)
    state_names = []
    for name, arr in graph.state().items():
        arrays[f"state.{name}"] = arr.astype(np.float32)
        state_names.append(name)
    opt_meta = None
    if optimizer is not None:
        opt_meta = optimizer.config()
        for name, arr in optimizer.state_arrays().items():
            arrays[f"opt.{name}"] = arr.astype(np.float32)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "model": graph.meta,
        "param_names": param_names,
        "state_names": state_names,
        "optimizer": opt_meta,
        "extra": extra_meta or {},
    }
    write_container(path, meta, arrays)


def load_checkpoint(path: str | Path):
    """Return (meta, params, state, opt_arrays) without needing a graph."""
    meta, arrays = read_container(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a checkpoint file")
    params = {k[len("param."):]: v for k, v in arrays.items() if k.startswith("param.")}
    state = {k[len("state."):]: v for k, v in arrays.items() if k.startswith("state.")}
    opt = {k[len("opt."):]: v for k, v in arrays.items() if k.startswith("opt.")}
    return meta, params, state, opt


def restore_graph(graph: ModelGraph, path: str | Path, optimizer=None) -> dict:
    meta, params, state, opt = load_checkpoint(path)
    graph.load_arrays(params, state)
    if optimizer is not None and opt:
        optimizer.load_state_arrays(opt)
    return meta
