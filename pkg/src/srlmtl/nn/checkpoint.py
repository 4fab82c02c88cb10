"""Versioned checkpoint container: parameter name -> shape -> row-major values.

Text form (bit-exact, 17 significant digits)::

    srlmtl-checkpoint 1
    meta {"json": "..."}
    param <name> <ndim> <d1> ... <dk>
    <v1> <v2> ...
    end

The binary form is a numpy ``.npz`` with the metadata stored as a JSON string.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = "srlmtl-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, state: dict[str, np.ndarray], meta: dict | None = None, binary: bool = False):
    path = Path(path)
    if binary:
        arrays = {f"p:{k}": np.asarray(v, dtype=np.float64) for k, v in state.items()}
        arrays["__meta__"] = np.array(json.dumps({"version": VERSION, "meta": meta or {}}))
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return path
    lines = [f"{MAGIC} {VERSION}", "meta " + json.dumps(meta or {}, sort_keys=True)]
    for name, value in state.items():
        if any(c.isspace() for c in name):
            raise CheckpointError(f"parameter name {name!r} contains whitespace")
        value = np.asarray(value, dtype=np.float64)
        lines.append(" ".join(["param", name, str(value.ndim)] + [str(d) for d in value.shape]))
        lines.append(" ".join(format(float(x), ".17g") for x in value.ravel()))
    lines.append("end")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head != MAGIC.encode():
        return _load_binary(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != MAGIC or int(magic[1]) != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint header {lines[0]!r}")
    if not lines[1].startswith("meta "):
        raise CheckpointError(f"{path}:2: expected meta line")
    meta = json.loads(lines[1][5:])
    state: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines) and lines[i] != "end":
        parts = lines[i].split()
        if not parts or parts[0] != "param":
            raise CheckpointError(f"{path}:{i + 1}: expected param line")
        name, ndim = parts[1], int(parts[2])
        shape = tuple(int(d) for d in parts[3:3 + ndim])
        values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise CheckpointError(f"{path}:{i + 2}: {name} expects {int(np.prod(shape))} values, got {values.size}")
        state[name] = values.reshape(shape)
        i += 2
    if i >= len(lines):
        raise CheckpointError(f"{path}: missing end marker")
    return state, meta


def _load_binary(path):
    try:
        with np.load(path, allow_pickle=False) as z:
            info = json.loads(str(z["__meta__"]))
            state = {k[2:]: z[k].copy() for k in z.files if k.startswith("p:")}
    except (OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    if info.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {info.get('version')}")
    return state, info["meta"]
