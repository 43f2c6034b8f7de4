"""Checkpoint serialization: text descriptor header + f32 payload.

Header lines are `key = value` pairs terminated by a `---` line; the
payload is every parameter concatenated little-endian float32 in the
descriptor's canonical ordering.
"""

from __future__ import annotations

import numpy as np

from .model import PhnnDescriptor

_HEADER_MAGIC = "ctvforge-checkpoint v1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, desc: PhnnDescriptor, params: dict[str, np.ndarray]) -> None:
    names = desc.param_names()
    lines = [
        _HEADER_MAGIC,
        f"layout = {desc.layout}",
        f"block_channels = {','.join(map(str, desc.block_channels))}",
        f"block_convs = {','.join(map(str, desc.block_convs))}",
    ]
    for name in names:
        shape = ",".join(map(str, params[name].shape))
        lines.append(f"param {name} = {shape}")
    lines.append("---")
    header = ("\n".join(lines) + "\n").encode()
    with open(path, "wb") as fh:
        fh.write(header)
        for name in names:
            fh.write(params[name].astype("<f4").tobytes())


def load_checkpoint(path) -> tuple[PhnnDescriptor, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = b"\n---\n"
    idx = raw.find(sep)
    if idx < 0:
        raise CheckpointError("missing header terminator")
    lines = raw[:idx].decode().split("\n")
    if not lines or lines[0] != _HEADER_MAGIC:
        raise CheckpointError("bad checkpoint magic")
    meta = {}
    shapes = {}
    order = []
    for line in lines[1:]:
        key, _, val = line.partition(" = ")
        if key.startswith("param "):
            name = key[len("param "):]
            shapes[name] = tuple(int(x) for x in val.split(","))
            order.append(name)
        else:
            meta[key] = val
    desc = PhnnDescriptor(
        layout=meta["layout"],
        block_channels=tuple(int(x) for x in meta["block_channels"].split(",")),
        block_convs=tuple(int(x) for x in meta["block_convs"].split(",")),
    )
    if order != desc.param_names():
        raise CheckpointError("parameter ordering does not match descriptor")
    payload = raw[idx + len(sep):]
    params = {}
    off = 0
    for name in order:
        n = int(np.prod(shapes[name]))
        chunk = payload[off:off + 4 * n]
        if len(chunk) < 4 * n:
            raise CheckpointError("short payload")
        params[name] = np.frombuffer(chunk, dtype="<f4").reshape(shapes[name]).copy()
        off += 4 * n
    if off != len(payload):
        raise CheckpointError("trailing bytes")
    return desc, params
