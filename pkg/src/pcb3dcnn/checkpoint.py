"""Binary model checkpoint container.

Layout (all integers little-endian):
  magic     4 bytes  "PCBN"
  version   u8       = 1
  conv1     u32      conv1 filter count
  conv2     u32      conv2 filter count
  classes   u16      output class count
  hidden    u32      hidden dense width
  channels  u16      input channels
  frames    u16      input frames
  height    u16      input height
  width     u16      input width
  tensors            parameter arrays as raw little-endian float32 in the
                     fixed order conv1.w, conv1.b, conv2.w, conv2.b,
                     hidden.w, hidden.b, out.w, out.b

Identical parameters serialize to identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .nn import FilterPair, Geometry, Network, init_network
from .tensor import RngStream

MAGIC = b"PCBN"
VERSION = 1
_HEADER = struct.Struct("<4sB II H I HHHH")

_PARAM_ORDER = ["conv1.w", "conv1.b", "conv2.w", "conv2.b",
                "hidden.w", "hidden.b", "out.w", "out.b"]


class CheckpointError(ValueError):
    pass


def network_bytes(net: Network) -> bytes:
    g = net.geometry
    hidden = net.dense_hidden.weights.shape[1]
    parts = [_HEADER.pack(MAGIC, VERSION,
                          net.filter_pair.conv1_filters, net.filter_pair.conv2_filters,
                          net.num_classes, hidden,
                          g.channels, g.frames, g.height, g.width)]
    params = net.parameters()
    for name in _PARAM_ORDER:
        parts.append(params[name].astype("<f4").tobytes())
    return b"".join(parts)


def save_network(net: Network, path) -> None:
    Path(path).write_bytes(network_bytes(net))


def load_network(path) -> Network:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, c1, c2, classes, hidden, ch, t, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    net = init_network(FilterPair(c1, c2), classes, Geometry(ch, t, h, w),
                       RngStream(0), hidden=hidden)
    offset = _HEADER.size
    params = net.parameters()
    for name in _PARAM_ORDER:
        p = params[name]
        nbytes = p.size * 4
        if offset + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated tensor data at {name}")
        p[...] = np.frombuffer(raw, dtype="<f4", count=p.size, offset=offset).reshape(p.shape)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return net
