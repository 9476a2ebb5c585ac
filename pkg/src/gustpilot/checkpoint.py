"""Binary checkpoint container.

Layout (all integers little-endian u32, all values little-endian float64)::

    b"GNAV1"
    three blocks, in order: state, normalizer, rng
      block := count, tensor * count
      tensor := name_len, utf8 name, rank, dim * rank, value * prod(dims)

Every tensor is float64; integers and text (the run configuration) are
stored exactly as float64 values.
"""

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"GNAV1"
BLOCKS = ("state", "normalizer", "rng")


class CheckpointError(ValueError):
    pass


def _write_block(out, tensors):
    out.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())


def dumps(blocks):
    """Serialise ``{"state": {...}, "normalizer": {...}, "rng": {...}}`` to bytes.

    Tensors are written in name order so equal contents give equal bytes.
    """
    out = [MAGIC]
    for key in BLOCKS:
        _write_block(out, blocks.get(key, {}))
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.off = 0

    def take(self, n, what):
        end = self.off + n
        if end > len(self.data):
            raise CheckpointError(
                f"truncated checkpoint at offset {self.off} reading {what}: expected {n} bytes, "
                f"only {len(self.data) - self.off} remain (file length {len(self.data)}, "
                f"needed at least {end})")
        chunk = self.data[self.off:end]
        self.off = end
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def loads(data):
    r = _Reader(data)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        if magic[:4] == MAGIC[:4]:
            raise CheckpointError(f"unsupported checkpoint version {magic!r} at offset 0")
        raise CheckpointError(f"bad magic {magic!r} at offset 0")
    blocks = {}
    for key in BLOCKS:
        count = r.u32(f"{key} block count")
        tensors = {}
        for _ in range(count):
            name_len = r.u32("name length")
            name = r.take(name_len, "tensor name").decode("utf-8")
            rank = r.u32(f"rank of {name}")
            dims = struct.unpack(f"<{rank}I", r.take(4 * rank, f"dims of {name}"))
            n = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(r.take(8 * n, f"values of {name}"), dtype="<f8")
            tensors[name] = arr.reshape(dims).astype(np.float64)
        blocks[key] = tensors
    if r.off != len(data):
        raise CheckpointError(f"{len(data) - r.off} trailing bytes at offset {r.off}")
    return blocks


def save(path, blocks):
    Path(path).write_bytes(dumps(blocks))


def load(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(data)


def text_to_tensor(text):
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float64)


def tensor_to_text(arr):
    return bytes(np.asarray(arr, dtype=np.uint8)).decode("utf-8")


def _split_int(value, words):
    return [float((value >> (32 * i)) & 0xFFFFFFFF) for i in range(words)]


def _join_int(values):
    return sum(int(v) << (32 * i) for i, v in enumerate(values))


def rng_to_tensor(rng):
    """Encode a PCG64 generator state exactly as float64 32-bit words."""
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise CheckpointError(f"unsupported bit generator {st['bit_generator']}")
    return np.array(_split_int(st["state"]["state"], 4) + _split_int(st["state"]["inc"], 4)
                    + [float(st["has_uint32"]), float(st["uinteger"])])


def tensor_to_rng(arr):
    arr = np.asarray(arr)
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": _join_int(arr[0:4]), "inc": _join_int(arr[4:8])},
        "has_uint32": int(arr[8]),
        "uinteger": int(arr[9]),
    }
    return rng


def config_tensor(config_dict):
    return text_to_tensor(json.dumps(config_dict, sort_keys=True))
