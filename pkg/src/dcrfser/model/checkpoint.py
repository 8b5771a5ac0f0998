"""Binary model checkpoints.

Layout (little-endian)::

    b"DCRF" | u8 version | u32 header length | UTF-8 JSON header
    u32 tensor count
    per tensor: u16 name length | name | u8 dtype (0 f32, 1 f64) | u8 ndim
                | ndim x u32 dims | raw data

The JSON header holds the model config and free-form metadata. Model
parameters are stored as float32; the fitted standardizer and PCA that
produced the model inputs are stored as float64 under ``prep/`` names.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..features import PCAModel, Standardizer
from .network import ModelConfig, param_shapes

MAGIC = b"DCRF"
VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8"}


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict
    meta: dict = field(default_factory=dict)
    standardizer: Standardizer | None = None
    pca: PCAModel | None = None


def _tensor_bytes(name: str, arr: np.ndarray, code: int) -> bytes:
    raw = name.encode("utf-8")
    a = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<BB", code, a.ndim)
    return head + struct.pack(f"<{a.ndim}I", *a.shape) + a.tobytes()


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    tensors = [(n, ckpt.params[n], 0) for n in param_shapes(ckpt.config)]
    header = {"config": ckpt.config.to_dict(), "meta": ckpt.meta}
    if ckpt.standardizer is not None:
        tensors += [("prep/std/means", ckpt.standardizer.means, 1),
                    ("prep/std/stds", ckpt.standardizer.stds, 1)]
    if ckpt.pca is not None:
        tensors += [("prep/pca/components", ckpt.pca.components, 1),
                    ("prep/pca/explained_variance", ckpt.pca.explained_variance, 1),
                    ("prep/pca/mean", ckpt.pca.mean, 1)]
        header["pca_total_variance"] = ckpt.pca.total_variance
    hjson = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<BI", VERSION, len(hjson)), hjson,
             struct.pack("<I", len(tensors))]
    parts += [_tensor_bytes(n, a, c) for n, a, c in tensors]
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no checkpoint at {path}")
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise DataError(f"{path}: not a DCRF checkpoint")
    try:
        version, hlen = struct.unpack_from("<BI", data, 4)
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        pos = 9
        header = json.loads(data[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            name = data[pos + 2:pos + 2 + nlen].decode("utf-8")
            pos += 2 + nlen
            code, ndim = struct.unpack_from("<BB", data, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            dt = np.dtype(_DTYPES[code])
            n = int(np.prod(shape))
            if pos + n * dt.itemsize > len(data):
                raise DataError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(data, dt, count=n, offset=pos).reshape(shape).astype(
                dt.newbyteorder("="))
            pos += n * dt.itemsize
    except (struct.error, KeyError, ValueError) as exc:
        raise DataError(f"{path}: corrupt checkpoint ({exc})") from exc

    config = ModelConfig(**header["config"])
    params = {}
    for name, shape in param_shapes(config).items():
        if name not in tensors or tensors[name].shape != shape:
            raise DataError(f"{path}: parameter {name!r} missing or mis-shaped")
        params[name] = tensors[name]
    std = pca = None
    if "prep/std/means" in tensors:
        std = Standardizer(tensors["prep/std/means"], tensors["prep/std/stds"])
    if "prep/pca/components" in tensors:
        pca = PCAModel(tensors["prep/pca/components"], tensors["prep/pca/explained_variance"],
                       tensors["prep/pca/mean"], float(header["pca_total_variance"]))
    return Checkpoint(config, params, header.get("meta", {}), std, pca)
