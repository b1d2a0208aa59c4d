"""Versioned on-disk cache for eigensystems.

Layout (all integers and floats little-endian):

    offset  size        content
    0       5           magic b"FDEN1"
    5       1           format version (0x01)
    6       4           uint32 length L of the metadata JSON
    10      L           metadata JSON (utf-8): kind, gamma, kappa,
                        grid_hash, potential_tag, dim, count
    10+L    8           uint64 dim   (length of one eigenvector)
    18+L    8           uint64 count (number of eigenpairs)
    26+L    8*count     float64 eigenvalues, ascending
    ...     8*dim*count float64 eigenvectors, row i = i-th eigenvector

Cache keys are derived from (gamma, kappa, grid hash, potential tag), so a
cache directory can be shared between runs as long as the grid and the
potential are bitwise identical.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .eigensolve import EigenSystem, OperatorRef
from .errors import ConfigError

MAGIC = b"FDEN1"
VERSION = 1


def cache_key(gamma: float | None, kappa: int | None, grid_hash: str | None,
              potential_tag: str | None) -> str:
    g = "none" if gamma is None else f"{gamma:.12g}"
    return f"g{g}_k{kappa}_{grid_hash}_{potential_tag}"


def save_eigensystem(path: str | Path, system: EigenSystem) -> None:
    ref = system.operator_ref
    values = np.ascontiguousarray(system.values, dtype="<f8")
    vectors = np.ascontiguousarray(system.vectors.T, dtype="<f8")
    count, dim = vectors.shape
    meta = {
        "kind": ref.kind,
        "gamma": ref.gamma,
        "kappa": ref.kappa,
        "grid_hash": ref.grid_hash,
        "potential_tag": ref.potential_tag,
        "dim": dim,
        "count": count,
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<QQ", dim, count))
        fh.write(values.tobytes())
        fh.write(vectors.tobytes())


def load_eigensystem(path: str | Path) -> EigenSystem:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != MAGIC:
            raise ConfigError(f"{path}: not an eigensystem cache (bad magic {magic!r})")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != VERSION:
            raise ConfigError(f"{path}: unsupported cache version {version}")
        (mlen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(mlen).decode())
        dim, count = struct.unpack("<QQ", fh.read(16))
        values = np.frombuffer(fh.read(8 * count), dtype="<f8").copy()
        vectors = np.frombuffer(fh.read(8 * dim * count), dtype="<f8")
        vectors = vectors.reshape(count, dim).T.copy()
    ref = OperatorRef(kind=meta["kind"], gamma=meta["gamma"], kappa=meta["kappa"],
                      grid_hash=meta["grid_hash"], potential_tag=meta["potential_tag"])
    return EigenSystem(values=values, vectors=vectors, operator_ref=ref)
