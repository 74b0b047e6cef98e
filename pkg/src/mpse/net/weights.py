"""Portable weight container.

A store is saved as a directory holding:

* ``weights.bin``  -- one little-endian float32 blob, parameters back to back
* ``manifest.txt`` -- one record per parameter: path, dtype, shape,
  byte offset, 64-bit checksum (blake2b-8 of the raw bytes)
* ``config.txt``   -- the ModelConfig as flat key=value text

Loading verifies every checksum and validates the parameter set and all
shapes against the config; save -> load is bit-exact.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .model import ModelConfig, param_shapes

MANIFEST_NAME = "manifest.txt"
BLOB_NAME = "weights.bin"
CONFIG_NAME = "config.txt"


class WeightStoreError(Exception):
    """Base class for weight container failures."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(message)


class MissingParameterError(WeightStoreError):
    def __init__(self, path: str):
        super().__init__(path, f"missing parameter {path!r}")


class ExtraParameterError(WeightStoreError):
    def __init__(self, path: str):
        super().__init__(path, f"extra parameter {path!r} not in model inventory")


class ShapeMismatchError(WeightStoreError):
    def __init__(self, path: str, got, want):
        super().__init__(path, f"parameter {path!r} has shape {got}, expected {want}")


class ChecksumError(WeightStoreError):
    def __init__(self, path: str):
        super().__init__(path, f"checksum mismatch for parameter {path!r}")


def _checksum(data: bytes) -> str:
    return hashlib.blake2b(data, digest_size=8).hexdigest()


class WeightStore:
    """Immutable mapping from parameter path to float32 array."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self._arrays = {
            name: np.ascontiguousarray(a, dtype=np.float32) for name, a in arrays.items()
        }

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._arrays[name]
        except KeyError:
            raise MissingParameterError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    def replaced(self, updates: dict[str, np.ndarray]) -> "WeightStore":
        """Copy of the store with some parameters substituted."""
        arrays = dict(self._arrays)
        for name, val in updates.items():
            if name not in arrays:
                raise MissingParameterError(name)
            val = np.ascontiguousarray(val, dtype=np.float32)
            if val.shape != arrays[name].shape:
                raise ShapeMismatchError(name, val.shape, arrays[name].shape)
            arrays[name] = val
        return WeightStore(arrays)

    def validate(self, cfg: ModelConfig):
        """Check the parameter set and shapes against a model config."""
        want = param_shapes(cfg)
        for name, shape in want.items():
            if name not in self._arrays:
                raise MissingParameterError(name)
            got = self._arrays[name].shape
            if tuple(got) != tuple(shape):
                raise ShapeMismatchError(name, tuple(got), tuple(shape))
        for name in self._arrays:
            if name not in want:
                raise ExtraParameterError(name)


def init_random(cfg: ModelConfig, seed: int) -> WeightStore:
    """Deterministic random initialization from a single seeded generator.

    Conv/linear/GRU weights and their biases draw from uniform(-k, k)
    with k = 1/sqrt(fan_in); norm affines start at identity, PReLU
    slopes at 0.25, and the learnable-sigmoid alphas at 1.
    """
    rng = np.random.default_rng(seed)
    shapes = param_shapes(cfg)
    arrays = {}
    for name, shape in shapes.items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gamma" or name.endswith("lsigmoid.alpha"):
            arrays[name] = np.ones(shape, dtype=np.float32)
        elif leaf == "beta":
            arrays[name] = np.zeros(shape, dtype=np.float32)
        elif leaf == "alpha":
            arrays[name] = np.full(shape, 0.25, dtype=np.float32)
        else:
            if leaf.startswith("w"):
                fan_in = int(np.prod(shape[1:]))
            else:  # biases use their companion matrix's bound: bias->weight, b_ih->w_ih, bq->wq
                stem = name.rsplit(".", 1)[0]
                mat = f"{stem}.weight" if leaf == "bias" else f"{stem}.w{leaf[1:]}"
                fan_in = int(np.prod(shapes[mat][1:]))
            k = 1.0 / np.sqrt(fan_in)
            arrays[name] = rng.uniform(-k, k, size=shape).astype(np.float32)
    return WeightStore(arrays)


def save_weights(ws: WeightStore, directory, cfg: ModelConfig | None = None):
    """Write blob + manifest (+ config when given) into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    offset = 0
    chunks = []
    for name in ws.names():
        arr = ws[name]
        data = arr.astype("<f4", copy=False).tobytes()
        shape = ",".join(str(s) for s in arr.shape)
        records.append(f"{name} float32 {shape} {offset} {_checksum(data)}")
        chunks.append(data)
        offset += len(data)
    (directory / BLOB_NAME).write_bytes(b"".join(chunks))
    (directory / MANIFEST_NAME).write_text("\n".join(records) + "\n")
    if cfg is not None:
        (directory / CONFIG_NAME).write_text(cfg.to_text())


def load_config(directory) -> ModelConfig:
    path = Path(directory) / CONFIG_NAME
    if not path.exists():
        raise FileNotFoundError(f"model config not found: {path}")
    return ModelConfig.from_text(path.read_text())


def load_weights(directory, cfg: ModelConfig | None = None) -> WeightStore:
    """Read a store back, verifying checksums and the config's inventory.

    When ``cfg`` is omitted it is read from the directory's config file.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    blob_path = directory / BLOB_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"weight manifest not found: {manifest_path}")
    if not blob_path.exists():
        raise FileNotFoundError(f"weight blob not found: {blob_path}")
    if cfg is None:
        cfg = load_config(directory)

    blob = blob_path.read_bytes()
    arrays = {}
    for line in manifest_path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            name, dtype, shape_s, offset_s, checksum = line.split()
        except ValueError:
            raise WeightStoreError(line, f"malformed manifest record: {line!r}") from None
        if dtype != "float32":
            raise WeightStoreError(name, f"parameter {name!r} has unsupported dtype {dtype}")
        shape = tuple(int(s) for s in shape_s.split(","))
        offset = int(offset_s)
        nbytes = int(np.prod(shape)) * 4
        data = blob[offset : offset + nbytes]
        if len(data) != nbytes:
            raise WeightStoreError(name, f"blob truncated while reading parameter {name!r}")
        if _checksum(data) != checksum:
            raise ChecksumError(name)
        arrays[name] = np.frombuffer(data, dtype="<f4").reshape(shape)

    store = WeightStore(arrays)
    store.validate(cfg)
    return store
