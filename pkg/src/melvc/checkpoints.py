"""Binary checkpoint container for model parameters.

Layout: 4-byte magic ``VCCK``, u32 format version, u64 header length,
UTF-8 JSON header, raw little-endian array payload, u32 CRC32 trailer
over everything before it.  The header describes the model
configuration, every array (name/shape/dtype, in payload order) and a
free-form ``meta`` dict recording how the file was produced (training
step, adaptation target, and so on).

Arrays are stored at full float64 precision in deterministic order, so
save -> load -> save produces byte-identical files and a round-trip
reconstructs every parameter bit-exactly.
"""

import json
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import CorruptCheckpoint, IncompatibleCheckpoint, MissingCheckpoint
from .model import ModelConfig, ParameterPartition

MAGIC = b"VCCK"
FORMAT_VERSION = 1

_EXTRA_PREFIX = "extra/"


def _config_to_dict(config: ModelConfig) -> dict:
    return asdict(config)


def _config_from_dict(doc: dict) -> ModelConfig:
    kwargs = dict(doc)
    for key in ("linguistic_widths", "acoustic_widths", "decoder_widths", "bias_sites"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return ModelConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise IncompatibleCheckpoint(f"bad model config in header: {exc}") from exc


def save_checkpoint(path, partition: ParameterPartition, meta=None, extras=None):
    """Write the partition (plus optional named extra arrays) to ``path``."""
    arrays = list(partition.named_arrays())
    for key in sorted(extras or {}):
        arrays.append((_EXTRA_PREFIX + key, np.asarray(extras[key])))

    header = {
        "model_config": _config_to_dict(partition.config),
        "arrays": [
            {"name": name, "shape": list(a.shape), "dtype": str(a.dtype)}
            for name, a in arrays
        ],
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
        for _, a in arrays
    )
    blob = MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(header_bytes)) + header_bytes + payload
    blob += struct.pack("<I", zlib.crc32(blob))
    Path(path).write_bytes(blob)


def load_checkpoint(path):
    """Returns (partition, meta, extras).  Corruption (bad magic, CRC or
    sizes) raises CorruptCheckpoint; an unknown format version or an
    incomplete parameter set raises IncompatibleCheckpoint."""
    path = Path(path)
    if not path.exists():
        raise MissingCheckpoint(str(path))
    blob = path.read_bytes()
    if len(blob) < 20 or blob[:4] != MAGIC:
        raise CorruptCheckpoint(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<IQ", blob[4:16])
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpoint(
            f"{path}: format version {version}, expected {FORMAT_VERSION}"
        )
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise CorruptCheckpoint(f"{path}: CRC mismatch (truncated or corrupted)")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header: {exc}") from exc

    config = _config_from_dict(header["model_config"])
    offset = 16 + header_len
    named = {}
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64)) if spec["shape"] else 1
        nbytes = dtype.itemsize * count
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CorruptCheckpoint(f"{path}: payload shorter than declared arrays")
        named[spec["name"]] = (
            np.frombuffer(chunk, dtype=dtype).reshape(spec["shape"]).copy()
        )
        offset += nbytes
    if offset != len(blob) - 4:
        raise CorruptCheckpoint(f"{path}: trailing bytes after declared arrays")

    extras = {
        name[len(_EXTRA_PREFIX):]: arr
        for name, arr in named.items()
        if name.startswith(_EXTRA_PREFIX)
    }
    partition = _partition_from_arrays(
        config, {n: a for n, a in named.items() if not n.startswith(_EXTRA_PREFIX)}, path
    )
    return partition, header.get("meta", {}), extras


def _partition_from_arrays(config, named, path):
    groups = {"linguistic_encoder": {}, "acoustic_encoder": {}, "decoder_core": {}}
    speaker_biases = {}
    for name, array in named.items():
        head, _, rest = name.partition("/")
        if head in groups:
            groups[head][rest] = array
        elif head == "speaker_biases":
            speaker_id, _, key = rest.partition("/")
            speaker_biases.setdefault(speaker_id, {})[key] = array
        else:
            raise IncompatibleCheckpoint(f"{path}: unknown parameter group in {name!r}")

    partition = ParameterPartition(
        config,
        groups["linguistic_encoder"],
        groups["acoustic_encoder"],
        groups["decoder_core"],
        speaker_biases,
    )
    _validate_completeness(partition, path)
    return partition


def _validate_completeness(partition, path):
    cfg = partition.config

    def expect(group, keys):
        missing = [k for k in keys if k not in group]
        if missing:
            raise IncompatibleCheckpoint(f"{path}: checkpoint missing arrays {missing}")

    for group, widths, heads in (
        (partition.linguistic_encoder, cfg.linguistic_widths, ("mu", "lv")),
        (partition.acoustic_encoder, cfg.acoustic_widths, ("mu", "lv")),
        (partition.decoder_core, cfg.decoder_widths, ("out",)),
    ):
        keys = [f"h{i}/{p}" for i in range(1, len(widths) + 1) for p in ("W", "b")]
        keys += [f"{h}/{p}" for h in heads for p in ("W", "b")]
        expect(group, keys)
    for speaker_id, biases in partition.speaker_biases.items():
        expect(biases, [f"site{s}" for s in cfg.bias_sites])
