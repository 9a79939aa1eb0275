"""Versioned binary container for trained models.

Layout::

    <magic>\\n                 e.g. ``seqtag-crf-v1``
    <json header>\\n           metadata + array manifest + payload sha256
    <payload>                 arrays as raw little-endian float64, manifest order

Floats are stored as their exact IEEE-754 bytes, so save/load round-trips bit-for-bit.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .corpus import LabelScheme
from .errors import CorruptFile, VersionMismatch
from .features import FEATURE_GRAMMAR_VERSION, FeatureConfig, FeatureIndex, Gazetteer
from .utils import atomic_write

CRF_MAGIC = "seqtag-crf-v1"
BILSTM_MAGIC = "seqtag-bilstm-v1"
_DTYPE = np.dtype("<f8")


def write_container(path, magic: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    chunks, manifest = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype=_DTYPE)
        manifest.append({"name": name, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
    payload = b"".join(chunks)
    header = dict(meta, arrays=manifest, sha256=hashlib.sha256(payload).hexdigest())
    blob = magic.encode() + b"\n" + json.dumps(header, sort_keys=True).encode() + b"\n" + payload
    atomic_write(path, blob)


def read_magic(path) -> str:
    with open(path, "rb") as fh:
        line = fh.readline(64)
    if not line.startswith(b"seqtag-") or not line.endswith(b"\n"):
        raise CorruptFile(f"{path}: not a seqtag model file")
    return line[:-1].decode("ascii", "replace")


def read_container(path, magic: str) -> tuple[dict, dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    found = read_magic(path)
    if found != magic:
        family = magic.rsplit("-v", 1)[0]
        if found.rsplit("-v", 1)[0] == family:
            raise VersionMismatch(f"{path}: file format {found!r}, this build reads {magic!r}")
        raise CorruptFile(f"{path}: expected {magic!r}, found {found!r}")
    rest = blob[len(found) + 1:]
    nl = rest.find(b"\n")
    if nl < 0:
        raise CorruptFile(f"{path}: truncated header")
    try:
        header = json.loads(rest[:nl].decode("utf-8"))
        manifest = header["arrays"]
    except (ValueError, KeyError) as exc:
        raise CorruptFile(f"{path}: unreadable header ({exc})") from None
    payload = rest[nl + 1:]
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise CorruptFile(f"{path}: payload checksum mismatch")
    arrays, offset = {}, 0
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * _DTYPE.itemsize
        if offset + nbytes > len(payload):
            raise CorruptFile(f"{path}: payload shorter than manifest")
        arrays[entry["name"]] = np.frombuffer(payload, _DTYPE, count, offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(payload):
        raise CorruptFile(f"{path}: trailing bytes after payload")
    if header.get("feature_grammar_version", FEATURE_GRAMMAR_VERSION) != FEATURE_GRAMMAR_VERSION:
        raise VersionMismatch(f"{path}: feature grammar v{header['feature_grammar_version']}")
    return header, arrays


def save_crf(model, path) -> None:
    meta = {
        "kind": "crf",
        "format_version": 1,
        "feature_grammar_version": FEATURE_GRAMMAR_VERSION,
        "entity_types": list(model.scheme.entity_types),
        "feature_config": vars(model.feature_config),
        "gazetteer": model.gazetteer.to_lines(),
        "features": model.index.strings,
    }
    write_container(path, CRF_MAGIC, meta, model.params())


def load_crf(path):
    from .crf import CrfModel

    header, arrays = read_container(path, CRF_MAGIC)
    try:
        scheme = LabelScheme(tuple(header["entity_types"]))
        index = FeatureIndex(header["features"]).freeze()
        model = CrfModel(
            scheme, index, FeatureConfig(**header["feature_config"]), Gazetteer.from_lines(header["gazetteer"]),
            arrays["unary"], arrays["transitions"], arrays["begin"], arrays["end"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: inconsistent model ({exc})") from None
    L = len(scheme)
    if model.unary.shape != (len(index), L) or model.transitions.shape != (L, L):
        raise CorruptFile(f"{path}: weight shapes do not match scheme/index")
    return model


def load_model(path):
    """Load either model kind, dispatching on the magic line."""
    magic = read_magic(path)
    if magic.startswith("seqtag-bilstm-"):
        from .bilstm import load_bilstm

        return load_bilstm(path)
    return load_crf(path)
