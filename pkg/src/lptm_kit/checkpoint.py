"""Checkpoint container: magic, JSON header, raw float32 payload.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header, then every state tensor back to back as little-endian float32.
The header carries the model reconstruction record, the tensor index
(name, shape, offset, byte count) and a sha256 over the payload, so a
flipped bit anywhere in the tensor data is caught at load time.  The
header JSON uses sorted keys and fixed separators, which makes
save -> load -> save byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import torch

from .errors import ChecksumError

MAGIC = b"LPTMKIT1"
FORMAT_VERSION = 1


def parameter_checksums(model) -> dict[str, str]:
    """sha256 fingerprint of every state tensor, keyed by name."""
    out = {}
    for name, tensor in sorted(model.state_dict().items()):
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy())
        out[name] = hashlib.sha256(arr.tobytes()).hexdigest()
    return out


def _payload_and_index(model) -> tuple[bytes, list[dict]]:
    chunks = []
    index = []
    offset = 0
    for name, tensor in sorted(model.state_dict().items()):
        if not tensor.is_floating_point():
            raise ChecksumError(f"cannot serialize non-float tensor {name!r}")
        arr = tensor.detach().cpu().contiguous().numpy().astype("<f4")
        raw = arr.tobytes()
        index.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "dtype": "float32",
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    return b"".join(chunks), index


def save_checkpoint(model, path) -> int:
    """Write the model to ``path``; returns total bytes written."""
    payload, index = _payload_and_index(model)
    header = {
        "format_version": FORMAT_VERSION,
        "model": model.hyperparams(),
        "step": model.step,
        "tensors": index,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = MAGIC + struct.pack("<Q", len(encoded)) + encoded + payload
    with open(path, "wb") as handle:
        handle.write(blob)
    return len(blob)


def read_header(path) -> dict:
    """Parse and integrity-check a checkpoint without building the model."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise ChecksumError(f"{path}: not a checkpoint (bad magic)")
    (header_len,) = struct.unpack("<Q", blob[len(MAGIC) : len(MAGIC) + 8])
    start = len(MAGIC) + 8
    if len(blob) < start + header_len:
        raise ChecksumError(f"{path}: truncated header")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumError(f"{path}: unreadable header: {exc}") from None
    payload = blob[start + header_len :]
    expected = sum(entry["nbytes"] for entry in header.get("tensors", []))
    if len(payload) != expected:
        raise ChecksumError(
            f"{path}: payload is {len(payload)} bytes, index expects {expected}"
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("payload_sha256"):
        raise ChecksumError(f"{path}: payload sha256 mismatch")
    header["_payload"] = payload
    return header


def load_checkpoint(path):
    """Rebuild the model from a checkpoint, verifying the payload hash."""
    from .model import LPTMModel

    header = read_header(path)
    payload = header.pop("_payload")
    model = LPTMModel.from_hyperparams(header["model"])
    state = {}
    for entry in header["tensors"]:
        count = entry["nbytes"] // 4
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=entry["offset"])
        state[entry["name"]] = torch.from_numpy(arr.copy()).reshape(entry["shape"])
    missing = set(model.state_dict()) - set(state)
    if missing:
        raise ChecksumError(f"{path}: tensors missing from checkpoint: {sorted(missing)}")
    model.load_state_dict(state, strict=True)
    model.step = int(header.get("step", 0))
    return model
