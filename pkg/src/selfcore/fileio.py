"""Readers and writers for ``.actv`` traces, ``.mlpw`` weights and CSV traces.

``.actv`` layout (all integers little-endian)::

    "ACTV"  version:u32  id_len:u16 checkpoint_id  run_len:u16 run_id
    cycle:u32  behavior:u8  layer:u16  H:u32  T:u32  H*T float32 (row-major)

Behavior codes are 0=walk, 1=wiggle, 2=bob, 3=other. Any behavior name outside
the first three is written as 3 and read back as ``"other"``.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, NonFiniteValue, TraceFormatError, TruncatedPayload, VersionUnsupported
from .traces import ActivationTrace, DenseLayer, MlpWeights

MAGIC = b"ACTV"
VERSION = 1
_BEHAVIOR_CODES = {"walk": 0, "wiggle": 1, "bob": 2}
_BEHAVIOR_NAMES = {0: "walk", 1: "wiggle", 2: "bob", 3: "other"}


def encode_trace(trace: ActivationTrace) -> bytes:
    cid = trace.checkpoint_id.encode("utf-8")
    rid = trace.run_id.encode("utf-8")
    if len(cid) > 0xFFFF or len(rid) > 0xFFFF:
        raise TraceFormatError("identifier longer than 65535 bytes")
    H, T = trace.values.shape
    payload = np.ascontiguousarray(trace.values, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise NonFiniteValue("values overflow float32")
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<H", len(cid)),
        cid,
        struct.pack("<H", len(rid)),
        rid,
        struct.pack("<IBHII", trace.cycle, _BEHAVIOR_CODES.get(trace.behavior, 3), trace.layer, H, T),
        payload.tobytes(),
    ]
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedPayload(f"needed {n} bytes at offset {self.pos}, file has {len(self.buf)}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_trace(buf: bytes) -> ActivationTrace:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise BadMagic("not an .actv file (magic mismatch)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise VersionUnsupported(f".actv version {version} (supported: {VERSION})")
    (n,) = r.unpack("<H")
    checkpoint_id = r.take(n).decode("utf-8")
    (n,) = r.unpack("<H")
    run_id = r.take(n).decode("utf-8")
    cycle, behavior, layer, H, T = r.unpack("<IBHII")
    if behavior not in _BEHAVIOR_NAMES:
        raise TraceFormatError(f"unknown behavior code {behavior}")
    payload = r.take(4 * H * T)
    if r.pos != len(buf):
        raise TraceFormatError(f"{len(buf) - r.pos} trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(H, T)
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue(f"non-finite activation in {checkpoint_id!r}")
    return ActivationTrace(
        checkpoint_id=checkpoint_id,
        run_id=run_id,
        cycle=cycle,
        behavior=_BEHAVIOR_NAMES[behavior],
        layer=layer,
        values=values.astype(np.float64),
    )


def write_trace(trace: ActivationTrace, path) -> None:
    Path(path).write_bytes(encode_trace(trace))


def read_trace(path) -> ActivationTrace:
    return decode_trace(Path(path).read_bytes())


def write_matrix(matrix: np.ndarray, path, *, name: str = "matrix", run_id: str = "", layer: int = 0) -> None:
    """Store a square matrix (e.g. a reordered ``|R|``) in the ``.actv`` container."""
    m = np.asarray(matrix, dtype=np.float64)
    trace = ActivationTrace(checkpoint_id=name, run_id=run_id, cycle=0, behavior="other", layer=layer, values=m)
    write_trace(trace, path)


def read_mlpw(path) -> MlpWeights:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return mlpw_from_dict(doc)


def mlpw_from_dict(doc: dict) -> MlpWeights:
    try:
        layers = [DenseLayer(w=l["w"], b=l["b"], act=l.get("act", "relu")) for l in doc["layers"]]
        return MlpWeights(input_dim=int(doc["input_dim"]), layers=layers)
    except KeyError as e:
        raise TraceFormatError(f".mlpw document missing key {e}") from None


def write_mlpw(weights: MlpWeights, path) -> None:
    doc = {
        "input_dim": weights.input_dim,
        "layers": [{"w": l.w.tolist(), "b": l.b.tolist(), "act": l.act} for l in weights.layers],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def read_trace_csv(path, *, checkpoint_id: str | None = None, run_id: str = "", cycle: int = 0,
                   behavior: str = "other", layer: int = 0) -> ActivationTrace:
    """Import a hand-written trace: header ``neuron,s0,s1,...`` then one row per neuron."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "neuron":
        raise TraceFormatError("CSV trace must start with a 'neuron,s0,s1,...' header")
    T = len(rows[0]) - 1
    body = [r for r in rows[1:] if r]
    order = [int(r[0]) for r in body]
    if sorted(order) != list(range(len(body))):
        raise TraceFormatError("neuron column must enumerate 0..H-1")
    values = np.empty((len(body), T))
    for r in body:
        if len(r) != T + 1:
            raise TruncatedPayload(f"neuron {r[0]} has {len(r) - 1} values, expected {T}")
        values[int(r[0])] = [float(v) for v in r[1:]]
    return ActivationTrace(
        checkpoint_id=checkpoint_id if checkpoint_id is not None else path.stem,
        run_id=run_id,
        cycle=cycle,
        behavior=behavior,
        layer=layer,
        values=values,
    )
