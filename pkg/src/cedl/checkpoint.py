"""Binary checkpoint format.

Layout::

    b"CEDL1\\n"                       magic and format version
    uint64 little-endian             header length in bytes
    header                           UTF-8 JSON, keys sorted
    payload                          float64 little-endian arrays, row-major

The header lists every array of the payload (name and shape) in order,
the payload length and its CRC-32, plus layer specs, objective settings,
optimizer constants and training provenance. Floats that must round-trip
bit-exactly (parameters, centre, head) live in the payload only.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderModel, LayerSpec, forward
from .exceptions import DimensionError, FormatError, IntegrityError
from .numerics import stable_sigmoid
from .objective import ObjectiveConfig

MAGIC = b"CEDL1\n"
FORMAT_VERSION = 1
_LEN = struct.Struct("<Q")


@dataclass
class Checkpoint:
    model: EncoderModel
    objective: str
    objective_config: ObjectiveConfig
    head_params: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @classmethod
    def from_report(cls, report, **provenance):
        prov = {"seed": report.seed, "best_loss": report.best_loss,
                "best_epoch": report.best_epoch, **provenance}
        return cls(report.model, report.objective, report.objective_config,
                   dict(report.head_params), dict(report.optimizer), prov)

    @classmethod
    def from_estimator(cls, est, **provenance):
        return cls.from_report(est.train_report_, **provenance)

    def embed(self, X):
        R, _ = forward(self.model, X)
        return R

    def score(self, X):
        """``(representations, distance, probability)`` for a batch.

        ``distance`` is ``||r - c||``. ``probability`` is
        ``sigmoid(alpha/sqrt(D) * distance)``, or ``sigmoid(<u, r> + b)``
        for a BCE checkpoint.
        """
        R = self.embed(X)
        cfg = self.objective_config
        dist = np.linalg.norm(R - cfg.centre, axis=1)
        if self.objective == "bce":
            prob = stable_sigmoid(self.logit(R))
        else:
            prob = stable_sigmoid(cfg.scale * dist)
        return R, dist, prob

    def logit(self, R):
        return R @ self.head_params["u"] + float(self.head_params["b"][0])

    def decision_function(self, X):
        """Ranking score: the BCE logit, or distance for every other objective."""
        R, dist, _ = self.score(X)
        return self.logit(R) if self.objective == "bce" else dist


def _arrays(ckpt):
    out = []
    for k, (w, b) in enumerate(zip(ckpt.model.weights, ckpt.model.biases)):
        out += [(f"W{k}", w), (f"b{k}", b)]
    out.append(("centre", ckpt.objective_config.centre))
    for name in sorted(ckpt.head_params):
        out.append((f"head_{name}", np.asarray(ckpt.head_params[name])))
    return out


def to_bytes(ckpt):
    arrays = _arrays(ckpt)
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    cfg = ckpt.objective_config
    header = {
        "format_version": FORMAT_VERSION,
        "layers": [s.to_dict() for s in ckpt.model.layers],
        "objective": ckpt.objective,
        "objective_config": {"alpha": cfg.alpha, "w0": cfg.w0, "w1": cfg.w1,
                             "centre_mode": cfg.centre_mode},
        "optimizer": ckpt.optimizer,
        "provenance": ckpt.provenance,
        "arrays": [{"name": n, "shape": list(np.shape(a))} for n, a in arrays],
        "payload_bytes": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LEN.pack(len(head)) + head + payload


def from_bytes(blob):
    if not blob.startswith(MAGIC):
        raise FormatError("not a CEDL checkpoint (bad magic or version)")
    pos = len(MAGIC)
    if len(blob) < pos + _LEN.size:
        raise IntegrityError("checkpoint truncated inside the header length")
    (hlen,) = _LEN.unpack_from(blob, pos)
    pos += _LEN.size
    if len(blob) < pos + hlen:
        raise IntegrityError("checkpoint truncated inside the header")
    try:
        header = json.loads(blob[pos:pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable checkpoint header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {header.get('format_version')!r}")
    payload = blob[pos + hlen:]
    if len(payload) != header["payload_bytes"]:
        raise IntegrityError(f"payload has {len(payload)} bytes, header says {header['payload_bytes']}")
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise IntegrityError("payload checksum mismatch")

    arrays, off = {}, 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64))
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=n, offset=off) \
            .astype(np.float64).reshape(shape)
        off += 8 * n

    layers = [LayerSpec(**s) for s in header["layers"]]
    params = []
    for k in range(len(layers)):
        params += [arrays[f"W{k}"], arrays[f"b{k}"]]
    model = EncoderModel(layers, params[0::2], params[1::2])
    oc = header["objective_config"]
    cfg = ObjectiveConfig(oc["alpha"], oc["w0"], oc["w1"], arrays["centre"], oc["centre_mode"])
    head = {name[5:]: a for name, a in arrays.items() if name.startswith("head_")}
    return Checkpoint(model, header["objective"], cfg, head, header["optimizer"], header["provenance"])


def save_checkpoint(ckpt, path):
    blob = to_bytes(ckpt)
    with open(path, "wb") as fh:
        fh.write(blob)
    return path


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def check_width(ckpt, X):
    if X.shape[1] != ckpt.model.input_dim:
        raise DimensionError(f"data has {X.shape[1]} features, checkpoint expects {ckpt.model.input_dim}")
