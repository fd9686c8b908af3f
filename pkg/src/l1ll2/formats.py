"""On-disk formats for signals, maps, run configuration and CSV exports.

Binary files are a text header followed by a little-endian float64 payload::

    L1LL2 <KIND> <version>\\n
    <one line of JSON>\\n
    END\\n
    <payload bytes>

Payloads are column-major flattenings (``vec``) of the 2D array described by
the header, so a signal payload is exactly the data vector ``s`` and a map
payload is ``f``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .kernels import vec

__all__ = [
    "FORMAT_VERSION",
    "ParseError",
    "SignalFile",
    "MapFile",
    "RunConfig",
    "write_signal",
    "read_signal",
    "write_map",
    "read_map",
    "write_csv",
    "contour_rows",
    "projection_rows",
]

FORMAT_VERSION = 1
MAGIC = b"L1LL2"
_DTYPE = np.dtype("<f8")


class ParseError(ValueError):
    """Malformed file; ``offset`` is the byte position of the problem."""

    def __init__(self, msg: str, offset: int, path=None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}{msg} (at byte {offset})")
        self.offset = offset


def _encode(kind: str, header: dict, payload: np.ndarray) -> bytes:
    head = json.dumps(header, sort_keys=True, allow_nan=False, separators=(",", ":"))
    return (
        b"%s %s %d\n" % (MAGIC, kind.encode(), FORMAT_VERSION)
        + head.encode()
        + b"\nEND\n"
        + np.ascontiguousarray(payload, dtype=_DTYPE).tobytes()
    )


def _decode(data: bytes, kind: str, path=None) -> tuple[dict, np.ndarray]:
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("missing magic line", 0, path)
    parts = data[:nl].split(b" ")
    if len(parts) != 3 or parts[0] != MAGIC:
        raise ParseError("not an L1LL2 file", 0, path)
    if parts[1].decode(errors="replace") != kind:
        raise ParseError(f"expected a {kind} file, found {parts[1].decode(errors='replace')}", len(MAGIC) + 1, path)
    try:
        version = int(parts[2])
    except ValueError:
        raise ParseError("bad version tag", len(MAGIC) + len(parts[1]) + 2, path) from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version} (this reader handles {FORMAT_VERSION})",
                         len(MAGIC) + len(parts[1]) + 2, path)
    start = nl + 1
    end = data.find(b"\nEND\n", start)
    if end < 0:
        raise ParseError("header terminator not found", start, path)
    try:
        header = json.loads(data[start:end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        pos = getattr(exc, "pos", getattr(exc, "start", 0))
        raise ParseError(f"invalid header: {exc}", start + pos, path) from None
    if not isinstance(header, dict):
        raise ParseError("header is not a JSON object", start, path)
    body = end + len(b"\nEND\n")
    nbytes = len(data) - body
    if nbytes % _DTYPE.itemsize:
        raise ParseError("payload is not a whole number of float64 values", body, path)
    return header, np.frombuffer(data, dtype=_DTYPE, offset=body).astype(float)


def _require(header: dict, keys, offset, path):
    missing = [k for k in keys if k not in header]
    if missing:
        raise ParseError(f"header missing {missing}", offset, path)


@dataclass
class SignalFile:
    """A 2D acquisition ``S[t1, t2]`` with its time grids."""

    S: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    kind: str = "IR_CPMG"
    t1_spacing: str = "logarithmic"
    t2_spacing: str = "linear"
    delta: float | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def s(self) -> np.ndarray:
        return vec(self.S)


@dataclass
class MapFile:
    """A relaxation map ``F[T1, T2]`` with its relaxation grids."""

    F: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def f(self) -> np.ndarray:
        return vec(self.F)


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=float)]


def write_signal(path, sig: SignalFile) -> None:
    S = np.asarray(sig.S, dtype=float)
    if S.shape != (len(sig.t1), len(sig.t2)):
        raise ValueError(f"signal shape {S.shape} does not match grids ({len(sig.t1)}, {len(sig.t2)})")
    header = {
        "kind": sig.kind,
        "M1": S.shape[0],
        "M2": S.shape[1],
        "t1": _floats(sig.t1),
        "t2": _floats(sig.t2),
        "t1_spacing": sig.t1_spacing,
        "t2_spacing": sig.t2_spacing,
        "delta": sig.delta,
        "seed": sig.seed,
        "order": "column-major",
        "extra": sig.extra,
    }
    Path(path).write_bytes(_encode("SIGNAL", header, vec(S)))


def read_signal(path) -> SignalFile:
    data = Path(path).read_bytes()
    header, payload = _decode(data, "SIGNAL", path)
    _require(header, ("kind", "M1", "M2", "t1", "t2"), 0, path)
    m1, m2 = int(header["M1"]), int(header["M2"])
    if m1 <= 0 or m2 <= 0:
        raise ParseError("non-positive dimensions in header", 0, path)
    if len(header["t1"]) != m1 or len(header["t2"]) != m2:
        raise ParseError("time grid lengths do not match dimensions", 0, path)
    if payload.size != m1 * m2:
        raise ParseError(f"payload has {payload.size} values, header promises {m1 * m2}",
                         len(data) - payload.size * _DTYPE.itemsize, path)
    return SignalFile(
        S=payload.reshape((m1, m2), order="F"),
        t1=np.array(header["t1"], dtype=float),
        t2=np.array(header["t2"], dtype=float),
        kind=header["kind"],
        t1_spacing=header.get("t1_spacing", "logarithmic"),
        t2_spacing=header.get("t2_spacing", "linear"),
        delta=header.get("delta"),
        seed=header.get("seed"),
        extra=header.get("extra", {}),
    )


def write_map(path, m: MapFile) -> None:
    F = np.asarray(m.F, dtype=float)
    if F.shape != (len(m.T1), len(m.T2)):
        raise ValueError(f"map shape {F.shape} does not match grids ({len(m.T1)}, {len(m.T2)})")
    header = {
        "N1": F.shape[0],
        "N2": F.shape[1],
        "T1": _floats(m.T1),
        "T2": _floats(m.T2),
        "order": "column-major",
        "extra": m.extra,
    }
    Path(path).write_bytes(_encode("MAP", header, vec(F)))


def read_map(path) -> MapFile:
    data = Path(path).read_bytes()
    header, payload = _decode(data, "MAP", path)
    _require(header, ("N1", "N2", "T1", "T2"), 0, path)
    n1, n2 = int(header["N1"]), int(header["N2"])
    if n1 <= 0 or n2 <= 0 or len(header["T1"]) != n1 or len(header["T2"]) != n2:
        raise ParseError("inconsistent map dimensions in header", 0, path)
    if payload.size != n1 * n2:
        raise ParseError(f"payload has {payload.size} values, header promises {n1 * n2}",
                         len(data) - payload.size * _DTYPE.itemsize, path)
    return MapFile(
        F=payload.reshape((n1, n2), order="F"),
        T1=np.array(header["T1"], dtype=float),
        T2=np.array(header["T2"], dtype=float),
        extra=header.get("extra", {}),
    )


@dataclass
class RunConfig:
    """Everything needed to reproduce a simulate or invert run."""

    # phantom
    preset: str = "2pks"
    peaks: list | None = None  # [[T1, T2, amplitude, w1, w2], ...]
    width: float = 0.15
    n1: int | None = None
    n2: int | None = None
    Tmin: float = 0.1
    Tmax: float = 1e4
    # acquisition
    kernel: str = "IR_CPMG"
    m1: int = 128
    m2: int = 2048
    t1_min: float = 0.5
    t1_max: float = 5000.0
    t1_spacing: str = "logarithmic"
    echo_spacing: float = 0.5
    delta: float = 1e-2
    seeds: list = field(default_factory=lambda: [0])
    # solver
    method: str = "L1LL2"
    tau_outer: float = 1e-3
    tau_inner: float = 1e-7
    max_outer: int = 50
    max_inner: int = 5000
    gp_iters: int = 10
    alpha: float | None = None
    # uniform-penalty weights
    beta0: float | None = None
    beta0_mode: str = "data"
    beta0_rel: float | None = None
    beta_p: float = 1.0
    beta_c: float = 1.0
    rho: float = 1e-12
    radius: int = 1
    lambda_rule: str = "neighborhood"

    def to_json(self) -> str:
        return json.dumps({"version": FORMAT_VERSION, "config": asdict(self)}, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        doc = json.loads(text)
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported config version {doc.get('version')!r}")
        return cls.from_dict(doc["config"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else x


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def contour_rows(m: MapFile):
    """Long-format ``(T1, T2, F)`` triples for contour plotting."""
    for j, T2 in enumerate(m.T2):
        for i, T1 in enumerate(m.T1):
            yield float(T1), float(T2), float(m.F[i, j])


def projection_rows(m: MapFile):
    """Marginals of the map onto the T1 axis (row sums) and T2 axis (column sums)."""
    for T, v in zip(m.T1, m.F.sum(axis=1)):
        yield "T1", float(T), float(v)
    for T, v in zip(m.T2, m.F.sum(axis=0)):
        yield "T2", float(T), float(v)
