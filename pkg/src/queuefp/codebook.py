"""Secret fingerprint codebook: generation, scaling, serialization.

Each codeword is one realization of a Poisson(lambda) process on [0, T2],
stored as inter-packet delays. Regeneration from (seed, M, lambda, T2) is
bit-identical, and the binary format round-trips exactly.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import rng_for

_MAGIC = b"QFCB"
_VERSION = 1


@dataclass(frozen=True)
class Codeword:
    """Inter-packet delays of one fingerprint.

    An empty delay list is the degenerate one-packet codeword: a single
    release at the start of the fingerprinting phase. ``scale_num`` and
    ``scale_den`` carry the rate ratio applied by :func:`scale_codeword`
    as an exact pair, and ``base_delays`` the pre-scaling delays, so the
    scale/rescale round trip is bit-exact.
    """

    delays: np.ndarray
    rate: float
    horizon: float
    scale_num: float = 1.0
    scale_den: float = 1.0
    base_delays: np.ndarray | None = None

    def __post_init__(self) -> None:
        delays = np.asarray(self.delays, dtype=np.float64)
        object.__setattr__(self, "delays", delays)
        if delays.size and np.any(delays <= 0):
            raise ValueError("all inter-packet delays must be positive")
        if float(delays.sum()) > self.horizon:
            raise ValueError("codeword exceeds its phase horizon")

    @property
    def n_packets(self) -> int:
        """Packets released when this codeword is applied."""
        return max(int(self.delays.size), 1)

    def release_offsets(self) -> np.ndarray:
        """Release epochs relative to the fingerprinting-phase start."""
        if self.delays.size == 0:
            return np.zeros(1)
        return np.cumsum(self.delays)


@dataclass(frozen=True)
class Codebook:
    codewords: tuple[Codeword, ...]
    seed: int
    rate: float
    horizon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "codewords", tuple(self.codewords))

    @property
    def M(self) -> int:
        return len(self.codewords)

    def __getitem__(self, idx: int) -> Codeword:
        return self.codewords[idx]


def generate_codebook(M: int, lam: float, T2: float, seed: int) -> Codebook:
    """M independent codewords, each a Poisson(lam) realization on [0, T2].

    Per codeword: draw N ~ Poisson(lam * T2), place N points uniformly on
    [0, T2], sort, and store successive differences (first delay measured
    from time zero). Coincident points are nudged apart by one ulp.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if lam <= 0 or T2 <= 0:
        raise ValueError("rate and horizon must be positive")
    rng = rng_for(seed)
    codewords = []
    for _ in range(M):
        n = int(rng.poisson(lam * T2))
        points = np.sort(rng.uniform(0.0, T2, size=n))
        points = _separate(points)
        delays = np.diff(points, prepend=0.0)
        codewords.append(Codeword(delays=delays, rate=lam, horizon=T2))
    return Codebook(codewords=tuple(codewords), seed=seed, rate=lam, horizon=T2)


def _separate(points: np.ndarray) -> np.ndarray:
    while points.size >= 2:
        dup = np.flatnonzero(np.diff(points) <= 0)
        if dup.size == 0:
            break
        points = points.copy()
        points[dup + 1] = np.nextafter(points[dup], np.inf)
    return points


def scale_codeword(cw: Codeword, lambda_i: float, lambda_min: float) -> Codeword:
    """Re-time the base-rate codeword for a rate-lambda_i flow.

    Delays shrink by lambda_min / lambda_i, so the scaled fingerprint looks
    like a Poisson(lambda_i) burst and spans horizon * lambda_min / lambda_i
    seconds. The original delays and the exact rate pair are retained so
    :func:`unscale_codeword` recovers them bit-exactly.
    """
    if not lambda_i >= lambda_min > 0:
        raise ValueError("requires lambda_i >= lambda_min > 0")
    if lambda_i == lambda_min:
        return cw
    scaled = cw.delays * (lambda_min / lambda_i)
    return Codeword(
        delays=scaled,
        rate=cw.rate,
        horizon=cw.horizon,
        scale_num=lambda_i,
        scale_den=lambda_min,
        base_delays=cw.delays,
    )


def unscale_codeword(cw: Codeword) -> Codeword:
    """Invert :func:`scale_codeword`; identity for unscaled codewords."""
    if cw.base_delays is None:
        return cw
    return Codeword(delays=cw.base_delays, rate=cw.rate, horizon=cw.horizon)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_codebook(cb: Codebook, path: str | Path) -> None:
    """Bit-exact binary format: header + length-prefixed little-endian f64."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQddQ", _VERSION, cb.M, cb.rate, cb.horizon, cb.seed))
        for cw in cb.codewords:
            fh.write(struct.pack("<Q", cw.delays.size))
            fh.write(cw.delays.astype("<f8").tobytes())


def load_codebook(path: str | Path) -> Codebook:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not a codebook file (magic {magic!r})")
        version, M, rate, horizon, seed = struct.unpack("<IQddQ", fh.read(36))
        if version != _VERSION:
            raise ValueError(f"unsupported codebook version {version}")
        codewords = []
        for _ in range(M):
            (n,) = struct.unpack("<Q", fh.read(8))
            delays = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
            codewords.append(Codeword(delays=delays, rate=rate, horizon=horizon))
    return Codebook(codewords=tuple(codewords), seed=seed, rate=rate, horizon=horizon)


def codebook_to_json(cb: Codebook, path: str | Path) -> None:
    """Debug export. Decimal text is lossy in the last digit; non-canonical."""
    doc = {
        "non_canonical": True,
        "M": cb.M,
        "rate": cb.rate,
        "horizon": cb.horizon,
        "seed": cb.seed,
        "codewords": [[float(d) for d in cw.delays] for cw in cb.codewords],
    }
    Path(path).write_text(json.dumps(doc, indent=1))
