"""Clocked bit extraction, error accounting, and von Neumann unbiasing.

A free-running clock of frequency f slices time into periods.  A period
holding exactly one D1D2 or D3D4 coincidence records a 0 or 1 at that
period's index; a period holding two or more records an error symbol at
the next clock pulse.  The expected error fraction for a Poisson
coincidence stream of rate R is modeled as R / (2 f).

Error symbols never enter the bit stream handed to the unbiaser: they are
logged separately, mirroring a recording clock fast enough that error
bits are absent from the kept data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .timetag import CoincidenceStream, PairLabel, UnsortedInput

FS_PER_SECOND = 10**15

_INT64_MAX = np.iinfo(np.int64).max


class CrossArmLabelPresent(ValueError):
    pass


class ModelOutOfRange(ValueError):
    pass


class EmptyStream(ValueError):
    pass


class Symbol(IntEnum):
    ZERO = 0
    ONE = 1
    ERROR = 2


@dataclass(frozen=True)
class ClockConfig:
    """Counting clock; period k covers [k/f, (k+1)/f)."""

    frequency_hz: float

    def __post_init__(self) -> None:
        if not (self.frequency_hz > 0.0) or not math.isfinite(self.frequency_hz):
            raise ValueError(f"frequency_hz must be > 0, got {self.frequency_hz}")

    @property
    def period_fs(self) -> int:
        """Clock period quantized to integer femtoseconds."""
        return round(FS_PER_SECOND / self.frequency_hz)


@dataclass(frozen=True)
class BitRecord:
    symbol: Symbol
    clock_index: int


class BitRecordStream(Sequence):
    """Clock-ordered records as parallel arrays; indices strictly increase."""

    def __init__(self, symbols: np.ndarray, clock_indices: np.ndarray):
        self.symbols = np.asarray(symbols, dtype=np.int8)
        self.clock_indices = np.asarray(clock_indices, dtype=np.int64)
        if len(self.symbols) != len(self.clock_indices):
            raise ValueError("symbols and clock_indices must have equal length")

    @classmethod
    def from_records(cls, records: Iterable[BitRecord]) -> "BitRecordStream":
        records = list(records)
        return cls(
            np.array([int(r.symbol) for r in records], dtype=np.int8),
            np.array([r.clock_index for r in records], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return BitRecordStream(self.symbols[i], self.clock_indices[i])
        return BitRecord(Symbol(int(self.symbols[i])), int(self.clock_indices[i]))

    def __iter__(self) -> Iterator[BitRecord]:
        for s, k in zip(self.symbols, self.clock_indices):
            yield BitRecord(Symbol(int(s)), int(k))

    def counts(self) -> dict:
        c = np.bincount(self.symbols, minlength=3)
        return {Symbol.ZERO: int(c[0]), Symbol.ONE: int(c[1]), Symbol.ERROR: int(c[2])}


class BitStream:
    """A packed-friendly sequence of 0/1 bits with zero/one tallies."""

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if len(arr) and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        self.bits = arr

    @classmethod
    def from_string(cls, text: str) -> "BitStream":
        cleaned = text.replace("\n", "").replace("\r", "")
        if cleaned and set(cleaned) - {"0", "1"}:
            raise ValueError("bit string may only contain '0' and '1'")
        return cls(np.frombuffer(cleaned.encode("ascii"), dtype=np.uint8) - ord("0"))

    def __len__(self) -> int:
        return len(self.bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, BitStream) and np.array_equal(self.bits, other.bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def ones(self) -> int:
        return int(self.bits.sum())

    @property
    def zeros(self) -> int:
        return self.n - self.ones

    def to_string(self) -> str:
        return (self.bits + ord("0")).tobytes().decode("ascii")

    def to_packed(self) -> bytes:
        """8-byte little-endian bit count, then MSB-first packed payload."""
        header = len(self.bits).to_bytes(8, "little")
        return header + np.packbits(self.bits).tobytes()

    @classmethod
    def from_packed(cls, blob: bytes) -> "BitStream":
        if len(blob) < 8:
            raise ValueError("packed bit blob shorter than its 8-byte header")
        n = int.from_bytes(blob[:8], "little")
        need = (n + 7) // 8
        payload = np.frombuffer(blob[8 : 8 + need], dtype=np.uint8)
        if len(payload) != need:
            raise ValueError("packed bit blob truncated")
        return cls(np.unpackbits(payload, count=n) if n else np.empty(0, np.uint8))


def records_to_stream(records) -> BitStream:
    """Data bits in clock order; error symbols are dropped (logged apart)."""
    if not isinstance(records, BitRecordStream):
        records = BitRecordStream.from_records(records)
    data = records.symbols[records.symbols != int(Symbol.ERROR)]
    return BitStream(data.astype(np.uint8))


def _period_indices(times_ps: np.ndarray, clock: ClockConfig) -> np.ndarray:
    """Exact clock-period index of each timestamp.

    Works in femtoseconds so common clocks (500 kHz, 3 ns windows) divide
    exactly; falls back to Python integers if the fs product would not fit
    in int64 (runs longer than ~10^6 s).
    """
    period_fs = clock.period_fs
    if len(times_ps) == 0:
        return np.empty(0, dtype=np.int64)
    if int(times_ps[-1]) <= _INT64_MAX // 1000:
        return (times_ps * 1000) // period_fs
    return np.array([(int(t) * 1000) // period_fs for t in times_ps], dtype=np.int64)


def period_occupancy(coincidences: CoincidenceStream, clock: ClockConfig):
    """(period index, event count, first label) per occupied clock period."""
    if not isinstance(coincidences, CoincidenceStream):
        coincidences = CoincidenceStream.from_events(coincidences)
    times = coincidences.times_ps
    if np.any(np.diff(times) < 0):
        raise UnsortedInput("coincidences must be time-sorted")
    periods = _period_indices(times, clock)
    uniq, first, counts = np.unique(periods, return_index=True, return_counts=True)
    first_labels = coincidences.labels[first]
    return uniq, counts, first_labels


def extract_bits(coincidences, clock: ClockConfig) -> BitRecordStream:
    """Clocked bit extraction from qualifying (D1D2/D3D4) coincidences.

    Cross-arm labels must have been routed to the purity monitor first;
    their presence here is an error.  A single-coincidence period k emits
    its data bit at index k; a multi-coincidence period emits one error
    symbol at index k+1.  When an error symbol and a following period's
    data bit would land on the same index, the error keeps it and the data
    bit shifts to the next free index, so every coincidence stays
    accounted for and indices strictly increase.
    """
    if not isinstance(coincidences, CoincidenceStream):
        coincidences = CoincidenceStream.from_events(coincidences)
    if len(coincidences) and np.any(
        (coincidences.labels != int(PairLabel.D1D2))
        & (coincidences.labels != int(PairLabel.D3D4))
    ):
        raise CrossArmLabelPresent(
            "cross-arm coincidence labels must be filtered out before bit extraction"
        )
    uniq, counts, first_labels = period_occupancy(coincidences, clock)
    if len(uniq) == 0:
        return BitRecordStream(np.empty(0, np.int8), np.empty(0, np.int64))

    multi = counts >= 2
    natural = np.where(multi, uniq + 1, uniq)
    symbols = np.where(
        multi,
        np.int8(Symbol.ERROR),
        np.where(first_labels == int(PairLabel.D3D4), np.int8(Symbol.ONE), np.int8(Symbol.ZERO)),
    )
    # Resolve index collisions: each record lands on max(natural, prev+1),
    # i.e. out = cummax(natural - i) + i.
    offsets = np.arange(len(natural), dtype=np.int64)
    out = np.maximum.accumulate(natural - offsets) + offsets
    return BitRecordStream(symbols, out)


def ber_model(rate_hz: float, clock: ClockConfig) -> float:
    """Modeled bit error rate R / (2 f) for coincidence rate R."""
    if not (rate_hz >= 0.0) or not math.isfinite(rate_hz):
        raise ValueError(f"rate_hz must be >= 0, got {rate_hz}")
    ber = rate_hz / (2.0 * clock.frequency_hz)
    if ber > 1.0:
        raise ModelOutOfRange(
            f"R/(2f) = {ber:.4g} exceeds 1; the linear error model does not apply"
        )
    return ber


def empirical_ber(records) -> float:
    """Observed error fraction: errors / all recorded symbols (0 if none)."""
    if not isinstance(records, BitRecordStream):
        records = BitRecordStream.from_records(records)
    total = len(records)
    if total == 0:
        return 0.0
    errors = int(np.count_nonzero(records.symbols == int(Symbol.ERROR)))
    return errors / total


def von_neumann(stream: BitStream) -> BitStream:
    """Pairwise unbiasing: 01 -> 0, 10 -> 1, 00/11 discarded.

    Non-overlapping pairs are consumed left to right; a trailing unpaired
    bit is discarded.  Chunked/parallel callers must split inputs at even
    offsets to preserve the pairing.
    """
    bits = stream.bits
    even = len(bits) - (len(bits) % 2)
    first = bits[0:even:2]
    second = bits[1:even:2]
    return BitStream(first[first != second])


def bias_estimate(stream: BitStream):
    """(fraction of ones, its binomial standard error)."""
    if stream.n == 0:
        raise EmptyStream("cannot estimate bias of an empty bit stream")
    p = stream.ones / stream.n
    return p, math.sqrt(p * (1.0 - p) / stream.n)


def expected_yield(p_one: float) -> float:
    """Expected von Neumann output/input length ratio for i.i.d. bias p."""
    if not (0.0 <= p_one <= 1.0):
        raise ValueError("p_one must lie in [0, 1]")
    return p_one * (1.0 - p_one)


# --- bit file formats (shared with the command-line tools) ---------------

_ASCII_LINE = 64


def write_bit_file(stream: BitStream, path, fmt: str = "ascii") -> None:
    if fmt == "ascii":
        text = stream.to_string()
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for i in range(0, len(text), _ASCII_LINE):
                fh.write(text[i : i + _ASCII_LINE])
                fh.write("\n")
    elif fmt == "packed":
        with open(path, "wb") as fh:
            fh.write(stream.to_packed())
    else:
        raise ValueError(f"unknown bit file format {fmt!r}")


def read_bit_file(path, fmt: str = "auto") -> BitStream:
    """Read either bit file format; 'auto' sniffs ASCII 0/1 content."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if fmt == "auto":
        fmt = "ascii" if not blob or not set(blob) - set(b"01\r\n") else "packed"
    if fmt == "ascii":
        return BitStream.from_string(blob.decode("ascii"))
    if fmt == "packed":
        return BitStream.from_packed(blob)
    raise ValueError(f"unknown bit file format {fmt!r}")


def write_error_log(path, records, coincidences, clock: ClockConfig) -> None:
    """CSV of error records: emitted clock index and period occupancy."""
    if not isinstance(records, BitRecordStream):
        records = BitRecordStream.from_records(records)
    uniq, counts, _ = period_occupancy(coincidences, clock)
    occupancy = dict(zip(uniq.tolist(), counts.tolist()))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("clock_index,n_events_in_period\n")
        for sym, idx in zip(records.symbols, records.clock_indices):
            if sym == int(Symbol.ERROR):
                # the error was emitted one pulse after its period
                fh.write(f"{int(idx)},{occupancy.get(int(idx) - 1, 0)}\n")
