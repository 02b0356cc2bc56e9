"""DVS event streams, the 42-bit packed event word, and spike rasters.

Text format: ASCII lines ``t x y p`` with t in decimal seconds, single
spaces, LF terminated. Binary format ".ev42": magic ``EV42``, one version
byte, then one 6-byte little-endian record per event holding the 42-bit
packed word (top 6 bits of every record are zero).

Packed word layout (bit 0 = LSB):

    bits [41:17]  timestamp, microseconds, wrapped modulo 2**25
    bits [16:9]   x pixel column (0..239)
    bits [8:1]    y pixel row    (0..179)
    bit  [0]      polarity (OFF=0, ON=1)

The wrapped timestamp covers ~33.5 s; the in-memory Event keeps the full
unwrapped microsecond value, which is authoritative.

All functions here are pure over immutable inputs; stream readers are
single-consumer per source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

SENSOR_WIDTH = 240
SENSOR_HEIGHT = 180

TIMESTAMP_BITS = 25
TIMESTAMP_WRAP_US = 1 << TIMESTAMP_BITS
WORD_BITS = 42

_T_SHIFT = 17
_X_SHIFT = 9
_Y_SHIFT = 1
_FIELD8 = 0xFF

EV42_MAGIC = b"EV42"
EV42_VERSION = 1
EV42_RECORD_BYTES = 6


class EventFormatError(ValueError):
    """Malformed event input. Carries the 1-based line number when known."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


@dataclass(frozen=True)
class Event:
    """One DVS event: microsecond timestamp, pixel, polarity (OFF=0/ON=1)."""

    t_us: int
    x: int
    y: int
    polarity: int

    def __post_init__(self) -> None:
        if not isinstance(self.t_us, int) or self.t_us < 0:
            raise ValueError(f"timestamp must be a non-negative integer, got {self.t_us!r}")
        if not 0 <= self.x < SENSOR_WIDTH:
            raise ValueError(f"x={self.x} outside sensor columns [0, {SENSOR_WIDTH - 1}]")
        if not 0 <= self.y < SENSOR_HEIGHT:
            raise ValueError(f"y={self.y} outside sensor rows [0, {SENSOR_HEIGHT - 1}]")
        if self.polarity not in (0, 1):
            raise ValueError(f"polarity must be 0 or 1, got {self.polarity!r}")


def parse_event_line(line: str, lineno: int | None = None) -> Event:
    """Parse one ``t x y p`` text line (t in decimal seconds) into an Event.

    Raises EventFormatError (tagged with `lineno` when given) on a wrong
    field count, non-numeric tokens, out-of-range pixel coordinates, a
    negative timestamp, or polarity other than 0/1.
    """
    fields = line.split()
    if len(fields) != 4:
        raise EventFormatError(f"expected 4 fields 't x y p', got {len(fields)}", lineno)
    t_text, x_text, y_text, p_text = fields
    try:
        t_s = float(t_text)
    except ValueError:
        raise EventFormatError(f"non-numeric timestamp {t_text!r}", lineno) from None
    if not math.isfinite(t_s):
        raise EventFormatError(f"non-finite timestamp {t_text!r}", lineno)
    if t_s < 0:
        raise EventFormatError(f"negative timestamp {t_text!r}", lineno)
    try:
        x = int(x_text)
        y = int(y_text)
        p = int(p_text)
    except ValueError:
        raise EventFormatError(f"non-integer field in {line.strip()!r}", lineno) from None
    if not 0 <= x < SENSOR_WIDTH:
        raise EventFormatError(f"x={x} out of range [0, {SENSOR_WIDTH - 1}]", lineno)
    if not 0 <= y < SENSOR_HEIGHT:
        raise EventFormatError(f"y={y} out of range [0, {SENSOR_HEIGHT - 1}]", lineno)
    if p not in (0, 1):
        raise EventFormatError(f"polarity must be 0 or 1, got {p}", lineno)
    return Event(t_us=int(round(t_s * 1e6)), x=x, y=y, polarity=p)


def format_event_line(event: Event) -> str:
    """Canonical text rendering; parse_event_line(format_event_line(e)) == e."""
    return f"{event.t_us / 1e6:.6f} {event.x} {event.y} {event.polarity}"


def read_event_stream(source: IO | Iterable[str | bytes]) -> list[Event]:
    """Read a line-oriented text source into a timestamp-ordered event list.

    Input must already be sorted by timestamp: a regression aborts with both
    offending timestamps rather than silently re-sorting (surfacing dataset
    corruption). The first malformed line aborts with its position.
    """
    events: list[Event] = []
    prev_t = -1
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("ascii")
            except UnicodeDecodeError:
                raise EventFormatError("non-ASCII bytes in event stream", lineno) from None
        if not raw.strip():
            continue
        event = parse_event_line(raw, lineno)
        if event.t_us < prev_t:
            raise EventFormatError(
                f"timestamp regression: {event.t_us} us after {prev_t} us", lineno
            )
        prev_t = event.t_us
        events.append(event)
    return events


def pack_event(event: Event) -> int:
    """Pack an Event into the 42-bit word; timestamps wrap modulo 2**25 us."""
    return (
        ((event.t_us % TIMESTAMP_WRAP_US) << _T_SHIFT)
        | (event.x << _X_SHIFT)
        | (event.y << _Y_SHIFT)
        | event.polarity
    )


def unpack_event(word: int) -> Event:
    """Inverse of pack_event on the wrapped-timestamp domain.

    Rejects words with bits set at or above bit 42 and words whose decoded
    pixel falls outside the sensor.
    """
    if word < 0:
        raise ValueError("packed word must be non-negative")
    if word >> WORD_BITS:
        raise ValueError(f"bits above {WORD_BITS - 1} must be zero, got {word:#x}")
    x = (word >> _X_SHIFT) & _FIELD8
    y = (word >> _Y_SHIFT) & _FIELD8
    if x >= SENSOR_WIDTH:
        raise ValueError(f"invalid pixel column {x} in word {word:#x}")
    if y >= SENSOR_HEIGHT:
        raise ValueError(f"invalid pixel row {y} in word {word:#x}")
    return Event(t_us=word >> _T_SHIFT, x=x, y=y, polarity=word & 1)


def write_ev42(events: Iterable[Event], fp: IO[bytes]) -> int:
    """Write events to an .ev42 binary stream; returns the record count."""
    fp.write(EV42_MAGIC)
    fp.write(bytes([EV42_VERSION]))
    count = 0
    for event in events:
        fp.write(pack_event(event).to_bytes(EV42_RECORD_BYTES, "little"))
        count += 1
    return count


def read_ev42(fp: IO[bytes]) -> list[Event]:
    """Read an .ev42 binary stream.

    Timestamps come back wrapped to the 25-bit field; ordering is preserved
    as stored and not revalidated (wrapping makes long streams non-monotonic
    by construction).
    """
    magic = fp.read(len(EV42_MAGIC))
    if magic != EV42_MAGIC:
        raise EventFormatError(f"bad magic {magic!r}, expected {EV42_MAGIC!r}")
    version = fp.read(1)
    if len(version) != 1 or version[0] != EV42_VERSION:
        raise EventFormatError(f"unsupported version {version!r}")
    payload = fp.read()
    if len(payload) % EV42_RECORD_BYTES:
        raise EventFormatError(
            f"truncated record: {len(payload)} payload bytes is not a multiple of {EV42_RECORD_BYTES}"
        )
    events = []
    for offset in range(0, len(payload), EV42_RECORD_BYTES):
        word = int.from_bytes(payload[offset : offset + EV42_RECORD_BYTES], "little")
        try:
            events.append(unpack_event(word))
        except ValueError as exc:
            raise EventFormatError(f"record {offset // EV42_RECORD_BYTES}: {exc}") from None
    return events


@dataclass
class SpikeRaster:
    """Time-binned spike counts on a downsampled channel grid.

    counts has shape (n_bins, n_cols * n_rows); channel index is
    row-major: (y // downsample) * n_cols + (x // downsample). In the
    default folded mode both polarities add +1 and the total count equals
    the number of encoded events; in signed mode ON adds +1 and OFF adds -1.
    """

    bin_width_us: int
    downsample: int
    n_cols: int
    n_rows: int
    counts: np.ndarray
    signed: bool = False

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    @property
    def n_channels(self) -> int:
        return self.counts.shape[1]

    def channel_index(self, x: int, y: int) -> int:
        return (y // self.downsample) * self.n_cols + (x // self.downsample)


def encode_raster(
    events: Sequence[Event],
    downsample: int,
    bin_width_us: int,
    window_us: int,
    signed: bool = False,
) -> SpikeRaster:
    """Bin events into a SpikeRaster over [0, window_us).

    Channel grid is ceil(240 / downsample) x ceil(180 / downsample) with
    floor-division pixel mapping. Events at or beyond window_us are an
    error, as are non-positive bin width, downsample, or window.
    """
    if downsample <= 0:
        raise ValueError(f"downsample must be positive, got {downsample}")
    if bin_width_us <= 0:
        raise ValueError(f"bin width must be positive, got {bin_width_us}")
    if window_us <= 0:
        raise ValueError(f"window must be positive, got {window_us}")
    n_cols = -(-SENSOR_WIDTH // downsample)
    n_rows = -(-SENSOR_HEIGHT // downsample)
    n_bins = -(-window_us // bin_width_us)
    counts = np.zeros((n_bins, n_cols * n_rows), dtype=np.int64)
    if events:
        t = np.fromiter((e.t_us for e in events), dtype=np.int64, count=len(events))
        x = np.fromiter((e.x for e in events), dtype=np.int64, count=len(events))
        y = np.fromiter((e.y for e in events), dtype=np.int64, count=len(events))
        if int(t.max()) >= window_us:
            raise ValueError(
                f"event at {int(t.max())} us is outside the window [0, {window_us}) us"
            )
        bins = t // bin_width_us
        channels = (y // downsample) * n_cols + (x // downsample)
        if signed:
            p = np.fromiter((e.polarity for e in events), dtype=np.int64, count=len(events))
            np.add.at(counts, (bins, channels), 2 * p - 1)
        else:
            np.add.at(counts, (bins, channels), 1)
    return SpikeRaster(
        bin_width_us=bin_width_us,
        downsample=downsample,
        n_cols=n_cols,
        n_rows=n_rows,
        counts=counts,
        signed=signed,
    )
