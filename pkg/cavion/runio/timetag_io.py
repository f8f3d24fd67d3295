"""
Time-Tag Files
Little-endian binary streams: magic "ETTS", u16 version, u64 record count,
then packed 13-byte records (u32 trial, u8 channel, u64 time_ps).

Trailing trials without any record are kept by one END_CHANNEL marker on the
last trial; the reader strips it again. A stream without records is the bare
header and reads back with no trials.
"""

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..photodynamics.timetags import (
    END_CHANNEL, PACKED_DTYPE, RECORD_DTYPE, TimeTagStream, sort_records,
)

MAGIC = b"ETTS"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHQ")
HEADER_SIZE = HEADER.size  # 14
RECORD_SIZE = PACKED_DTYPE.itemsize  # 13


def _file_records(stream: TimeTagStream) -> np.ndarray:
    records = stream.records
    if not records.size:
        return records
    if int(records["trial"][-1]) < stream.n_trials - 1:
        marker = np.zeros(1, dtype=RECORD_DTYPE)
        marker["trial"] = stream.n_trials - 1
        marker["channel"] = END_CHANNEL
        records = np.concatenate([records, marker])
    return records


def encode_timetags(stream: TimeTagStream) -> bytes:
    records = _file_records(stream)
    packed = np.zeros(records.size, dtype=PACKED_DTYPE)
    for name in ("trial", "channel", "time_ps"):
        packed[name] = records[name]
    return HEADER.pack(MAGIC, FORMAT_VERSION, records.size) + packed.tobytes()


def write_timetags(stream: TimeTagStream, path) -> Path:
    """Write a stream; a stream without records is the bare 14-byte header."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(encode_timetags(stream))
    return path


def decode_timetags(data: bytes) -> TimeTagStream:
    if len(data) < HEADER_SIZE:
        raise FormatError(f"file shorter than the {HEADER_SIZE}-byte header", offset=len(data))
    magic, version, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)

    expected = HEADER_SIZE + count * RECORD_SIZE
    if len(data) < expected:
        complete = (len(data) - HEADER_SIZE) // RECORD_SIZE
        raise FormatError(
            f"truncated: header announces {count} records, {complete} complete",
            offset=HEADER_SIZE + complete * RECORD_SIZE,
        )
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after {count} records", offset=expected)

    packed = np.frombuffer(data, dtype=PACKED_DTYPE, count=count, offset=HEADER_SIZE)
    records = np.zeros(count, dtype=RECORD_DTYPE)
    for name in ("trial", "channel", "time_ps"):
        records[name] = packed[name]

    if count > 1:
        trial = records["trial"].astype(np.int64)
        time_ps = records["time_ps"]
        later = (trial[1:] > trial[:-1]) | ((trial[1:] == trial[:-1]) & (time_ps[1:] >= time_ps[:-1]))
        bad = np.flatnonzero(~later)
        if bad.size:
            raise FormatError("records out of (trial, time) order",
                              offset=HEADER_SIZE + (int(bad[0]) + 1) * RECORD_SIZE)
        # ties in (trial, time) may come in any channel order
        records = sort_records(records)

    markers = np.flatnonzero(records["channel"] == END_CHANNEL)
    if markers.size and (markers.size > 1 or markers[0] != count - 1):
        raise FormatError("end marker before the last record",
                          offset=HEADER_SIZE + int(markers[0]) * RECORD_SIZE)
    n_trials = int(records["trial"][-1]) + 1 if count else 0
    if markers.size:
        records = records[:-1]
    return TimeTagStream(records=records, n_trials=n_trials)


def read_timetags(path) -> TimeTagStream:
    """
    Read and validate a time-tag file.

    Raises:
        FormatError: bad magic, unknown version, length mismatch or ordering,
            with the byte offset of the problem
    """
    return decode_timetags(Path(path).read_bytes())
