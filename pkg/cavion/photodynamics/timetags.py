"""
Time Tags
In-memory time-tag streams: one record per detection event.

A record is (trial, channel, time_ps). time_ps counts from the opening of the
detection window of that trial. Channel 0 is the signal detector; trials the
duty cycle dropped carry one marker record on VETO_CHANNEL.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameterError

SIGNAL_CHANNEL = 0
END_CHANNEL = 254  # file-only marker: last trial index of the stream
VETO_CHANNEL = 255

MAX_TRIALS = 2**32

RECORD_DTYPE = np.dtype([("trial", "<u4"), ("channel", "u1"), ("time_ps", "<u8")])
PACKED_DTYPE = np.dtype(
    {"names": ["trial", "channel", "time_ps"], "formats": ["<u4", "u1", "<u8"], "offsets": [0, 4, 5], "itemsize": 13}
)


def empty_records(n: int = 0) -> np.ndarray:
    return np.zeros(n, dtype=RECORD_DTYPE)


def make_records(trials, channels, times_ps) -> np.ndarray:
    """Build a record array from parallel columns, sorted by (trial, time, channel)."""
    trials = np.asarray(trials, dtype=np.uint64)
    if trials.size and trials.max() >= MAX_TRIALS:
        raise InvalidParameterError("trial index overflows 32 bits")
    records = empty_records(trials.size)
    records["trial"] = trials
    records["channel"] = channels
    records["time_ps"] = times_ps
    return sort_records(records)


def sort_records(records: np.ndarray) -> np.ndarray:
    order = np.lexsort((records["channel"], records["time_ps"], records["trial"]))
    return records[order]


def apply_dead_time(records: np.ndarray, dead_time_ps: int) -> np.ndarray:
    """
    Non-extending dead time per (trial, channel) on sorted records.

    A record is dropped when it follows the last kept record of the same
    trial and channel by less than dead_time_ps.
    """
    if dead_time_ps <= 0 or records.size < 2:
        return records
    trial = records["trial"].astype(np.int64)
    # Only trials holding more than one record can violate dead time
    same_as_prev = np.zeros(records.size, dtype=bool)
    same_as_prev[1:] = trial[1:] == trial[:-1]
    if not same_as_prev.any():
        return records

    keep = np.ones(records.size, dtype=bool)
    last_kept = {}
    for i in np.flatnonzero(same_as_prev | np.roll(same_as_prev, -1)):
        key = (int(records["trial"][i]), int(records["channel"][i]))
        t = int(records["time_ps"][i])
        previous = last_kept.get(key)
        if previous is not None and t - previous < dead_time_ps:
            keep[i] = False
        else:
            last_kept[key] = t
    return records[keep]


@dataclass
class TimeTagStream:
    """Ordered detection records for n_trials consecutive trials."""
    records: np.ndarray = field(default_factory=empty_records)
    n_trials: int = 0

    def __post_init__(self):
        self.records = np.asarray(self.records, dtype=RECORD_DTYPE)
        if self.n_trials < 0 or self.n_trials > MAX_TRIALS:
            raise InvalidParameterError("n_trials must be in [0, 2^32]")
        if self.records.size and int(self.records["trial"].max()) >= self.n_trials:
            raise InvalidParameterError("record trial index beyond n_trials")

    def __len__(self) -> int:
        return int(self.records.size)

    def channel(self, channel: int = SIGNAL_CHANNEL) -> np.ndarray:
        return self.records[self.records["channel"] == channel]

    def kept_mask(self) -> np.ndarray:
        """Boolean mask over trials: False where the duty cycle dropped the trial."""
        kept = np.ones(self.n_trials, dtype=bool)
        vetoed = self.channel(VETO_CHANNEL)["trial"]
        kept[vetoed.astype(np.int64)] = False
        return kept

    @property
    def n_kept(self) -> int:
        return int(self.kept_mask().sum())

    def counts_per_trial(self, channel: int = SIGNAL_CHANNEL) -> np.ndarray:
        return np.bincount(
            self.channel(channel)["trial"].astype(np.int64), minlength=self.n_trials
        ).astype(np.int64)

    def signal_count(self) -> int:
        return int(self.channel(SIGNAL_CHANNEL).size)

    def is_sorted(self) -> bool:
        r = self.records
        if r.size < 2:
            return True
        key = np.lexsort((r["channel"], r["time_ps"], r["trial"]))
        return bool(np.array_equal(key, np.arange(r.size)))

    def check(self, window_ps: int = None, dead_time_ps: int = 0):
        """Raise InvalidParameterError if a stream invariant does not hold."""
        if not self.is_sorted():
            raise InvalidParameterError("records are not sorted by (trial, time)")
        if window_ps is not None:
            signal = self.channel(SIGNAL_CHANNEL)
            if signal.size and int(signal["time_ps"].max()) >= window_ps:
                raise InvalidParameterError("record time outside the detection window")
        if dead_time_ps > 0 and apply_dead_time(self.records, dead_time_ps).size != self.records.size:
            raise InvalidParameterError("records closer than the dead time")

    @classmethod
    def concatenate(cls, parts, n_trials: int) -> "TimeTagStream":
        """Ordered merge of consecutive trial blocks."""
        arrays = [p for p in parts if p.size]
        records = np.concatenate(arrays) if arrays else empty_records()
        return cls(records=records, n_trials=n_trials)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return self.n_trials == other.n_trials and np.array_equal(self.records, other.records)
