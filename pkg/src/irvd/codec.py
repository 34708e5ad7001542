"""Pulse-width keying of beam flicks and the receiver-side dip decoder.

A 5-bit report ``[type1 type0 density2 density1 density0]`` is sent as five
-1 deg beam deviations at fixed protocol times; a 1 bit holds the deviation
twice as long as a 0 bit. The receiver smooths its power trace over one
dither period and measures how long each power dip stays below a fraction
of the settled baseline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from irvd.errors import ConfigError, NoSignalError, check
from irvd.steering import ControlTrace

N_BITS = 5
DEFAULT_BIT_TIMES = (2.5, 3.1, 4.1, 5.1, 6.1)
ALT_BIT_TIMES = (2.1, 3.1, 4.1, 5.1, 6.1)
MERGE_GAP = 0.05


@dataclass(frozen=True)
class VirusMessage:
    type_code: int
    density_code: int

    def __post_init__(self):
        check(int(self.type_code) == self.type_code and 0 <= self.type_code <= 3,
              "type_code", "must be an integer in [0, 3]", self.type_code)
        check(int(self.density_code) == self.density_code and 0 <= self.density_code <= 7,
              "density_code", "must be an integer in [0, 7]", self.density_code)

    @property
    def bits(self) -> list[int]:
        word = (int(self.type_code) << 3) | int(self.density_code)
        return [(word >> (N_BITS - 1 - i)) & 1 for i in range(N_BITS)]

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "VirusMessage":
        if len(bits) != N_BITS or any(b not in (0, 1) for b in bits):
            raise ValueError(f"expected {N_BITS} bits of 0/1, got {list(bits)}")
        word = 0
        for b in bits:
            word = (word << 1) | int(b)
        return cls(word >> 3, word & 0b111)


@dataclass(frozen=True)
class TimingConfig:
    bit_times: tuple[float, ...] = DEFAULT_BIT_TIMES
    w0: float = 0.12
    w1: float = 0.24
    delta: float = -1.0
    recovery_margin: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "bit_times", tuple(float(x) for x in self.bit_times))
        bt = self.bit_times
        check(len(bt) == N_BITS, "timing.bit_times", f"must hold {N_BITS} start times", list(bt))
        check(self.w0 > 0, "timing.w0", "must be > 0", self.w0)
        check(math.isclose(self.w1, 2 * self.w0, rel_tol=1e-9), "timing.w1", "must equal 2 * w0", self.w1)
        check(self.recovery_margin >= 0, "timing.recovery_margin", "must be >= 0", self.recovery_margin)
        for a, b in zip(bt, bt[1:]):
            check(b > a, "timing.bit_times", "must be strictly increasing", list(bt))
            check(b - a > self.w1 + self.recovery_margin, "timing.bit_times",
                  f"gap {b - a:g} s must exceed w1 + recovery_margin = {self.w1 + self.recovery_margin:g} s",
                  list(bt))


@dataclass(frozen=True)
class FlickEvent:
    start: float
    width: float
    delta: float


@dataclass(frozen=True)
class FlickSchedule:
    events: tuple[FlickEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for ev in self.events:
            if ev.width <= 0:
                raise ConfigError(f"schedule: flick width must be > 0 (got {ev.width})")
        for a, b in zip(self.events, self.events[1:]):
            if b.start < a.start + a.width:
                raise ConfigError(f"schedule: flicks at {a.start:g} s and {b.start:g} s overlap or are unsorted")


@dataclass(frozen=True)
class DipEvent:
    start: float
    width: float
    depth: float


@dataclass
class DecodeResult:
    bits: list[int]
    message: Optional[VirusMessage]
    dip_events: list[DipEvent] = field(default_factory=list)
    status: str = "ok"  # ok | wrong-bit-count | no-signal


def encode_message(msg: VirusMessage, timing: TimingConfig) -> FlickSchedule:
    return FlickSchedule(tuple(
        FlickEvent(start, timing.w1 if bit else timing.w0, timing.delta)
        for start, bit in zip(timing.bit_times, msg.bits)))


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; windows are truncated (not zero-padded) at the edges."""
    kernel = np.ones(max(int(window), 1))
    return np.convolve(x, kernel, mode="same") / np.convolve(np.ones_like(x), kernel, mode="same")


def detect_dips(trace: ControlTrace, guard_time: float = 2.0, threshold: float = 0.98,
                dither_frequency: float = 50.0) -> list[DipEvent]:
    """Find power dips below ``threshold * baseline`` after ``guard_time``.

    The baseline is the median smoothed power between the guard time and the
    first crossing. That crossing is located against a provisional baseline,
    the median over everything after the guard.
    """
    t = np.asarray(trace.t)
    n = len(t)
    dt = trace.dt
    if n < 2:
        raise NoSignalError("trace too short")
    s = moving_average(np.asarray(trace.power, dtype=float), round(2 * math.pi / dither_frequency / dt))
    g = int(np.searchsorted(t, guard_time - 0.5 * dt))
    if g >= n:
        raise NoSignalError("trace ends before the guard time")
    provisional = float(np.median(s[g:]))
    crossings = np.flatnonzero(s[g:] < threshold * provisional)
    first = g + int(crossings[0]) if len(crossings) else n
    baseline = float(np.median(s[g:first])) if first > g else provisional
    if not baseline >= 0.5:
        raise NoSignalError(f"baseline power {baseline:.3g} < 0.5")

    below = (s < threshold * baseline).astype(np.int8)
    edges = np.diff(np.concatenate(([0], below, [0])))
    runs: list[list[int]] = []
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        if runs and (a - runs[-1][1]) * dt < MERGE_GAP:
            runs[-1][1] = b
        else:
            runs.append([int(a), int(b)])
    return [DipEvent(float(t[a]), (b - a) * dt, baseline - float(s[a:b].min()))
            for a, b in runs if t[a] >= guard_time - 0.5 * dt]


def decode_bits(dips: Sequence[DipEvent], timing: TimingConfig) -> DecodeResult:
    bits = [1 if d.width > 1.5 * timing.w0 else 0 for d in dips]
    if len(bits) != N_BITS:
        return DecodeResult(bits, None, list(dips), "wrong-bit-count")
    return DecodeResult(bits, VirusMessage.from_bits(bits), list(dips), "ok")


def decode_trace(trace: ControlTrace, timing: TimingConfig, guard_time: float = 2.0,
                 threshold: float = 0.98, dither_frequency: float = 50.0) -> DecodeResult:
    try:
        dips = detect_dips(trace, guard_time, threshold, dither_frequency)
    except NoSignalError:
        return DecodeResult([], None, [], "no-signal")
    return decode_bits(dips, timing)


def write_decode_csv(path, result: DecodeResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bit_index", "start_s", "width_s", "depth", "bit"])
        for i, (dip, bit) in enumerate(zip(result.dip_events, result.bits)):
            w.writerow([i, repr(dip.start), repr(dip.width), repr(dip.depth), bit])


def summary_line(result: DecodeResult) -> str:
    if result.message is None:
        return f"{result.status},,"
    return f"{result.status},{result.message.type_code},{result.message.density_code}"


def write_decode_summary(path, result: DecodeResult):
    with open(path, "w", newline="") as fh:
        fh.write("status,type_code,density_code\n")
        fh.write(summary_line(result) + "\n")
