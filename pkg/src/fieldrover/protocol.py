"""Compact binary frame protocol for a narrowband command/telemetry radio,
plus a link simulator with airtime, latency, loss, and duty-cycle accounting.

Frame layout (big-endian):

    byte 0      high nibble: protocol version (1); low nibble: frame kind
    byte 1      sequence number (wraps at 256)
    bytes 2..   fixed-size payload for the kind
    last 2      CRC-16/CCITT-FALSE over everything before it

Payloads are fixed-point: positions in millimeters (int32), velocities in
mm/s (int16), headings in milliradians (int16), coverage in permille
(uint16). See docs/wire-format.md for the byte-by-byte reference.
"""

from __future__ import annotations

import heapq
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Union

import numpy as np

__all__ = [
    "PROTOCOL_VERSION",
    "MAX_FRAME",
    "FrameKind",
    "ControlPayload",
    "PositionPayload",
    "StuckPayload",
    "TelemetryPayload",
    "AckPayload",
    "Frame",
    "FrameErrorKind",
    "FrameError",
    "crc16",
    "encode_frame",
    "decode_frame",
    "LinkConfig",
    "LinkSimulator",
    "DeliveredFrame",
]

PROTOCOL_VERSION = 1
MAX_FRAME = 222  # radio modem MTU for the slowest configured data rate


def _build_crc_table() -> tuple:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if (crc & 0x8000) else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: polynomial 0x1021, initial value 0xFFFF."""
    crc = 0xFFFF
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ b]
    return crc


class FrameKind(IntEnum):
    CONTROL = 1
    POSITION = 2
    STUCK = 3
    TELEMETRY = 4
    ACK = 5


@dataclass(frozen=True)
class ControlPayload:
    """Operator velocity command, world-frame m/s encoded as mm/s."""

    vx: float
    vy: float

    kind = FrameKind.CONTROL
    _fmt = ">hh"

    def pack(self) -> bytes:
        return struct.pack(self._fmt, _int16(self.vx * 1000.0), _int16(self.vy * 1000.0))

    @classmethod
    def unpack(cls, data: bytes) -> "ControlPayload":
        vx, vy = struct.unpack(cls._fmt, data)
        return cls(vx / 1000.0, vy / 1000.0)


@dataclass(frozen=True)
class PositionPayload:
    """A goto target, meters encoded as mm."""

    x: float
    y: float

    kind = FrameKind.POSITION
    _fmt = ">ii"

    def pack(self) -> bytes:
        return struct.pack(self._fmt, _int32(self.x * 1000.0), _int32(self.y * 1000.0))

    @classmethod
    def unpack(cls, data: bytes) -> "PositionPayload":
        x, y = struct.unpack(cls._fmt, data)
        return cls(x / 1000.0, y / 1000.0)


@dataclass(frozen=True)
class StuckPayload:
    """Robot-to-base alert: no feasible corridor from this position."""

    x: float
    y: float

    kind = FrameKind.STUCK
    _fmt = ">ii"

    def pack(self) -> bytes:
        return struct.pack(self._fmt, _int32(self.x * 1000.0), _int32(self.y * 1000.0))

    @classmethod
    def unpack(cls, data: bytes) -> "StuckPayload":
        x, y = struct.unpack(cls._fmt, data)
        return cls(x / 1000.0, y / 1000.0)


_DECISION_CODES = ("none", "tick", "continue_tracking", "new_path", "stuck", "complete")


@dataclass(frozen=True)
class TelemetryPayload:
    """Periodic robot status: pose, coverage permille, last planner decision."""

    x: float
    y: float
    heading: float
    coverage: float  # fraction in [0, 1]
    decision: str

    kind = FrameKind.TELEMETRY
    _fmt = ">iihHB"

    def __post_init__(self) -> None:
        if self.decision not in _DECISION_CODES:
            raise ValueError(f"unknown decision {self.decision!r}")

    def pack(self) -> bytes:
        return struct.pack(
            self._fmt,
            _int32(self.x * 1000.0),
            _int32(self.y * 1000.0),
            _int16(self.heading * 1000.0),
            max(0, min(1000, round(self.coverage * 1000.0))),
            _DECISION_CODES.index(self.decision),
        )

    @classmethod
    def unpack(cls, data: bytes) -> "TelemetryPayload":
        x, y, h, cov, dec = struct.unpack(cls._fmt, data)
        if dec >= len(_DECISION_CODES):
            raise FrameError(FrameErrorKind.PAYLOAD_RANGE, f"decision code {dec} out of range")
        return cls(x / 1000.0, y / 1000.0, h / 1000.0, cov / 1000.0, _DECISION_CODES[dec])


@dataclass(frozen=True)
class AckPayload:
    """Acknowledges receipt of the frame with the given sequence number."""

    acked_seq: int

    kind = FrameKind.ACK
    _fmt = ">B"

    def __post_init__(self) -> None:
        if not (0 <= self.acked_seq <= 255):
            raise ValueError(f"acked_seq must be a byte, got {self.acked_seq}")

    def pack(self) -> bytes:
        return struct.pack(self._fmt, self.acked_seq)

    @classmethod
    def unpack(cls, data: bytes) -> "AckPayload":
        (seq,) = struct.unpack(cls._fmt, data)
        return cls(seq)


Payload = Union[ControlPayload, PositionPayload, StuckPayload, TelemetryPayload, AckPayload]

_PAYLOAD_TYPES = {
    FrameKind.CONTROL: ControlPayload,
    FrameKind.POSITION: PositionPayload,
    FrameKind.STUCK: StuckPayload,
    FrameKind.TELEMETRY: TelemetryPayload,
    FrameKind.ACK: AckPayload,
}
_PAYLOAD_SIZES = {k: struct.calcsize(t._fmt) for k, t in _PAYLOAD_TYPES.items()}


def _int16(v: float) -> int:
    i = round(v)
    if not (-32768 <= i <= 32767):
        raise ValueError(f"value {v} out of int16 range")
    return int(i)


def _int32(v: float) -> int:
    i = round(v)
    if not (-(2**31) <= i <= 2**31 - 1):
        raise ValueError(f"value {v} out of int32 range")
    return int(i)


@dataclass(frozen=True)
class Frame:
    seq: int
    payload: Payload

    def __post_init__(self) -> None:
        if not (0 <= self.seq <= 255):
            raise ValueError(f"seq must fit a byte, got {self.seq}")

    @property
    def kind(self) -> FrameKind:
        return self.payload.kind


class FrameErrorKind(Enum):
    TOO_SHORT = "too_short"
    UNKNOWN_KIND = "unknown_kind"
    BAD_CHECKSUM = "bad_checksum"
    TRAILING_BYTES = "trailing_bytes"
    OVERSIZE = "oversize"
    PAYLOAD_RANGE = "payload_range"


class FrameError(Exception):
    def __init__(self, kind: FrameErrorKind, message: str):
        super().__init__(message)
        self.kind = kind


def encode_frame(frame: Frame) -> bytes:
    header = bytes([(PROTOCOL_VERSION << 4) | int(frame.kind), frame.seq])
    body = header + frame.payload.pack()
    crc = crc16(body)
    encoded = body + bytes([crc >> 8, crc & 0xFF])
    if len(encoded) > MAX_FRAME:
        raise FrameError(FrameErrorKind.OVERSIZE, f"frame is {len(encoded)} bytes")
    return encoded


def decode_frame(data: bytes) -> Frame:
    """Parse one frame, raising :class:`FrameError` on any malformation.

    Checks run cheapest-first: length, kind, exact size, checksum, payload
    semantics. A single flipped bit anywhere fails the checksum.
    """
    if len(data) > MAX_FRAME:
        raise FrameError(FrameErrorKind.OVERSIZE, f"{len(data)} bytes exceeds {MAX_FRAME}")
    if len(data) < 4:
        raise FrameError(FrameErrorKind.TOO_SHORT, f"{len(data)} bytes, need at least 4")
    version = data[0] >> 4
    kind_code = data[0] & 0x0F
    if version != PROTOCOL_VERSION:
        raise FrameError(FrameErrorKind.UNKNOWN_KIND, f"unsupported version {version}")
    try:
        kind = FrameKind(kind_code)
    except ValueError:
        raise FrameError(FrameErrorKind.UNKNOWN_KIND, f"unknown kind {kind_code}") from None
    expected = 2 + _PAYLOAD_SIZES[kind] + 2
    if len(data) < expected:
        raise FrameError(
            FrameErrorKind.TOO_SHORT, f"{len(data)} bytes, {kind.name} needs {expected}"
        )
    if len(data) > expected:
        raise FrameError(
            FrameErrorKind.TRAILING_BYTES,
            f"{len(data) - expected} bytes after {kind.name} frame",
        )
    received = (data[-2] << 8) | data[-1]
    if crc16(data[:-2]) != received:
        raise FrameError(
            FrameErrorKind.BAD_CHECKSUM,
            f"crc mismatch: computed {crc16(data[:-2]):#06x}, frame says {received:#06x}",
        )
    payload = _PAYLOAD_TYPES[kind].unpack(data[2:-2])
    return Frame(seq=data[1], payload=payload)


# ---------------------------------------------------------------------------
# Link simulation


@dataclass(frozen=True)
class LinkConfig:
    """Narrowband half-duplex link parameters.

    ``duty_cycle_max`` limits on-air time to that fraction of any sliding
    window of ``duty_window`` seconds; the default window is long enough that
    a maximum-size frame (325 ms at 5470 bps) can legally be sent at 1%.
    """

    data_rate: float = 5470.0  # bits per second
    latency: float = 0.5  # propagation + processing delay, seconds
    loss_probability: float = 0.0
    duty_cycle_max: float = 0.01
    duty_window: float = 60.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.data_rate > 0.0):
            raise ValueError("data_rate must be > 0")
        if self.latency < 0.0:
            raise ValueError("latency must be >= 0")
        if not (0.0 <= self.loss_probability <= 1.0):
            raise ValueError("loss_probability must be in [0, 1]")
        if not (0.0 < self.duty_cycle_max <= 1.0):
            raise ValueError("duty_cycle_max must be in (0, 1]")
        if not (self.duty_window > 0.0):
            raise ValueError("duty_window must be > 0")
        budget = self.duty_cycle_max * self.duty_window
        worst = MAX_FRAME * 8 / self.data_rate
        if budget < worst:
            raise ValueError(
                f"duty budget {budget:.3f}s per window cannot fit a "
                f"maximum frame airtime of {worst:.3f}s"
            )


@dataclass(frozen=True)
class DeliveredFrame:
    frame: Frame
    sent_at: float  # when submitted to the link
    tx_start: float  # when transmission actually began
    delivered_at: float


class LinkSimulator:
    """One direction of the radio link.

    Transmissions are serialized (the air is shared), each occupies
    ``bits / data_rate`` seconds, and starts are deferred to the earliest
    instant at which the sliding-window duty-cycle constraint still holds
    for every window covering the transmission. Loss is decided per frame
    after airtime is spent — a dropped frame still heats the duty budget.
    """

    def __init__(self, cfg: LinkConfig = LinkConfig()):
        self.cfg = cfg
        self._rng = np.random.default_rng(cfg.seed)
        self._busy_until = 0.0
        self._airtime: deque = deque()  # (tx_start, tx_end) history
        self._pending: list = []  # heap of (delivered_at, order, DeliveredFrame)
        self._order = 0
        self.sent_count = 0
        self.dropped_count = 0

    def _airtime_in(self, start: float, end: float) -> float:
        total = 0.0
        for s, e in self._airtime:
            lo = max(s, start)
            hi = min(e, end)
            if hi > lo:
                total += hi - lo
        return total

    def _earliest_start(self, ready: float, duration: float) -> float:
        """First instant >= ready at which the whole transmission is legal.

        The binding window is the one ending when the transmission ends: it
        holds the entire new transmission plus the freshest history. Past
        airtime overlapping that window is piecewise-linear and non-increasing
        in the start time, with slope changes exactly where the window's left
        edge crosses a history interval's start or end; scan those breakpoints
        and interpolate within the violating segment.
        """
        w = self.cfg.duty_window
        budget = self.cfg.duty_cycle_max * w
        start0 = max(ready, self._busy_until)

        def used(start: float) -> float:
            end = start + duration
            return self._airtime_in(end - w, end) + duration

        if used(start0) <= budget + 1e-12:
            return start0
        # Breakpoints: starts at which the window's left edge meets a history
        # interval boundary (either endpoint changes the overlap slope).
        candidates = sorted(
            t + w - duration
            for s, e in self._airtime
            for t in (s, e)
            if t + w - duration > start0
        )
        prev = start0
        for cand in candidates:
            u = used(cand)
            if u <= budget + 1e-12:
                # Linear between prev and cand; find the exact crossing.
                u_prev = used(prev)
                if u_prev <= u + 1e-15:
                    return cand
                frac = (u_prev - budget) / (u_prev - u)
                return prev + frac * (cand - prev)
            prev = cand
        return prev  # all history slid out; budget >= duration by config check

    def send(self, frame: Frame, now: float) -> Optional[float]:
        """Submit a frame at simulation time ``now``.

        Returns the delivery time, or None when the frame is lost. Either
        way the transmission consumes air and duty budget.
        """
        encoded = encode_frame(frame)
        duration = len(encoded) * 8 / self.cfg.data_rate
        tx_start = self._earliest_start(now, duration)
        tx_end = tx_start + duration
        self._busy_until = tx_end
        self._airtime.append((tx_start, tx_end))
        cutoff = tx_end - self.cfg.duty_window
        while self._airtime and self._airtime[0][1] <= cutoff:
            self._airtime.popleft()
        self.sent_count += 1
        lost = (
            self.cfg.loss_probability > 0.0
            and float(self._rng.random()) < self.cfg.loss_probability
        )
        if lost:
            self.dropped_count += 1
            return None
        delivered_at = tx_end + self.cfg.latency
        rec = DeliveredFrame(
            frame=frame, sent_at=now, tx_start=tx_start, delivered_at=delivered_at
        )
        heapq.heappush(self._pending, (delivered_at, self._order, rec))
        self._order += 1
        return delivered_at

    def poll(self, now: float) -> list:
        """All frames whose delivery time has arrived, in delivery order."""
        out = []
        while self._pending and self._pending[0][0] <= now + 1e-12:
            out.append(heapq.heappop(self._pending)[2])
        return out

    def flush_pending(self) -> int:
        """Drop all not-yet-delivered frames; their airtime stays spent.

        Used when queued commands become moot (e.g. the operator hands
        control back before in-flight drive frames arrive).
        """
        n = len(self._pending)
        self._pending.clear()
        return n

    def airtime_fraction(self, window_end: float) -> float:
        """On-air fraction of the duty window ending at ``window_end``."""
        w = self.cfg.duty_window
        return self._airtime_in(window_end - w, window_end) / w
