"""Wire formats and transports for the telemetry link.

Payload (8 bytes, little-endian, packed)::

    [0..4)  float32  knee angle, degrees
    [4..6)  uint16   EMG channel 1 envelope, ADC counts (vastus lateralis)
    [6..8)  uint16   EMG channel 2 envelope, ADC counts (semitendinosus)

Frame for the receiver-to-host hop (14 bytes)::

    [0..2)   sync    0xAA 0x55
    [2..4)   uint16  sequence number (wraps at 65536)
    [4..12)  payload (above)
    [12..14) uint16  CRC-16/CCITT-FALSE over seq+payload (poly 0x1021,
             init 0xFFFF, no reflection, no final xor)

The radio hop is emulated as local connectionless datagrams with a
configurable, seeded drop probability and jitter bound; delivery order
is preserved.  See ``docs/wire-format.md`` for the normative tables.
"""

from __future__ import annotations

import math
import os
import random
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .errors import (
    ConfigurationError,
    ConformanceError,
    FramingError,
    InputError,
    TransportClosedError,
)

SYNC = b"\xaa\x55"
PACKET_LEN = 8
FRAME_LEN = 14
SEQ_MOD = 1 << 16

DEFAULT_PORT = 4747
PORT_ENV_VAR = "SQUATLINK_PORT"

_PACKET_STRUCT = struct.Struct("<fHH")
_SEQ_STRUCT = struct.Struct("<H")

#: Counts above this are flagged suspect by the decoder (12-bit ADC ceiling).
MAX_VALID_COUNTS = 4095


def default_port() -> int:
    """Datagram port: ``SQUATLINK_PORT`` env override, else 4747."""
    value = os.environ.get(PORT_ENV_VAR)
    return int(value) if value else DEFAULT_PORT


@dataclass(frozen=True, slots=True)
class TelemetryPacket:
    """The 8-byte application payload: knee angle plus two EMG readings."""

    knee_angle_deg: float
    emg1_counts: int
    emg2_counts: int


@dataclass(frozen=True)
class DecodedPacket:
    """Decode result: the packet plus conformance annotations.

    Nonconforming values (non-finite angle, counts above the ADC ceiling)
    are tolerated and flagged rather than rejected, so logged field data
    is never silently discarded.
    """

    packet: TelemetryPacket
    suspect: tuple[str, ...] = ()

    @property
    def is_suspect(self) -> bool:
        return bool(self.suspect)


@dataclass
class LinkStats:
    """Per-link counters.

    The sender fills ``sent``/``dropped`` (it applies the loss model);
    the parser fills ``received``/``crc_failures`` and infers drops from
    sequence gaps.  ``received + dropped <= sent`` when both sides are
    combined over one stream.
    """

    sent: int = 0
    received: int = 0
    dropped: int = 0
    crc_failures: int = 0
    observed_rate_hz: float = 0.0

    def note_elapsed(self, elapsed_s: float) -> None:
        if elapsed_s > 0:
            self.observed_rate_hz = self.received / elapsed_s


def encode_packet(packet: TelemetryPacket) -> bytes:
    """Serialize a packet to its 8-byte wire form.

    Raises
    ------
    ConformanceError
        If the knee angle is not finite or a count does not fit uint16.
    """
    if not math.isfinite(packet.knee_angle_deg):
        raise ConformanceError(
            f"refusing to encode non-finite knee angle {packet.knee_angle_deg}"
        )
    try:
        return _PACKET_STRUCT.pack(
            packet.knee_angle_deg, packet.emg1_counts, packet.emg2_counts
        )
    except struct.error as exc:
        raise ConformanceError(f"packet fields out of wire range: {exc}") from exc


def decode_packet(data: bytes) -> DecodedPacket:
    """Parse an 8-byte payload; inverse of :func:`encode_packet`.

    Raises
    ------
    FramingError
        If ``data`` is not exactly 8 bytes.
    """
    if len(data) != PACKET_LEN:
        raise FramingError(f"payload must be {PACKET_LEN} bytes, got {len(data)}")
    angle, emg1, emg2 = _PACKET_STRUCT.unpack(data)
    suspect = []
    if not math.isfinite(angle):
        suspect.append("non_finite_angle")
    if emg1 > MAX_VALID_COUNTS:
        suspect.append("emg1_over_range")
    if emg2 > MAX_VALID_COUNTS:
        suspect.append("emg2_over_range")
    return DecodedPacket(TelemetryPacket(angle, emg1, emg2), tuple(suspect))


def _build_crc_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table()


def crc16_ccitt(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF)."""
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


def encode_frame(seq: int, packet: TelemetryPacket) -> bytes:
    """Wrap a packet in the 14-byte sync/seq/CRC frame."""
    if not 0 <= seq < SEQ_MOD:
        raise InputError(f"sequence number must fit uint16, got {seq}")
    body = _SEQ_STRUCT.pack(seq) + encode_packet(packet)
    return SYNC + body + _SEQ_STRUCT.pack(crc16_ccitt(body))


class FrameParser:
    """Incremental, resynchronizing parser for a framed byte stream.

    Total over arbitrary input: garbage and truncated frames are skipped
    by hunting for the sync pattern, CRC failures are counted and the
    scan resumes past the bad sync, and parsing is invariant to how the
    stream is chunked across :meth:`feed` calls.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self._last_seq: int | None = None
        self.stats = LinkStats()

    def feed(self, data: bytes) -> list[tuple[int, DecodedPacket]]:
        """Consume bytes; return complete frames as (seq, decoded) pairs.

        Sequence gaps between consecutively received frames are counted
        as drops: ``dropped += (gap - 1)`` per frame, modulo the uint16
        wrap.
        """
        self._buf += data
        out: list[tuple[int, DecodedPacket]] = []
        while True:
            start = self._buf.find(SYNC)
            if start < 0:
                # A trailing 0xAA may be the first sync byte of the next chunk.
                if self._buf[-1:] == SYNC[:1]:
                    del self._buf[: len(self._buf) - 1]
                else:
                    self._buf.clear()
                break
            if start:
                del self._buf[:start]
            if len(self._buf) < FRAME_LEN:
                break
            body = bytes(self._buf[2 : FRAME_LEN - 2])
            (crc,) = _SEQ_STRUCT.unpack_from(self._buf, FRAME_LEN - 2)
            if crc16_ccitt(body) != crc:
                self.stats.crc_failures += 1
                del self._buf[: len(SYNC)]  # skip the bad sync, rescan
                continue
            (seq,) = _SEQ_STRUCT.unpack_from(body)
            decoded = decode_packet(body[2:])
            if self._last_seq is not None:
                gap = (seq - self._last_seq) % SEQ_MOD
                if gap > 1:
                    self.stats.dropped += gap - 1
            self._last_seq = seq
            self.stats.received += 1
            out.append((seq, decoded))
            del self._buf[:FRAME_LEN]
        return out


@dataclass(frozen=True)
class LinkConfig:
    """Loss/jitter model for the emulated radio hop."""

    drop_prob: float = 0.0
    jitter_s: float = 0.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ConfigurationError(
                f"drop_prob must be in [0, 1], got {self.drop_prob}"
            )
        if self.jitter_s < 0.0:
            raise ConfigurationError("jitter_s must be non-negative")


class _LossGate:
    """Sender-side Bernoulli drop decision with a seeded RNG."""

    def __init__(self, config: LinkConfig) -> None:
        self._config = config
        self._rng = random.Random(config.seed)

    def drops(self) -> bool:
        p = self._config.drop_prob
        return p > 0.0 and self._rng.random() < p

    def jitter(self) -> float:
        j = self._config.jitter_s
        return self._rng.uniform(0.0, j) if j > 0.0 else 0.0


class LoopbackTransport:
    """In-process datagram queue: one producer, one consumer, FIFO order.

    Loss and jitter are applied on the send side so a seeded run is
    fully deterministic.
    """

    def __init__(self, config: LinkConfig | None = None) -> None:
        self._gate = _LossGate(config or LinkConfig())
        self._queue: deque[bytes] = deque()
        self._cond = threading.Condition()
        self._open = True
        self.stats = LinkStats()

    def send(self, payload: bytes) -> bool:
        """Queue one datagram; returns False if the loss model dropped it."""
        if not self._open:
            raise TransportClosedError("send on closed transport")
        self.stats.sent += 1
        if self._gate.drops():
            self.stats.dropped += 1
            return False
        delay = self._gate.jitter()
        if delay:
            time.sleep(delay)
        with self._cond:
            self._queue.append(bytes(payload))
            self._cond.notify()
        return True

    def recv(self, timeout: float | None = None) -> bytes | None:
        """Next datagram, or None on timeout.

        Raises
        ------
        TransportClosedError
            Once the transport is closed and the queue is drained.
        """
        with self._cond:
            self._cond.wait_for(lambda: self._queue or not self._open, timeout)
            if self._queue:
                return self._queue.popleft()
            if not self._open:
                raise TransportClosedError("transport closed")
            return None

    def close(self) -> None:
        with self._cond:
            self._open = False
            self._cond.notify_all()


class UdpTransport:
    """UDP datagram endpoint emulating the connectionless radio hop.

    Build one side with :meth:`sender` (loss model applies before the
    socket write) and the other with :meth:`receiver`.
    """

    def __init__(
        self,
        sock: socket.socket,
        dest: tuple[str, int] | None = None,
        config: LinkConfig | None = None,
    ) -> None:
        self._sock = sock
        self._dest = dest
        self._gate = _LossGate(config or LinkConfig())
        self._open = True
        self.stats = LinkStats()

    @classmethod
    def sender(
        cls, host: str, port: int | None = None, config: LinkConfig | None = None
    ) -> "UdpTransport":
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        return cls(sock, dest=(host, port or default_port()), config=config)

    @classmethod
    def receiver(cls, host: str = "127.0.0.1", port: int | None = None) -> "UdpTransport":
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.bind((host, default_port() if port is None else port))
        return cls(sock)

    @property
    def bound_port(self) -> int:
        return self._sock.getsockname()[1]

    def send(self, payload: bytes) -> bool:
        if not self._open:
            raise TransportClosedError("send on closed transport")
        if self._dest is None:
            raise TransportClosedError("transport has no destination")
        self.stats.sent += 1
        if self._gate.drops():
            self.stats.dropped += 1
            return False
        delay = self._gate.jitter()
        if delay:
            time.sleep(delay)
        self._sock.sendto(payload, self._dest)
        return True

    def recv(self, timeout: float | None = None) -> bytes | None:
        if not self._open:
            raise TransportClosedError("recv on closed transport")
        self._sock.settimeout(timeout)
        try:
            data, _ = self._sock.recvfrom(4096)
            return data
        except socket.timeout:
            return None
        except OSError as exc:
            if not self._open:
                raise TransportClosedError("transport closed") from exc
            raise

    def close(self) -> None:
        self._open = False
        self._sock.close()
