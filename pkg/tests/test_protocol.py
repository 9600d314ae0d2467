"""Wire frames: packing, CRC, decode errors, and the link simulator."""

import math
import random
import struct

import pytest

from fieldrover.protocol import (
    MAX_FRAME,
    PROTOCOL_VERSION,
    AckPayload,
    ControlPayload,
    DeliveredFrame,
    Frame,
    FrameError,
    FrameErrorKind,
    FrameKind,
    LinkConfig,
    LinkSimulator,
    PositionPayload,
    StuckPayload,
    TelemetryPayload,
    crc16,
    decode_frame,
    encode_frame,
)


def random_frame(rng: random.Random) -> Frame:
    seq = rng.randrange(256)
    kind = rng.choice(list(FrameKind))
    if kind == FrameKind.CONTROL:
        payload = ControlPayload(rng.uniform(-30, 30), rng.uniform(-30, 30))
    elif kind == FrameKind.POSITION:
        payload = PositionPayload(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000))
    elif kind == FrameKind.STUCK:
        payload = StuckPayload(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000))
    elif kind == FrameKind.TELEMETRY:
        payload = TelemetryPayload(
            rng.uniform(-2000, 2000),
            rng.uniform(-2000, 2000),
            rng.uniform(-math.pi, math.pi),
            rng.random(),
            rng.choice(
                ("none", "tick", "continue_tracking", "new_path", "stuck", "complete")
            ),
        )
    else:
        payload = AckPayload(rng.randrange(256))
    return Frame(seq=seq, payload=payload)


class TestCrc:
    def test_known_vector(self):
        # CRC-16/CCITT-FALSE check value for the ASCII digits 1-9
        assert crc16(b"123456789") == 0x29B1

    def test_empty_is_initial_value(self):
        assert crc16(b"") == 0xFFFF

    def test_single_bit_sensitivity(self):
        base = crc16(b"\x00" * 16)
        for i in range(16 * 8):
            data = bytearray(16)
            data[i // 8] ^= 1 << (i % 8)
            assert crc16(bytes(data)) != base


class TestGoldenBytes:
    """Byte-exact fixtures so the wire format cannot drift silently."""

    def test_control_frame_bytes(self):
        frame = Frame(seq=7, payload=ControlPayload(0.5, -0.25))
        encoded = encode_frame(frame)
        body = bytes([0x11, 0x07]) + struct.pack(">hh", 500, -250)
        crc = crc16(body)
        assert encoded == body + bytes([crc >> 8, crc & 0xFF])

    def test_stuck_frame_bytes(self):
        frame = Frame(seq=255, payload=StuckPayload(48.382, 2.5))
        encoded = encode_frame(frame)
        body = bytes([0x13, 0xFF]) + struct.pack(">ii", 48382, 2500)
        crc = crc16(body)
        assert encoded == body + bytes([crc >> 8, crc & 0xFF])

    def test_telemetry_frame_bytes(self):
        frame = Frame(
            seq=1,
            payload=TelemetryPayload(1.0, -2.0, 0.5, 0.953, "new_path"),
        )
        encoded = encode_frame(frame)
        body = bytes([0x14, 0x01]) + struct.pack(">iihHB", 1000, -2000, 500, 953, 3)
        crc = crc16(body)
        assert encoded == body + bytes([crc >> 8, crc & 0xFF])

    def test_sizes(self):
        sizes = {
            FrameKind.CONTROL: 8,
            FrameKind.POSITION: 12,
            FrameKind.STUCK: 12,
            FrameKind.TELEMETRY: 17,
            FrameKind.ACK: 5,
        }
        rng = random.Random(0)
        for _ in range(200):
            f = random_frame(rng)
            assert len(encode_frame(f)) == sizes[f.kind] <= MAX_FRAME


class TestRoundTrip:
    def test_random_frames(self):
        rng = random.Random(42)
        for _ in range(5000):
            f = random_frame(rng)
            g = decode_frame(encode_frame(f))
            assert g.seq == f.seq
            assert g.kind == f.kind
            # fixed-point quantization: mm for positions, mrad for headings
            if f.kind in (FrameKind.POSITION, FrameKind.STUCK):
                assert g.payload.x == pytest.approx(f.payload.x, abs=5e-4)
                assert g.payload.y == pytest.approx(f.payload.y, abs=5e-4)
            elif f.kind == FrameKind.TELEMETRY:
                assert g.payload.heading == pytest.approx(f.payload.heading, abs=5e-4)
                assert g.payload.coverage == pytest.approx(f.payload.coverage, abs=5e-4)
                assert g.payload.decision == f.payload.decision

    def test_exact_round_trip_on_lattice_values(self):
        """Values already on the fixed-point lattice survive bit-exactly."""
        f = Frame(seq=9, payload=PositionPayload(1.234, -5.678))
        g = decode_frame(encode_frame(f))
        assert (g.payload.x, g.payload.y) == (1.234, -5.678)
        assert encode_frame(g) == encode_frame(f)


class TestDecodeErrors:
    def test_too_short(self):
        for n in range(4):
            with pytest.raises(FrameError) as e:
                decode_frame(b"\x11" * n)
            assert e.value.kind == FrameErrorKind.TOO_SHORT

    def test_oversize_precedes_everything(self):
        with pytest.raises(FrameError) as e:
            decode_frame(b"\x00" * (MAX_FRAME + 1))
        assert e.value.kind == FrameErrorKind.OVERSIZE

    def test_unknown_kind(self):
        data = bytearray(encode_frame(Frame(0, AckPayload(0))))
        data[0] = (PROTOCOL_VERSION << 4) | 0x0E
        with pytest.raises(FrameError) as e:
            decode_frame(bytes(data))
        assert e.value.kind == FrameErrorKind.UNKNOWN_KIND

    def test_wrong_version(self):
        data = bytearray(encode_frame(Frame(0, AckPayload(0))))
        data[0] = (2 << 4) | int(FrameKind.ACK)
        with pytest.raises(FrameError) as e:
            decode_frame(bytes(data))
        assert e.value.kind == FrameErrorKind.UNKNOWN_KIND

    def test_truncated_payload(self):
        data = encode_frame(Frame(0, PositionPayload(1.0, 2.0)))[:6]
        with pytest.raises(FrameError) as e:
            decode_frame(data)
        assert e.value.kind == FrameErrorKind.TOO_SHORT

    def test_trailing_bytes(self):
        data = encode_frame(Frame(0, AckPayload(1))) + b"\x00"
        with pytest.raises(FrameError) as e:
            decode_frame(data)
        assert e.value.kind == FrameErrorKind.TRAILING_BYTES

    def test_bad_checksum(self):
        data = bytearray(encode_frame(Frame(3, ControlPayload(0.1, 0.2))))
        data[-1] ^= 0xFF
        with pytest.raises(FrameError) as e:
            decode_frame(bytes(data))
        assert e.value.kind == FrameErrorKind.BAD_CHECKSUM

    def test_payload_range_checked_after_checksum(self):
        # forge a telemetry frame with an out-of-range decision code but a
        # valid checksum: the decoder must flag the payload, not the crc
        body = bytes([0x14, 0x00]) + struct.pack(">iihHB", 0, 0, 0, 0, 250)
        crc = crc16(body)
        data = body + bytes([crc >> 8, crc & 0xFF])
        with pytest.raises(FrameError) as e:
            decode_frame(data)
        assert e.value.kind == FrameErrorKind.PAYLOAD_RANGE

    def test_single_bit_corruption_rejected(self):
        rng = random.Random(7)
        for _ in range(100):
            encoded = encode_frame(random_frame(rng))
            bit = rng.randrange(len(encoded) * 8)
            corrupted = bytearray(encoded)
            corrupted[bit // 8] ^= 1 << (bit % 8)
            with pytest.raises(FrameError):
                decode_frame(bytes(corrupted))

    def test_fuzz_random_bytes_never_crash(self):
        rng = random.Random(123)
        for _ in range(20000):
            n = rng.randrange(0, 40)
            blob = rng.randbytes(n)
            try:
                decode_frame(blob)
            except FrameError:
                pass  # the only acceptable failure mode


class TestPayloadValidation:
    def test_control_out_of_range(self):
        with pytest.raises(ValueError):
            encode_frame(Frame(0, ControlPayload(1e6, 0.0)))

    def test_bad_seq(self):
        with pytest.raises(ValueError):
            Frame(seq=256, payload=AckPayload(0))

    def test_bad_decision_string(self):
        with pytest.raises(ValueError):
            TelemetryPayload(0, 0, 0, 0, "teleport")

    def test_bad_ack_seq(self):
        with pytest.raises(ValueError):
            AckPayload(300)

    def test_coverage_clamped_to_permille(self):
        f = Frame(0, TelemetryPayload(0, 0, 0, 1.7, "tick"))
        g = decode_frame(encode_frame(f))
        assert g.payload.coverage == 1.0


class TestLinkConfig:
    def test_defaults_valid(self):
        LinkConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"data_rate": 0.0},
            {"latency": -1.0},
            {"loss_probability": 1.5},
            {"duty_cycle_max": 0.0},
            {"duty_window": 0.0},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LinkConfig(**kwargs)

    def test_window_must_fit_max_frame(self):
        with pytest.raises(ValueError):
            LinkConfig(duty_window=1.0, duty_cycle_max=0.01)


class TestLinkSimulator:
    def test_airtime_and_latency(self):
        link = LinkSimulator(LinkConfig())
        f = Frame(0, AckPayload(0))
        airtime = len(encode_frame(f)) * 8 / 5470.0
        t = link.send(f, 0.0)
        assert t == pytest.approx(airtime + 0.5)
        assert link.poll(t - 1e-6) == []
        out = link.poll(t + 1e-6)
        assert len(out) == 1
        assert isinstance(out[0], DeliveredFrame)
        assert out[0].frame == f

    def test_serialized_transmissions(self):
        link = LinkSimulator(LinkConfig())
        f = Frame(0, AckPayload(0))
        airtime = len(encode_frame(f)) * 8 / 5470.0
        t1 = link.send(f, 0.0)
        t2 = link.send(f, 0.0)  # same instant: must queue behind the first
        assert t2 >= t1 + airtime - 1e-12

    def test_delivery_order_preserved(self):
        link = LinkSimulator(LinkConfig())
        frames = [Frame(i, AckPayload(i)) for i in range(5)]
        for i, f in enumerate(frames):
            link.send(f, i * 0.001)
        out = link.poll(100.0)
        assert [d.frame.seq for d in out] == [0, 1, 2, 3, 4]

    def test_loss_consumes_airtime(self):
        link = LinkSimulator(LinkConfig(loss_probability=1.0, seed=1))
        before = link.airtime_fraction(10.0)
        assert link.send(Frame(0, AckPayload(0)), 0.0) is None
        assert link.dropped_count == 1
        assert link.sent_count == 1
        assert link.airtime_fraction(10.0) > before

    def test_loss_rate_statistical(self):
        link = LinkSimulator(
            LinkConfig(loss_probability=0.3, duty_cycle_max=1.0, seed=5)
        )
        n = 400
        drops = sum(
            link.send(Frame(i % 256, AckPayload(0)), i * 10.0) is None
            for i in range(n)
        )
        assert 0.2 < drops / n < 0.4

    def test_duty_cycle_defers_burst(self):
        """A burst bigger than one window's budget spills into later windows."""
        cfg = LinkConfig()
        link = LinkSimulator(cfg)
        f = Frame(0, TelemetryPayload(1, 2, 0.3, 0.5, "tick"))
        airtime = len(encode_frame(f)) * 8 / cfg.data_rate
        per_window = int(cfg.duty_cycle_max * cfg.duty_window / airtime)
        deliveries = [link.send(f, 0.0) for _ in range(3 * per_window)]
        assert deliveries[-1] > cfg.duty_window  # pushed past the first window

    def test_duty_invariant_under_random_schedules(self):
        """At no transmission end does any trailing window exceed the cap."""
        rng = random.Random(99)
        cfg = LinkConfig(duty_window=20.0, duty_cycle_max=0.02)
        link = LinkSimulator(cfg)
        now = 0.0
        ends = []
        for _ in range(300):
            now += rng.expovariate(2.0)
            f = random_frame(rng)
            link.send(f, now)
            ends.append(link._busy_until)
        for e in ends:
            assert link.airtime_fraction(e) <= cfg.duty_cycle_max + 1e-9

    def test_flush_pending_drops_undelivered(self):
        link = LinkSimulator(LinkConfig())
        link.send(Frame(0, AckPayload(0)), 0.0)
        assert link.flush_pending() == 1
        assert link.poll(100.0) == []
        # airtime stays spent even though delivery was cancelled
        assert link.airtime_fraction(1.0) > 0.0

    def test_airtime_fraction_decays(self):
        cfg = LinkConfig()
        link = LinkSimulator(cfg)
        link.send(Frame(0, AckPayload(0)), 0.0)
        busy = link.airtime_fraction(1.0)
        assert busy > 0.0
        assert link.airtime_fraction(200.0) == 0.0
