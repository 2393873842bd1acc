"""Bit-exact MAVLink framing for the three localization messages.

Implements v1 (0xFE) and v2 (0xFD) framing, the X.25/MCRF4XX checksum, the
per-message crc_extra seed, and payload packing for HIL_GPS (113),
LOCAL_POSITION_NED (32) and ATT_POS_MOCAP (138).  Payload fields are
serialized little-endian, reordered by base-type size descending (stable
within equal sizes); v2 payloads drop trailing zero bytes down to a minimum
of one.  Message signing is not supported.

The pinned CRC_EXTRA constants are reproduced by crc_extra() from the field
definitions below; the test suite asserts both against an independent
reference implementation.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import ClassVar, Iterable, Optional, Union

X25_INIT = 0xFFFF
MAGIC_V1 = 0xFE
MAGIC_V2 = 0xFD

_TYPE_SIZE = {
    "uint64_t": 8, "int64_t": 8, "double": 8,
    "uint32_t": 4, "int32_t": 4, "float": 4,
    "uint16_t": 2, "int16_t": 2,
    "uint8_t": 1, "int8_t": 1, "char": 1,
}
_STRUCT_CHAR = {
    "uint64_t": "Q", "int64_t": "q", "double": "d",
    "uint32_t": "I", "int32_t": "i", "float": "f",
    "uint16_t": "H", "int16_t": "h",
    "uint8_t": "B", "int8_t": "b", "char": "c",
}

COG_UNKNOWN = 65535
VEL_UNKNOWN = 65535
SATELLITES_UNKNOWN = 255


class CodecError(Exception):
    pass


class InvariantViolation(CodecError):
    pass


class MessageIdOverflow(CodecError):
    pass


class BadMagic(CodecError):
    pass


class ShortFrame(CodecError):
    pass


class BadChecksum(CodecError):
    pass


class UnknownMessageId(CodecError):
    pass


def _build_crc_table() -> tuple[int, ...]:
    table = []
    for b in range(256):
        t = (b ^ (b << 4)) & 0xFF
        table.append(((t << 8) ^ (t << 3) ^ (t >> 4)) & 0xFFFF)
    return tuple(table)


_CRC_TABLE = _build_crc_table()
# Byte-pair table (slicing-by-2): the CRC table is XOR-linear with T[0]=0,
# so two update steps fold into U[(crc^b0)&0xFF] ^ T[(crc>>8)^b1].
_CRC_TABLE2 = tuple(
    _CRC_TABLE[t & 0xFF] ^ (t >> 8) for t in _CRC_TABLE
)


def x25_crc(data: Union[bytes, bytearray, memoryview], crc: int = X25_INIT) -> int:
    """CRC-16/MCRF4XX: poly 0x8408 reflected, init 0xFFFF, no final XOR."""
    t = _CRC_TABLE
    u = _CRC_TABLE2
    n = len(data)
    for i in range(0, n - 1, 2):
        crc = u[(crc ^ data[i]) & 0xFF] ^ t[(crc >> 8) ^ data[i + 1]]
    if n & 1:
        crc = t[(crc ^ data[n - 1]) & 0xFF] ^ (crc >> 8)
    return crc


# A field is (ctype, name, array_len or None), ctype a C base type name.
FieldDef = tuple[str, str, Optional[int]]


def wire_order(fields: Iterable[FieldDef]) -> tuple[FieldDef, ...]:
    """Sort fields by base-type size descending, stable among equal sizes."""
    return tuple(sorted(fields, key=lambda f: -_TYPE_SIZE[f[0]]))


def crc_extra(message_name: str, fields_in_wire_order: Iterable[FieldDef]) -> int:
    """8-bit seed hashed from the message definition (name + typed field list)."""
    crc = x25_crc((message_name + " ").encode("ascii"))
    for ctype, name, array_len in fields_in_wire_order:
        crc = x25_crc((ctype + " " + name + " ").encode("ascii"), crc)
        if array_len is not None:
            crc = x25_crc(bytes([array_len]), crc)
    return (crc & 0xFF) ^ (crc >> 8)


def _check_uint(name: str, value: int, bits: int) -> None:
    if not isinstance(value, int) or not 0 <= value < (1 << bits):
        raise InvariantViolation(f"{name}={value!r} outside uint{bits} range")


def _check_float(name: str, value: float) -> None:
    if not math.isfinite(value) or abs(value) > 3.4028235e38:
        raise InvariantViolation(f"{name}={value!r} is not a finite float32 value")


@dataclass(frozen=True, slots=True)
class MavFrameHeader:
    """Framing metadata; system/component ids identify the packet source."""

    sequence: int
    system_id: int
    component_id: int
    message_id: int
    protocol_version: int = 2

    def validate(self) -> None:
        if self.protocol_version not in (1, 2):
            raise InvariantViolation(f"protocol_version {self.protocol_version} not in {{1, 2}}")
        _check_uint("sequence", self.sequence, 8)
        _check_uint("system_id", self.system_id, 8)
        if self.system_id == 0:
            raise InvariantViolation("system_id 0 is reserved, sent frames need 1-255")
        _check_uint("component_id", self.component_id, 8)
        if not 0 <= self.message_id < (1 << 24):
            raise InvariantViolation(f"message_id {self.message_id} outside 24-bit range")


@dataclass(frozen=True, slots=True)
class HilGps:
    """Simulated GPS fix (HIL_GPS).

    lat/lon in degrees * 1e7, alt in mm above the ellipsoid, velocities in
    cm/s, cog in centidegrees (65535 = unknown), eph/epv dilution * 100.
    """

    time_usec: int
    lat: int
    lon: int
    alt: int
    eph: int = 30
    epv: int = 30
    vel: int = VEL_UNKNOWN
    vn: int = 0
    ve: int = 0
    vd: int = 0
    cog: int = COG_UNKNOWN
    fix_type: int = 3
    satellites_visible: int = 12

    NAME = "HIL_GPS"
    MESSAGE_ID = 113
    CRC_EXTRA = 124
    # definition (XML) order, reordered by wire_order() for the wire
    XML_FIELDS: ClassVar[tuple[FieldDef, ...]] = (
        ("uint64_t", "time_usec", None),
        ("uint8_t", "fix_type", None),
        ("int32_t", "lat", None),
        ("int32_t", "lon", None),
        ("int32_t", "alt", None),
        ("uint16_t", "eph", None),
        ("uint16_t", "epv", None),
        ("uint16_t", "vel", None),
        ("int16_t", "vn", None),
        ("int16_t", "ve", None),
        ("int16_t", "vd", None),
        ("uint16_t", "cog", None),
        ("uint8_t", "satellites_visible", None),
    )
    _STRUCT = struct.Struct("<QiiiHHHhhhHBB")

    def validate(self) -> None:
        if not (
            0 <= self.time_usec <= 0xFFFFFFFFFFFFFFFF
            and -0x80000000 <= self.lat <= 0x7FFFFFFF
            and -0x80000000 <= self.lon <= 0x7FFFFFFF
            and -0x80000000 <= self.alt <= 0x7FFFFFFF
            and 0 <= self.eph <= 0xFFFF
            and 0 <= self.epv <= 0xFFFF
            and 0 <= self.vel <= 0xFFFF
            and -0x8000 <= self.vn <= 0x7FFF
            and -0x8000 <= self.ve <= 0x7FFF
            and -0x8000 <= self.vd <= 0x7FFF
            and 0 <= self.satellites_visible <= 0xFF
        ):
            raise InvariantViolation(f"field out of wire range in {self}")
        if not (0 <= self.cog <= 35999 or self.cog == COG_UNKNOWN):
            raise InvariantViolation(f"cog={self.cog} not in [0, 35999] or 65535")
        if not 0 <= self.fix_type <= 3:
            raise InvariantViolation(f"fix_type={self.fix_type} not in 0..3")

    def pack(self) -> bytes:
        return self._STRUCT.pack(
            self.time_usec, self.lat, self.lon, self.alt,
            self.eph, self.epv, self.vel, self.vn, self.ve, self.vd,
            self.cog, self.fix_type, self.satellites_visible,
        )

    @classmethod
    def from_wire(cls, payload: bytes) -> "HilGps":
        return cls(*cls._STRUCT.unpack(payload))


@dataclass(frozen=True, slots=True)
class LocalPositionNed:
    """Local position and velocity in NED meters / m/s (LOCAL_POSITION_NED)."""

    time_boot_ms: int
    x: float
    y: float
    z: float
    vx: float
    vy: float
    vz: float

    NAME = "LOCAL_POSITION_NED"
    MESSAGE_ID = 32
    CRC_EXTRA = 185
    XML_FIELDS: ClassVar[tuple[FieldDef, ...]] = (
        ("uint32_t", "time_boot_ms", None),
        ("float", "x", None),
        ("float", "y", None),
        ("float", "z", None),
        ("float", "vx", None),
        ("float", "vy", None),
        ("float", "vz", None),
    )
    _STRUCT = struct.Struct("<I6f")

    def validate(self) -> None:
        if not 0 <= self.time_boot_ms <= 0xFFFFFFFF:
            raise InvariantViolation(f"time_boot_ms={self.time_boot_ms} outside uint32 range")
        for name in ("x", "y", "z", "vx", "vy", "vz"):
            _check_float(name, getattr(self, name))

    def pack(self) -> bytes:
        return self._STRUCT.pack(
            self.time_boot_ms, self.x, self.y, self.z, self.vx, self.vy, self.vz
        )

    @classmethod
    def from_wire(cls, payload: bytes) -> "LocalPositionNed":
        return cls(*cls._STRUCT.unpack(payload))


@dataclass(frozen=True, slots=True)
class AttPosMocap:
    """Motion-capture attitude (quaternion, NED world frame) and NED position."""

    time_usec: int
    q: tuple[float, float, float, float]  # (w, x, y, z)
    x: float
    y: float
    z: float

    NAME = "ATT_POS_MOCAP"
    MESSAGE_ID = 138
    CRC_EXTRA = 109
    XML_FIELDS: ClassVar[tuple[FieldDef, ...]] = (
        ("uint64_t", "time_usec", None),
        ("float", "q", 4),
        ("float", "x", None),
        ("float", "y", None),
        ("float", "z", None),
    )
    _STRUCT = struct.Struct("<Q7f")

    def validate(self) -> None:
        if not 0 <= self.time_usec <= 0xFFFFFFFFFFFFFFFF:
            raise InvariantViolation(f"time_usec={self.time_usec} outside uint64 range")
        if len(self.q) != 4:
            raise InvariantViolation("q must have 4 components")
        for i, c in enumerate(self.q):
            _check_float(f"q[{i}]", c)
        norm = math.sqrt(sum(c * c for c in self.q))
        if abs(norm - 1.0) > 1e-3:
            raise InvariantViolation(f"|q| = {norm:.6f} deviates from 1 by more than 1e-3")
        for name in ("x", "y", "z"):
            _check_float(name, getattr(self, name))

    def pack(self) -> bytes:
        return self._STRUCT.pack(
            self.time_usec, self.q[0], self.q[1], self.q[2], self.q[3],
            self.x, self.y, self.z,
        )

    @classmethod
    def from_wire(cls, payload: bytes) -> "AttPosMocap":
        v = cls._STRUCT.unpack(payload)
        return cls(v[0], (v[1], v[2], v[3], v[4]), v[5], v[6], v[7])


Message = Union[HilGps, LocalPositionNed, AttPosMocap]

MESSAGE_TYPES: dict[int, type] = {
    HilGps.MESSAGE_ID: HilGps,
    LocalPositionNed.MESSAGE_ID: LocalPositionNed,
    AttPosMocap.MESSAGE_ID: AttPosMocap,
}
MESSAGE_NAMES: dict[str, type] = {cls.NAME: cls for cls in MESSAGE_TYPES.values()}

for _cls in MESSAGE_TYPES.values():
    _cls.WIRE_FIELDS = wire_order(_cls.XML_FIELDS)
    _cls._CRC_EXTRA_BYTE = bytes([_cls.CRC_EXTRA])
    assert _cls._STRUCT.size == sum(
        _TYPE_SIZE[t] * (n or 1) for t, _, n in _cls.WIRE_FIELDS
    )


def pack_payload(message: Message) -> bytes:
    """Serialize a validated message to its full (untruncated) payload."""
    try:
        message.validate()
        return message.pack()
    except (TypeError, struct.error) as e:  # non-numeric field values
        raise InvariantViolation(str(e)) from None


def encode_frame(header: MavFrameHeader, message: Message, crc_seed: Optional[int] = None) -> bytes:
    """Encode one frame. v2 truncates trailing zero payload bytes (min length 1)."""
    header.validate()
    if header.message_id != message.MESSAGE_ID:
        raise InvariantViolation(
            f"header message_id {header.message_id} != {type(message).__name__} id {message.MESSAGE_ID}"
        )
    payload = pack_payload(message)
    seed = message.CRC_EXTRA if crc_seed is None else crc_seed
    if header.protocol_version == 2:
        n = len(payload)
        while n > 1 and payload[n - 1] == 0:
            n -= 1
        payload = payload[:n]
        body = bytes(
            [len(payload), 0, 0, header.sequence, header.system_id, header.component_id]
        ) + header.message_id.to_bytes(3, "little") + payload
        magic = MAGIC_V2
    else:
        if header.message_id > 0xFF:
            raise MessageIdOverflow(f"message id {header.message_id} does not fit MAVLink v1")
        body = bytes(
            [len(payload), header.sequence, header.system_id, header.component_id, header.message_id]
        ) + payload
        magic = MAGIC_V1
    crc = x25_crc(body + bytes([seed]))
    return bytes([magic]) + body + bytes([crc & 0xFF, crc >> 8])


def decode_frame(data: Union[bytes, bytearray]) -> tuple[MavFrameHeader, Message]:
    """Decode and checksum-verify one frame (the three known message ids only).

    v2 payloads are zero-extended back to full length before unpacking;
    payload bytes beyond the known definition (extensions) are ignored, as
    are any trailing bytes after the checksum.
    """
    if len(data) < 1:
        raise ShortFrame("empty buffer")
    magic = data[0]
    if magic == MAGIC_V2:
        header_len = 10
    elif magic == MAGIC_V1:
        header_len = 6
    else:
        raise BadMagic(f"0x{magic:02X} is not a MAVLink frame magic")
    if len(data) < header_len:
        raise ShortFrame(f"{len(data)} bytes is too short for a frame header")
    payload_len = data[1]
    total = header_len + payload_len + 2
    if len(data) < total:
        raise ShortFrame(f"need {total} bytes, have {len(data)}")
    if magic == MAGIC_V2:
        sequence, system_id, component_id = data[4], data[5], data[6]
        message_id = int.from_bytes(data[7:10], "little")
        version = 2
    else:
        sequence, system_id, component_id = data[2], data[3], data[4]
        message_id = data[5]
        version = 1
    cls = MESSAGE_TYPES.get(message_id)
    if cls is None:
        raise UnknownMessageId(f"message id {message_id} is not decodable here")
    crc = x25_crc(bytes(data[1 : header_len + payload_len]) + cls._CRC_EXTRA_BYTE)
    wire_crc = data[header_len + payload_len] | (data[header_len + payload_len + 1] << 8)
    if crc != wire_crc:
        raise BadChecksum(f"computed 0x{crc:04X}, frame carries 0x{wire_crc:04X}")
    size = cls._STRUCT.size
    payload = bytes(data[header_len : header_len + payload_len])
    if len(payload) < size:
        payload = payload + b"\x00" * (size - len(payload))
    elif len(payload) > size:
        payload = payload[:size]
    header = MavFrameHeader(
        sequence=sequence,
        system_id=system_id,
        component_id=component_id,
        message_id=message_id,
        protocol_version=version,
    )
    return header, cls.from_wire(payload)


class FrameEncoder:
    """Stateful encoder: owns the wrapping sequence counter for one sender."""

    def __init__(self, system_id: int = 255, component_id: int = 1, protocol_version: int = 2) -> None:
        self.system_id = system_id
        self.component_id = component_id
        self.protocol_version = protocol_version
        self.sequence = 0

    def encode(self, message: Message) -> bytes:
        header = MavFrameHeader(
            sequence=self.sequence,
            system_id=self.system_id,
            component_id=self.component_id,
            message_id=message.MESSAGE_ID,
            protocol_version=self.protocol_version,
        )
        frame = encode_frame(header, message)
        self.sequence = (self.sequence + 1) & 0xFF
        return frame
