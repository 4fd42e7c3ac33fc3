"""Codec for the proprietary RIL_REQUEST_OEM_HOOK_RAW UICC frames.

Request frames share one layout::

    0x15 | code (1) | total length (2, big-endian) | parameters

where the length counts the whole frame. Responses are command specific
and are produced by the modem side of this module as well, so that the
simulator and the telephony service agree on a single definition.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Optional, Union

from .apdu import bytes_to_hex

MAX_FRAME = 0xFFFF
HEADER = struct.Struct(">BBH")


class OemCommandCode(enum.IntEnum):
    EXCHANGE_BASIC = 0x1508
    OPEN_CHANNEL = 0x1509
    CLOSE_CHANNEL = 0x150A
    EXCHANGE_LOGICAL_WITH_P3 = 0x150B
    EXCHANGE_LOGICAL_CASE1 = 0x150C
    GET_ATR = 0x150D


class RilError(enum.IntEnum):
    GENERIC_FAILURE = 2
    INVALID_PARAMETER = 27
    NO_SUCH_ELEMENT = 29
    MISSING_RESOURCE = 30


def map_ril_error(code: int) -> RilError:
    try:
        error = RilError(code)
    except ValueError:
        return RilError.GENERIC_FAILURE
    return error


class OemHookError(ValueError):
    pass


class UnknownCommandCode(OemHookError):
    pass


class LengthMismatch(OemHookError):
    pass


class TruncatedFrame(OemHookError):
    pass


class FrameTooLong(OemHookError):
    pass


class ZeroChannelId(OemHookError):
    pass


class MalformedFrame(OemHookError):
    pass


def _check_u32(value: int) -> None:
    if not 0 <= value <= 0xFFFFFFFF:
        raise ValueError(f"channel id out of 32-bit range: {value}")


@dataclass(frozen=True)
class GetAtr:
    pass


@dataclass(frozen=True)
class OpenChannel:
    aid: bytes

    def __post_init__(self):
        object.__setattr__(self, "aid", bytes(self.aid))


@dataclass(frozen=True)
class CloseChannel:
    channel_id: int

    def __post_init__(self):
        _check_u32(self.channel_id)


@dataclass(frozen=True)
class Exchange:
    """One APDU exchange; channel_id 0 addresses the basic channel."""

    channel_id: int
    cla: int
    ins: int
    p1: int
    p2: int
    p3: Optional[int] = None
    data: bytes = field(default=b"")

    def __post_init__(self):
        _check_u32(self.channel_id)
        for name in ("cla", "ins", "p1", "p2"):
            v = getattr(self, name)
            if not 0 <= v <= 0xFF:
                raise ValueError(f"{name} out of byte range: {v}")
        if self.p3 is not None and not 0 <= self.p3 <= 0xFF:
            raise ValueError(f"p3 out of byte range: {self.p3}")
        if self.p3 is None and self.data:
            raise ValueError("data without a P3 byte cannot be framed")
        object.__setattr__(self, "data", bytes(self.data))

    @property
    def header(self) -> bytes:
        return bytes([self.cla, self.ins, self.p1, self.p2])

    @property
    def code(self) -> OemCommandCode:
        if self.channel_id == 0:
            return OemCommandCode.EXCHANGE_BASIC
        if self.p3 is None:
            return OemCommandCode.EXCHANGE_LOGICAL_CASE1
        return OemCommandCode.EXCHANGE_LOGICAL_WITH_P3


OemHookRequest = Union[GetAtr, OpenChannel, CloseChannel, Exchange]


def _frame(code: OemCommandCode, params: bytes) -> bytes:
    total = 4 + len(params)
    if total > MAX_FRAME:
        raise FrameTooLong(f"frame of {total} bytes exceeds {MAX_FRAME}")
    return HEADER.pack(code >> 8, code & 0xFF, total) + params


def encode_request(req: OemHookRequest) -> bytes:
    if isinstance(req, GetAtr):
        return _frame(OemCommandCode.GET_ATR, b"")
    if isinstance(req, OpenChannel):
        return _frame(OemCommandCode.OPEN_CHANNEL, req.aid)
    if isinstance(req, CloseChannel):
        return _frame(OemCommandCode.CLOSE_CHANNEL, struct.pack(">I", req.channel_id))
    if isinstance(req, Exchange):
        p3 = b"" if req.p3 is None else bytes([req.p3])
        code = req.code
        if code is OemCommandCode.EXCHANGE_BASIC:
            params = req.header + p3 + req.data
        else:
            params = req.header + p3 + struct.pack(">I", req.channel_id) + req.data
        return _frame(code, params)
    raise TypeError(f"not an OEM hook request: {req!r}")


def frame_header(raw: bytes) -> tuple[int, int]:
    """Return (command code, declared length) after checking the frame size."""
    if len(raw) < 4:
        raise TruncatedFrame(f"frame shorter than its header: {len(raw)} bytes")
    marker, low, declared = HEADER.unpack_from(raw)
    if declared != len(raw):
        raise LengthMismatch(f"length field {declared} but frame has {len(raw)} bytes")
    return (marker << 8) | low, declared


def decode_request(raw: bytes) -> OemHookRequest:
    raw = bytes(raw)
    code, size = frame_header(raw)
    try:
        code = OemCommandCode(code)
    except ValueError:
        raise UnknownCommandCode(f"unknown command code 0x{code:04x}") from None

    def expect(n: int) -> None:
        if size != n:
            raise LengthMismatch(f"{code.name} requires {n} bytes, length field says {size}")

    if code is OemCommandCode.GET_ATR:
        expect(4)
        return GetAtr()
    if code is OemCommandCode.OPEN_CHANNEL:
        return OpenChannel(raw[4:])
    if code is OemCommandCode.CLOSE_CHANNEL:
        expect(8)
        (channel_id,) = struct.unpack_from(">I", raw, 4)
        return CloseChannel(channel_id)

    cla, ins, p1, p2 = raw[4:8] if size >= 8 else (None,) * 4
    if code is OemCommandCode.EXCHANGE_BASIC:
        if size < 8:
            raise LengthMismatch(f"{code.name} requires at least 8 bytes, length field says {size}")
        if size == 8:
            return Exchange(0, cla, ins, p1, p2)
        return Exchange(0, cla, ins, p1, p2, raw[8], raw[9:])
    if code is OemCommandCode.EXCHANGE_LOGICAL_CASE1:
        expect(12)
        (channel_id,) = struct.unpack_from(">I", raw, 8)
        if channel_id == 0:
            raise ZeroChannelId("logical-channel exchange addressed to channel id 0")
        return Exchange(channel_id, cla, ins, p1, p2)
    # EXCHANGE_LOGICAL_WITH_P3
    if size < 13:
        raise LengthMismatch(f"{code.name} requires at least 13 bytes, length field says {size}")
    (channel_id,) = struct.unpack_from(">I", raw, 9)
    if channel_id == 0:
        raise ZeroChannelId("logical-channel exchange addressed to channel id 0")
    return Exchange(channel_id, cla, ins, p1, p2, raw[8], raw[13:])


# Responses


def encode_atr_response(atr: bytes) -> bytes:
    if len(atr) > 0xFF:
        raise FrameTooLong(f"ATR of {len(atr)} bytes does not fit a length byte")
    # Second byte has no known meaning; the decoder never reads it.
    return bytes([len(atr), 0x00]) + bytes(atr)


def decode_atr_response(raw: bytes) -> Optional[bytes]:
    if len(raw) < 2:
        raise TruncatedFrame(f"ATR response shorter than 2 bytes: {len(raw)}")
    n = raw[0]
    if n == 0:
        return None
    if len(raw) < 2 + n:
        raise TruncatedFrame(f"ATR length {n} but only {len(raw) - 2} bytes present")
    return bytes(raw[2:2 + n])


@dataclass(frozen=True)
class OpenChannelResponse:
    channel_id: int
    select_response: Optional[bytes] = None


def encode_open_response(channel_id: int, select_response: Optional[bytes] = None,
                         id_len: Optional[int] = None) -> bytes:
    """Modem-side open-channel response; the id field is little-endian."""
    _check_u32(channel_id)
    if channel_id == 0:
        raise ZeroChannelId("open response must carry a non-zero channel id")
    if id_len is None:
        id_len = max(1, (channel_id.bit_length() + 7) // 8)
    if not 1 <= id_len <= 4 or channel_id >= 1 << (8 * id_len):
        raise ValueError(f"channel id {channel_id} does not fit in {id_len} bytes")
    select_response = select_response or b""
    if len(select_response) > 0xFF:
        raise FrameTooLong(f"SELECT response of {len(select_response)} bytes does not fit a length byte")
    return (bytes([id_len]) + channel_id.to_bytes(id_len, "little")
            + bytes([len(select_response)]) + bytes(select_response))


def decode_open_response(raw: bytes) -> OpenChannelResponse:
    if not raw:
        raise TruncatedFrame("empty open-channel response")
    id_len = raw[0]
    if not 1 <= id_len <= 4:
        raise MalformedFrame(f"channel id length {id_len} outside 1..4")
    if len(raw) < id_len + 2:
        raise TruncatedFrame(f"open-channel response too short for id length {id_len}")
    channel_id = 0
    for i in range(id_len, 0, -1):
        channel_id = (channel_id << 8) | raw[i]
    if channel_id == 0:
        raise ZeroChannelId("open-channel response carries channel id 0")
    sel_len = raw[id_len + 1]
    start = id_len + 2
    if len(raw) < start + sel_len:
        raise TruncatedFrame(f"SELECT response length {sel_len} but only {len(raw) - start} bytes present")
    select_response = bytes(raw[start:start + sel_len]) if sel_len else None
    return OpenChannelResponse(channel_id, select_response)


# Trace lines shared by the modem hook and the CLI.


def trace_request(frame: bytes) -> str:
    return ">> " + bytes_to_hex(frame)


def trace_response(payload: bytes) -> str:
    return "<< " + bytes_to_hex(payload)


def trace_error(error: RilError) -> str:
    return "!! " + error.name
