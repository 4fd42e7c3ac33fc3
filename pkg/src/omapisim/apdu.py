"""ISO 7816-4 short APDUs, CLA channel coding, status words and the hex codec."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

HEX = "0123456789abcdef"

MAX_CHANNEL = 3


class ApduError(ValueError):
    pass


class MalformedApdu(ApduError):
    pass


class ExtendedLengthUnsupported(ApduError):
    pass


class ChannelOutOfRange(ApduError):
    pass


class HexError(ValueError):
    pass


class InvalidHexChar(HexError):
    def __init__(self, char: str):
        super().__init__(f"invalid hex char '{char}'")
        self.char = char


class OddLength(HexError):
    pass


def bytes_to_hex(data: Optional[bytes]) -> Optional[str]:
    if data is None:
        return None
    out = []
    for b in data:
        out.append(HEX[(b >> 4) & 0xF])
        out.append(HEX[b & 0xF])
    return "".join(out)


def _hex_char_to_int(c: str) -> int:
    if "0" <= c <= "9":
        return ord(c) - ord("0")
    if "A" <= c <= "F":
        return ord(c) - ord("A") + 10
    if "a" <= c <= "f":
        return ord(c) - ord("a") + 10
    raise InvalidHexChar(c)


def hex_to_bytes(s: Optional[str]) -> Optional[bytes]:
    """Decode a hex string, accepting either case.

    Unlike the permissive decoders found on handsets, odd-length input is
    rejected instead of silently dropping the trailing digit.
    """
    if s is None:
        return None
    for c in s:
        _hex_char_to_int(c)
    if len(s) % 2:
        raise OddLength(f"odd-length hex string ({len(s)} digits)")
    return bytes(
        (_hex_char_to_int(s[i]) << 4) | _hex_char_to_int(s[i + 1])
        for i in range(0, len(s), 2)
    )


class ApduCase(enum.IntEnum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4


def _check_byte(name: str, value: int) -> None:
    if not 0 <= value <= 0xFF:
        raise ValueError(f"{name} out of byte range: {value}")


@dataclass(frozen=True)
class CommandApdu:
    cla: int
    ins: int
    p1: int
    p2: int
    data: bytes = b""
    le: Optional[int] = None

    def __post_init__(self):
        for name in ("cla", "ins", "p1", "p2"):
            _check_byte(name, getattr(self, name))
        if len(self.data) > 255:
            raise ExtendedLengthUnsupported(f"command data too long for a short APDU: {len(self.data)}")
        if self.le is not None:
            _check_byte("le", self.le)
        object.__setattr__(self, "data", bytes(self.data))

    @property
    def case(self) -> ApduCase:
        if not self.data:
            return ApduCase.CASE1 if self.le is None else ApduCase.CASE2
        return ApduCase.CASE3 if self.le is None else ApduCase.CASE4

    @property
    def header(self) -> bytes:
        return bytes([self.cla, self.ins, self.p1, self.p2])

    @property
    def channel(self) -> int:
        return self.cla & 0x03

    def to_bytes(self) -> bytes:
        out = self.header
        if self.data:
            out += bytes([len(self.data)]) + self.data
        if self.le is not None:
            out += bytes([self.le])
        return out

    __bytes__ = to_bytes

    def with_channel(self, channel_number: int) -> "CommandApdu":
        return CommandApdu(set_cla_channel(self.cla, channel_number), self.ins,
                           self.p1, self.p2, self.data, self.le)


@dataclass(frozen=True)
class ResponseApdu:
    data: bytes
    sw1: int
    sw2: int

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ResponseApdu":
        if len(raw) < 2:
            raise MalformedApdu(f"response shorter than a status word: {len(raw)} bytes")
        return cls(bytes(raw[:-2]), raw[-2], raw[-1])

    @classmethod
    def status(cls, sw: int) -> "ResponseApdu":
        return cls(b"", sw >> 8, sw & 0xFF)

    @property
    def sw(self) -> int:
        return (self.sw1 << 8) | self.sw2

    def to_bytes(self) -> bytes:
        return self.data + bytes([self.sw1, self.sw2])

    __bytes__ = to_bytes


def parse_command(raw: bytes) -> CommandApdu:
    """Parse a short command APDU, classifying it by length alone."""
    raw = bytes(raw)
    n = len(raw)
    if n < 4:
        raise MalformedApdu(f"APDU shorter than its header: {n} bytes")
    cla, ins, p1, p2 = raw[:4]
    if n == 4:
        return CommandApdu(cla, ins, p1, p2)
    if n == 5:
        return CommandApdu(cla, ins, p1, p2, le=raw[4])
    lc = raw[4]
    if lc == 0:
        if n >= 7:
            raise ExtendedLengthUnsupported("extended-length APDUs are not supported")
        raise MalformedApdu("Lc of zero in a short APDU")
    if n == 5 + lc:
        return CommandApdu(cla, ins, p1, p2, raw[5:])
    if n == 6 + lc:
        return CommandApdu(cla, ins, p1, p2, raw[5:-1], raw[-1])
    raise MalformedApdu(f"length {n} does not match Lc={lc}")


@dataclass(frozen=True)
class TelephonyArgs:
    """Argument set of the telephony transmit call for one APDU."""

    cla_masked: int
    ins: int
    channel_index: int
    p1: int
    p2: int
    len: int
    data_hex: Optional[str]


def to_telephony_args(cmd: CommandApdu) -> TelephonyArgs:
    case = cmd.case
    if case is ApduCase.CASE1:
        length, data_hex = -1, None
    elif case is ApduCase.CASE2:
        length, data_hex = cmd.le, None
    elif case is ApduCase.CASE3:
        length, data_hex = len(cmd.data), bytes_to_hex(cmd.data)
    else:
        # Le rides along as the last data byte; 0x00 is kept as-is.
        length, data_hex = len(cmd.data), bytes_to_hex(cmd.data + bytes([cmd.le]))
    return TelephonyArgs(cmd.cla & 0xFC, cmd.ins, cmd.cla & 0x03, cmd.p1, cmd.p2, length, data_hex)


def set_cla_channel(cla: int, channel_number: int) -> int:
    if not 0 <= channel_number <= MAX_CHANNEL:
        raise ChannelOutOfRange(f"logical channel {channel_number} outside 0..{MAX_CHANNEL}")
    return (cla & 0xFC) | channel_number


def cla_channel(cla: int) -> int:
    return cla & 0x03


def sw_success(sw1: int) -> bool:
    return sw1 in (0x90, 0x91, 0x9E, 0x9F)


class IccException(Exception):
    def __init__(self, sw1: int, sw2: int):
        super().__init__(f"sw1:{sw1} sw2:{sw2}")
        self.sw1 = sw1
        self.sw2 = sw2


class IccFileNotFound(IccException):
    pass


class IccFileTypeMismatch(IccException):
    pass


def classify_sw_failure(sw1: int, sw2: int) -> Optional[IccException]:
    """Return the exception describing a failed status word (None on success)."""
    if sw_success(sw1):
        return None
    if sw1 == 0x94:
        if sw2 == 0x08:
            return IccFileTypeMismatch(sw1, sw2)
        return IccFileNotFound(sw1, sw2)
    return IccException(sw1, sw2)
