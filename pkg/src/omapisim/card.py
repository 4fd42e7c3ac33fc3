"""Simulated UICC: scripted applets, four channel slots, a tiny file store."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .apdu import CommandApdu, ResponseApdu, parse_command, sw_success

DEFAULT_ATR = bytes.fromhex("3b00")
LOGICAL_CHANNELS = (1, 2, 3)

SW_OK = 0x9000
SW_WRONG_LE = 0x6C00
SW_FUNCTION_NOT_SUPPORTED = 0x6A81
SW_FILE_NOT_FOUND = 0x6A82
SW_REFERENCED_DATA_NOT_FOUND = 0x6A88
SW_WRONG_P1P2 = 0x6B00
SW_INS_NOT_SUPPORTED = 0x6D00

INS_SELECT = 0xA4
INS_MANAGE_CHANNEL = 0x70
INS_GET_RESPONSE = 0xC0
INS_READ_BINARY = 0xB0


class CardError(Exception):
    pass


class CardAbsent(CardError):
    pass


class NoFreeChannel(CardError):
    pass


class AppletNotFound(CardError):
    pass


class InvalidChannel(CardError):
    pass


def _check_reply(reply: bytes, what: str) -> bytes:
    reply = bytes(reply)
    if len(reply) < 2:
        raise ValueError(f"{what} must end in a status word, got {reply.hex() or 'nothing'}")
    return reply


@dataclass(frozen=True)
class Handler:
    ins: int
    reply: bytes
    p1: Optional[int] = None
    p2: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "reply", _check_reply(self.reply, "handler reply"))

    def matches(self, cmd: CommandApdu) -> bool:
        return (cmd.ins == self.ins
                and (self.p1 is None or cmd.p1 == self.p1)
                and (self.p2 is None or cmd.p2 == self.p2))


@dataclass(frozen=True)
class AppletScript:
    aid: bytes
    select_response: bytes
    handlers: tuple[Handler, ...] = ()
    default_reply: bytes = bytes.fromhex("6d00")

    def __post_init__(self):
        object.__setattr__(self, "aid", bytes(self.aid))
        if not 5 <= len(self.aid) <= 16:
            raise ValueError(f"AID must be 5..16 bytes, got {len(self.aid)}")
        object.__setattr__(self, "select_response",
                           _check_reply(self.select_response, "select response"))
        object.__setattr__(self, "default_reply", _check_reply(self.default_reply, "default reply"))
        object.__setattr__(self, "handlers", tuple(self.handlers))

    @property
    def selectable(self) -> bool:
        return sw_success(self.select_response[-2])

    def respond(self, cmd: CommandApdu) -> bytes:
        for handler in self.handlers:
            if handler.matches(cmd):
                return handler.reply
        return self.default_reply


@dataclass
class ChannelSlot:
    in_use: bool = False
    selected_aid: Optional[bytes] = None
    cached_select_response: Optional[bytes] = None

    def clear(self) -> None:
        self.in_use = False
        self.selected_aid = None
        self.cached_select_response = None


@dataclass
class VirtualCard:
    """A UICC state machine. Not thread-safe; the modem serializes access."""

    atr: bytes = DEFAULT_ATR
    applets: dict[bytes, AppletScript] = field(default_factory=dict)
    files: dict[tuple[int, str], bytes] = field(default_factory=dict)
    present: bool = True
    channels: list[ChannelSlot] = field(init=False)

    def __post_init__(self):
        self.channels = [ChannelSlot() for _ in range(4)]
        self.channels[0].in_use = True
        self.files = {(fid, path.upper()): bytes(content) for (fid, path), content in self.files.items()}

    def install(self, applet: AppletScript) -> None:
        self.applets[applet.aid] = applet

    def add_file(self, file_id: int, path: str, content: bytes) -> None:
        self.files[(file_id, path.upper())] = bytes(content)

    def _require_present(self) -> None:
        if not self.present:
            raise CardAbsent("no card in the slot")

    def _find_applet(self, aid: bytes) -> AppletScript:
        applet = self.applets.get(bytes(aid))
        if applet is None or not applet.selectable:
            raise AppletNotFound(f"no selectable applet {bytes(aid).hex()}")
        return applet

    def _slot(self, channel_number: int) -> ChannelSlot:
        if not 0 <= channel_number <= 3 or not self.channels[channel_number].in_use:
            raise InvalidChannel(f"channel {channel_number} is not open")
        return self.channels[channel_number]

    def open_logical_channel(self, aid: bytes) -> tuple[int, bytes]:
        """Allocate the lowest free logical channel and select ``aid`` on it."""
        self._require_present()
        free = [n for n in LOGICAL_CHANNELS if not self.channels[n].in_use]
        if not free:
            raise NoFreeChannel("all logical channels are in use")
        applet = self._find_applet(aid)
        slot = self.channels[free[0]]
        slot.in_use = True
        slot.selected_aid = applet.aid
        slot.cached_select_response = applet.select_response
        return free[0], applet.select_response

    def close_logical_channel(self, channel_number: int) -> None:
        if channel_number == 0:
            raise InvalidChannel("the basic channel cannot be closed")
        self._slot(channel_number).clear()

    def process_apdu(self, channel_number: int, cmd: CommandApdu) -> ResponseApdu:
        self._require_present()
        slot = self._slot(channel_number)
        if cmd.cla & 0xFC == 0x00 and cmd.ins == INS_GET_RESPONSE and cmd.p1 == 0 and cmd.p2 == 0:
            if slot.cached_select_response is None:
                return ResponseApdu.status(SW_REFERENCED_DATA_NOT_FOUND)
            return ResponseApdu.from_bytes(slot.cached_select_response)
        if cmd.ins == INS_MANAGE_CHANNEL:
            return ResponseApdu.status(SW_FUNCTION_NOT_SUPPORTED)
        if cmd.ins == INS_SELECT and cmd.p1 == 0x04:
            try:
                applet = self._find_applet(cmd.data)
            except AppletNotFound:
                return ResponseApdu.status(SW_FILE_NOT_FOUND)
            slot.selected_aid = applet.aid
            slot.cached_select_response = applet.select_response
            return ResponseApdu.from_bytes(applet.select_response)
        if slot.selected_aid is None:
            return ResponseApdu.status(SW_FILE_NOT_FOUND)
        return ResponseApdu.from_bytes(self.applets[slot.selected_aid].respond(cmd))

    def sim_io(self, file_id: int, path: str, cmd: bytes) -> bytes:
        """Serve a READ BINARY against the file store. Raises MalformedApdu on junk."""
        self._require_present()
        command = parse_command(cmd)
        if command.ins != INS_READ_BINARY:
            return ResponseApdu.status(SW_INS_NOT_SUPPORTED).to_bytes()
        content = self.files.get((file_id, path.upper()))
        if content is None:
            return ResponseApdu.status(SW_FILE_NOT_FOUND).to_bytes()
        offset = (command.p1 << 8) | command.p2
        if offset > len(content):
            return ResponseApdu.status(SW_WRONG_P1P2).to_bytes()
        end = len(content) if not command.le else offset + command.le
        if end > len(content):
            return ResponseApdu.status(SW_WRONG_LE | ((len(content) - offset) & 0xFF)).to_bytes()
        return content[offset:end] + b"\x90\x00"

    def get_atr(self) -> bytes:
        return self.atr

    def reset(self) -> None:
        for slot in self.channels:
            slot.clear()
        self.channels[0].in_use = True

    def set_present(self, flag: bool) -> None:
        if not flag:
            self.reset()
        self.present = flag

    def snapshot(self) -> tuple:
        return (self.present, tuple((s.in_use, s.selected_aid, s.cached_select_response)
                                    for s in self.channels))

    def open_channels(self) -> set[int]:
        return {n for n in LOGICAL_CHANNELS if self.channels[n].in_use}

