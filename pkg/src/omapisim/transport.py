"""Transport API: SEService, Reader, Session and Channel over terminals."""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass
from typing import Optional

from . import access
from .access import Decision, RuleDatabase
from .apdu import parse_command, sw_success
from .terminal import NoSuchElement, TerminalContract, TerminalError

log = logging.getLogger(__name__)

SYSTEM_NAME = re.compile(r"^(SIM|eSE|SD) ?[1-9][0-9]*$")

INS_MANAGE_CHANNEL = 0x70
INS_SELECT = 0xA4


class TransportError(Exception):
    pass


class CardAbsent(TransportError):
    pass


class AccessDenied(TransportError):
    pass


class ChannelClosed(TransportError):
    pass


class SessionClosed(TransportError):
    pass


class ForbiddenApdu(TransportError):
    pass


class BasicChannelInUse(TransportError):
    pass


def is_system_name(name: str) -> bool:
    return SYSTEM_NAME.match(name) is not None


@dataclass(frozen=True)
class ClientIdentity:
    """A client app, identified by its certificate hash (None is anonymous)."""

    cert_hash: Optional[bytes] = None

    @classmethod
    def anonymous(cls) -> "ClientIdentity":
        return cls(None)


class Reader:
    def __init__(self, terminal: TerminalContract, system: bool, ara_aid: bytes = access.DEFAULT_ARA_AID,
                 closed_world: bool = False, access_control: bool = True):
        self.terminal = terminal
        self.system = system
        self.ara_aid = ara_aid
        self.closed_world = closed_world
        self.access_control = access_control
        self.lock = threading.RLock()
        self.sessions: list[Session] = []
        self.basic_channel: Optional[Channel] = None
        self.terminal_connected = False
        self._rules: Optional[RuleDatabase] = None

    @property
    def name(self) -> str:
        return self.terminal.get_name()

    def __repr__(self) -> str:
        kind = "system" if self.system else "add-on"
        return f"<Reader {self.name} ({kind})>"

    def is_secure_element_present(self) -> bool:
        return self.terminal.is_card_present()

    @property
    def rules(self) -> RuleDatabase:
        with self.lock:
            if self._rules is None:
                if self.access_control:
                    self._rules = access.load_rules(self.terminal, self.ara_aid)
                else:
                    self._rules = RuleDatabase.absent()
            return self._rules

    def reload_rules(self) -> RuleDatabase:
        with self.lock:
            self._rules = None
            return self.rules

    def open_session(self, client: Optional[ClientIdentity] = None) -> "Session":
        with self.lock:
            if not self.is_secure_element_present():
                raise CardAbsent(f"no secure element in {self.name}")
            self._connect()
            self.rules  # loaded once per reader, on first use
            session = Session(self, client or ClientIdentity.anonymous())
            self.sessions.append(session)
            return session

    def _connect(self) -> None:
        if not self.terminal_connected:
            self.terminal.internal_connect()
            self.terminal_connected = True

    def close_sessions(self) -> None:
        with self.lock:
            for session in list(self.sessions):
                session.close()

    def open_channel_count(self) -> int:
        return sum(len(s.channels) for s in self.sessions)

    def _channel_closed(self) -> None:
        if self.open_channel_count() == 0 and self.terminal_connected:
            self.terminal.internal_disconnect()
            self.terminal_connected = False


class Session:
    def __init__(self, reader: Reader, client: ClientIdentity):
        self.reader = reader
        self.client = client
        self.channels: list[Channel] = []
        self.closed = False

    def _check_open(self) -> None:
        if self.closed:
            raise SessionClosed("session is closed")

    def _authorize(self, aid: Optional[bytes]) -> None:
        reader = self.reader
        decision = access.decide_channel_open(reader.rules, self.client.cert_hash, aid or b"",
                                              reader.closed_world)
        if decision is Decision.DENY:
            raise AccessDenied(f"client may not access applet {(aid or b'').hex() or '(default)'}")

    def get_atr(self) -> Optional[bytes]:
        return self.reader.terminal.get_atr()

    def open_logical_channel(self, aid: Optional[bytes]) -> "Channel":
        with self.reader.lock:
            self._check_open()
            if aid is not None:
                aid = bytes(aid)
                if not 5 <= len(aid) <= 16:
                    raise ValueError(f"AID must be 5..16 bytes, got {len(aid)}")
            self._authorize(aid)
            self.reader._connect()
            response = self.reader.terminal.open_logical_channel(aid)
            channel = Channel(self, response.channel_number, aid, response.select_response)
            self.channels.append(channel)
            return channel

    def open_basic_channel(self, aid: Optional[bytes] = None) -> "Channel":
        """Basic-channel access; one holder per reader at a time. Experimental."""
        with self.reader.lock:
            self._check_open()
            if self.reader.basic_channel is not None:
                raise BasicChannelInUse("the basic channel is held by another channel")
            self._authorize(aid)
            self.reader._connect()
            select_response = None
            if aid is not None:
                aid = bytes(aid)
                select = bytes([0x00, INS_SELECT, 0x04, 0x00, len(aid)]) + aid + b"\x00"
                select_response = self.reader.terminal.internal_transmit(select)
                if not sw_success(select_response[-2]):
                    raise NoSuchElement(f"SELECT {aid.hex()} failed with {select_response[-2:].hex()}")
            channel = Channel(self, 0, aid, select_response)
            self.reader.basic_channel = channel
            self.channels.append(channel)
            return channel

    def close_channels(self) -> None:
        for channel in list(self.channels):
            try:
                channel.close()
            except TerminalError as exc:
                log.debug("closing channel %d: %s", channel.channel_number, exc)

    def close(self) -> None:
        with self.reader.lock:
            if self.closed:
                return
            self.close_channels()
            self.closed = True
            self.reader.sessions.remove(self)
            if not self.reader.sessions:
                self.reader._channel_closed()

    def is_closed(self) -> bool:
        return self.closed


class Channel:
    def __init__(self, session: Session, channel_number: int, aid: Optional[bytes],
                 select_response: Optional[bytes]):
        self.session = session
        self.channel_number = channel_number
        self.aid = aid
        self.select_response = select_response
        self.closed = False

    @property
    def is_basic(self) -> bool:
        return self.channel_number == 0

    @property
    def client(self) -> ClientIdentity:
        return self.session.client

    def get_select_response(self) -> Optional[bytes]:
        return self.select_response

    def transmit(self, apdu: bytes) -> bytes:
        reader = self.session.reader
        with reader.lock:
            if self.closed:
                raise ChannelClosed("channel is closed")
            cmd = parse_command(apdu)
            if cmd.ins == INS_MANAGE_CHANNEL:
                raise ForbiddenApdu("MANAGE CHANNEL is reserved to the transport layer")
            if cmd.ins == INS_SELECT and cmd.p1 == 0x04:
                raise ForbiddenApdu("SELECT by AID is reserved to the transport layer")
            cmd = cmd.with_channel(self.channel_number)
            decision = access.decide_apdu(reader.rules, self.client.cert_hash, self.aid or b"",
                                          cmd.header, reader.closed_world)
            if decision is Decision.DENY:
                raise AccessDenied(f"APDU {cmd.header.hex()} denied by access rules")
            return reader.terminal.internal_transmit(cmd.to_bytes())

    def close(self) -> None:
        """Close the channel. Local state is released even when the card refuses.

        A refusal is re-raised as the terminal's error; closing again is a no-op.
        """
        reader = self.session.reader
        with reader.lock:
            if self.closed:
                return
            self.closed = True
            self.session.channels.remove(self)
            try:
                if self.is_basic:
                    reader.basic_channel = None
                elif reader.terminal.is_card_present():
                    # after a removal the terminal has already dropped the slot
                    reader.terminal.internal_close_logical_channel(self.channel_number)
            finally:
                reader._channel_closed()

    def is_closed(self) -> bool:
        return self.closed


class SeService:
    def __init__(self):
        self._readers: list[Reader] = []
        self._lock = threading.Lock()

    def add_terminal(self, terminal: TerminalContract, system: Optional[bool] = None, **reader_options) -> Reader:
        """Register a terminal.

        A terminal is a system terminal only if its name has the system form
        ("SIM1", "eSE 2", ...). ``system=False`` demotes such a terminal to
        add-on; ``system=True`` on a non-system name is refused.
        """
        name_ok = is_system_name(terminal.get_name())
        if system and not name_ok:
            raise ValueError(f"{terminal.get_name()!r} is not a valid system terminal name")
        reader = Reader(terminal, name_ok if system is None else bool(system), **reader_options)
        with self._lock:
            if any(r.name == reader.name for r in self._readers):
                raise ValueError(f"terminal {reader.name!r} already registered")
            self._readers.append(reader)
        return reader

    def readers(self) -> list[Reader]:
        with self._lock:
            return [r for r in self._readers if r.system] + [r for r in self._readers if not r.system]

    def get_reader(self, name: str) -> Reader:
        for reader in self.readers():
            if reader.name == name:
                return reader
        raise KeyError(name)

    def shutdown(self) -> None:
        for reader in self.readers():
            reader.close_sessions()
