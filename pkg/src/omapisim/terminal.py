"""UICC terminal: maps ISO logical channel numbers onto telephony channel ids."""

from __future__ import annotations

import logging
import queue
from dataclasses import dataclass
from typing import Optional, Protocol

from . import phone as ps
from .apdu import ApduError, bytes_to_hex, hex_to_bytes, parse_command, set_cla_channel, to_telephony_args
from .modem import READY
from .oemhook import RilError
from .phone import PhoneService

log = logging.getLogger(__name__)

GET_RESPONSE = bytes.fromhex("00c0000000")


class TerminalError(Exception):
    pass


class NoSuchElement(TerminalError):
    pass


class MissingResource(TerminalError):
    pass


class InvalidParameter(TerminalError):
    pass


class IoError(TerminalError):
    pass


class UnsupportedOperation(TerminalError):
    pass


_LAST_ERROR_TYPES = {
    ps.GENERIC_ERROR: IoError,
    ps.MISSING_RESOURCE: MissingResource,
    ps.NO_SUCH_ELEMENT: NoSuchElement,
    ps.INVALID_PARAMETER: InvalidParameter,
}


def error_for_last_error(code: int) -> type[TerminalError]:
    """Exception type for a non-zero telephony last-error code."""
    return _LAST_ERROR_TYPES.get(code, IoError)


@dataclass(frozen=True)
class OpenLogicalChannelResponse:
    channel_number: int
    select_response: Optional[bytes]


@dataclass(frozen=True)
class StateChangedEvent:
    terminal: str
    present: bool


class TerminalContract(Protocol):
    """What the transport layer needs from a secure element provider."""

    def get_name(self) -> str: ...
    def is_card_present(self) -> bool: ...
    def internal_connect(self) -> None: ...
    def internal_disconnect(self) -> None: ...
    def get_atr(self) -> Optional[bytes]: ...
    def internal_open_logical_channel(self, aid: Optional[bytes] = None) -> int: ...
    def open_logical_channel(self, aid: Optional[bytes], p2: int = 0x00) -> OpenLogicalChannelResponse: ...
    def get_select_response(self) -> Optional[bytes]: ...
    def internal_transmit(self, command: bytes) -> bytes: ...
    def internal_close_logical_channel(self, channel_number: int) -> None: ...
    def sim_io_exchange(self, file_id: int, path: str, cmd: bytes) -> bytes: ...
    def get_se_state_changed_action(self) -> str: ...


class UiccTerminal:
    """Terminal over the telephony service.

    With ``legacy_mode`` the SELECT response is recovered with GET RESPONSE
    whenever the telephony service has none cached after an open.
    """

    def __init__(self, phone: PhoneService, name: str = "SIM1", legacy_mode: bool = False):
        self.phone = phone
        self.name = name
        self.legacy_mode = legacy_mode
        self.channel_ids = [0, 0, 0, 0]
        self.select_responses: dict[int, Optional[bytes]] = {}
        self.connected = False
        self._last_select_response: Optional[bytes] = None
        self._subscribers: list[queue.Queue] = []
        self._was_present = self.is_card_present()
        phone.modem.add_state_listener(self._on_sim_state)

    def get_name(self) -> str:
        return self.name

    def is_card_present(self) -> bool:
        return self.phone.modem.sim_state() == READY

    def internal_connect(self) -> None:
        self.connected = True

    def internal_disconnect(self) -> None:
        self.connected = False

    def get_atr(self) -> Optional[bytes]:
        return self.phone.get_atr()

    def _raise_last_error(self, what: str) -> None:
        code = self.phone.get_last_error()
        raise error_for_last_error(code)(f"{what} failed (last error {code})")

    def internal_open_logical_channel(self, aid: Optional[bytes] = None) -> int:
        if aid is None:
            raise UnsupportedOperation("opening a channel without an AID is not supported")
        channel_id = self.phone.open_icc_logical_channel(bytes_to_hex(aid))
        if channel_id == 0:
            self._raise_last_error("open logical channel")
        free = [n for n in (1, 2, 3) if self.channel_ids[n] == 0]
        if not free:
            self.phone.close_icc_logical_channel(channel_id)
            raise MissingResource("no free logical channel slot in the terminal")
        number = free[0]
        self.channel_ids[number] = channel_id
        select_response = self.phone.get_select_response()
        if select_response is None and self.legacy_mode:
            try:
                select_response = self.internal_transmit(
                    bytes([set_cla_channel(GET_RESPONSE[0], number)]) + GET_RESPONSE[1:])
            except TerminalError as exc:
                log.warning("GET RESPONSE after open failed: %s", exc)
        self.select_responses[number] = select_response
        self._last_select_response = select_response
        return number

    def open_logical_channel(self, aid: Optional[bytes], p2: int = 0x00) -> OpenLogicalChannelResponse:
        if p2 != 0x00:
            raise UnsupportedOperation(f"SELECT P2 0x{p2:02x} is not supported")
        number = self.internal_open_logical_channel(aid)
        return OpenLogicalChannelResponse(number, self.select_responses[number])

    def get_select_response(self) -> Optional[bytes]:
        return self._last_select_response

    def internal_transmit(self, command: bytes) -> bytes:
        try:
            cmd = parse_command(command)
        except ApduError as exc:
            raise InvalidParameter(str(exc)) from exc
        index = cmd.channel
        if index != 0 and self.channel_ids[index] == 0:
            raise InvalidParameter(f"logical channel {index} is not open")
        args = to_telephony_args(cmd)
        response = self.phone.transmit_icc_logical_channel(
            args.cla_masked, args.ins, self.channel_ids[args.channel_index],
            args.p1, args.p2, args.len, args.data_hex)
        if self.phone.get_last_error() != ps.SUCCESS:
            self._raise_last_error("transmit")
        return hex_to_bytes(response)

    def internal_close_logical_channel(self, channel_number: int) -> None:
        if channel_number not in (1, 2, 3) or self.channel_ids[channel_number] == 0:
            raise InvalidParameter(f"logical channel {channel_number} is not open")
        channel_id = self.channel_ids[channel_number]
        # The slot is released even if the card refuses the close.
        self.channel_ids[channel_number] = 0
        self.select_responses.pop(channel_number, None)
        if not self.phone.close_icc_logical_channel(channel_id):
            self._raise_last_error(f"close of channel id {channel_id}")

    def sim_io_exchange(self, file_id: int, path: str, cmd: bytes) -> bytes:
        response = self.phone.modem.submit_sim_io(file_id, path, cmd)
        if response.error is RilError.INVALID_PARAMETER:
            raise InvalidParameter("SIM IO command rejected")
        if response.error is not None:
            raise IoError(f"SIM IO failed: {response.error.name}")
        return response.payload

    # state changes

    def get_se_state_changed_action(self) -> str:
        return f"omapisim.action.{self.name}.SE_STATE_CHANGED"

    def state_changed_events(self) -> "queue.Queue[StateChangedEvent]":
        """Subscribe to presence transitions; each call returns a fresh queue."""
        q: queue.Queue = queue.Queue()
        self._subscribers.append(q)
        return q

    def _on_sim_state(self, state: str) -> None:
        present = state == READY
        if present == self._was_present:
            return
        self._was_present = present
        if not present:
            self.channel_ids = [0, 0, 0, 0]
            self.select_responses.clear()
        event = StateChangedEvent(self.name, present)
        for q in self._subscribers:
            q.put(event)
