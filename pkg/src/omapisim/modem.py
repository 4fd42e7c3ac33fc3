"""Virtual baseband: executes OEM-hook frames and SIM-IO requests against a card."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Optional

from . import oemhook
from .apdu import ApduError, CommandApdu
from .card import AppletNotFound, CardAbsent, InvalidChannel, NoFreeChannel, VirtualCard
from .oemhook import CloseChannel, Exchange, GetAtr, OemHookError, OpenChannel, RilError

log = logging.getLogger(__name__)

READY = "READY"
ABSENT = "ABSENT"
NOT_READY = "NOT_READY"
SIM_STATES = (READY, ABSENT, NOT_READY)


@dataclass(frozen=True)
class ModemResponse:
    payload: Optional[bytes] = None
    error: Optional[RilError] = None

    def __post_init__(self):
        if (self.payload is None) == (self.error is None):
            raise ValueError("a modem response carries exactly one of payload or error")

    @property
    def ok(self) -> bool:
        return self.error is None


TraceHook = Callable[[bytes, ModemResponse], None]
StateListener = Callable[[str], None]

_CARD_ERRORS = {
    NoFreeChannel: RilError.MISSING_RESOURCE,
    AppletNotFound: RilError.NO_SUCH_ELEMENT,
    InvalidChannel: RilError.INVALID_PARAMETER,
    CardAbsent: RilError.GENERIC_FAILURE,
}


def exchange_to_command(req: Exchange) -> CommandApdu:
    """Rebuild the APDU a frame carries. P3 is Le without data, Lc with it."""
    if req.p3 is None:
        return CommandApdu(req.cla, req.ins, req.p1, req.p2)
    if not req.data:
        return CommandApdu(req.cla, req.ins, req.p1, req.p2, le=req.p3)
    if req.p3 == 0:
        raise ApduError("Lc of zero with command data")
    if len(req.data) == req.p3:
        return CommandApdu(req.cla, req.ins, req.p1, req.p2, req.data)
    if len(req.data) == req.p3 + 1:
        return CommandApdu(req.cla, req.ins, req.p1, req.p2, req.data[:-1], req.data[-1])
    raise ApduError(f"P3={req.p3} does not match {len(req.data)} data bytes")


class Modem:
    """Owns the card and handles one request at a time.

    ``return_select_response=False`` emulates basebands whose open-channel
    reply carries an empty SELECT response, forcing callers onto the
    GET RESPONSE path.
    """

    def __init__(self, card: VirtualCard, return_select_response: bool = True):
        self.card = card
        self.return_select_response = return_select_response
        self._lock = threading.RLock()
        self._trace_hooks: list[TraceHook] = []
        self._state_listeners: list[StateListener] = []
        self._not_ready = False

    def add_trace_hook(self, hook: TraceHook) -> None:
        self._trace_hooks.append(hook)

    def remove_trace_hook(self, hook: TraceHook) -> None:
        self._trace_hooks.remove(hook)

    def add_state_listener(self, listener: StateListener) -> None:
        self._state_listeners.append(listener)

    def submit(self, frame: bytes) -> ModemResponse:
        frame = bytes(frame)
        with self._lock:
            response = self._handle(frame)
            for hook in self._trace_hooks:
                hook(frame, response)
        return response

    def _handle(self, frame: bytes) -> ModemResponse:
        try:
            req = oemhook.decode_request(frame)
        except OemHookError as exc:
            log.debug("rejecting frame %s: %s", frame.hex(), exc)
            return ModemResponse(error=RilError.INVALID_PARAMETER)
        try:
            return ModemResponse(payload=self._execute(req))
        except ApduError:
            return ModemResponse(error=RilError.INVALID_PARAMETER)
        except tuple(_CARD_ERRORS) as exc:
            return ModemResponse(error=_CARD_ERRORS[type(exc)])

    def _execute(self, req) -> bytes:
        card = self.card
        if isinstance(req, GetAtr):
            if not card.present:
                raise CardAbsent("no card in the slot")
            return oemhook.encode_atr_response(card.get_atr())
        if isinstance(req, OpenChannel):
            channel, select_response = card.open_logical_channel(req.aid)
            if not self.return_select_response:
                select_response = None
            return oemhook.encode_open_response(channel, select_response)
        if isinstance(req, CloseChannel):
            if req.channel_id > 3:
                raise InvalidChannel(f"unknown channel id {req.channel_id}")
            card.close_logical_channel(req.channel_id)
            return b""
        if req.channel_id > 3:
            raise InvalidChannel(f"unknown channel id {req.channel_id}")
        cmd = exchange_to_command(req)
        return card.process_apdu(req.channel_id, cmd).to_bytes()

    def submit_sim_io(self, file_id: int, path: str, cmd: bytes) -> ModemResponse:
        with self._lock:
            try:
                return ModemResponse(payload=self.card.sim_io(file_id, path, bytes(cmd)))
            except ApduError:
                return ModemResponse(error=RilError.INVALID_PARAMETER)
            except CardAbsent:
                return ModemResponse(error=RilError.GENERIC_FAILURE)

    def sim_state(self) -> str:
        with self._lock:
            if self.card.present:
                return READY
            return NOT_READY if self._not_ready else ABSENT

    def set_sim_state(self, state: str) -> None:
        """Drive presence from the outside; NOT_READY also takes the card offline."""
        if state not in SIM_STATES:
            raise ValueError(f"unknown SIM state {state!r}")
        with self._lock:
            before = self.sim_state()
            self._not_ready = state == NOT_READY
            self.card.set_present(state == READY)
            after = self.sim_state()
        if after != before:
            for listener in self._state_listeners:
                listener(after)
