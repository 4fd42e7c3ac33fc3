"""Telephony service facade over the modem.

Requests run on a single worker thread, the way a handset's telephony
service funnels them through one message queue. Callers block until the
worker finishes; calling back in from the worker raises instead of hanging.
Frames are assembled by hand here, byte arithmetic included, so traces
match what a stock handset puts on the wire; :mod:`omapisim.oemhook` is
the independent reference the tests compare against.
"""

from __future__ import annotations

import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, TypeVar

from . import oemhook
from .apdu import HexError, IccException, bytes_to_hex, classify_sw_failure, hex_to_bytes, sw_success
from .modem import Modem
from .oemhook import OemHookError, RilError

T = TypeVar("T")

SUCCESS = 0
GENERIC_ERROR = 1
MISSING_RESOURCE = 2
NO_SUCH_ELEMENT = 3
INVALID_PARAMETER = 5

LAST_ERRORS = (SUCCESS, GENERIC_ERROR, MISSING_RESOURCE, NO_SUCH_ELEMENT, INVALID_PARAMETER)


@dataclass(frozen=True)
class IccIoResult:
    sw1: int
    sw2: int
    payload: Optional[bytes] = None

    def success(self) -> bool:
        return sw_success(self.sw1)

    def get_exception(self) -> Optional[IccException]:
        return classify_sw_failure(self.sw1, self.sw2)

    def to_hex(self) -> str:
        sw = f"{(self.sw1 << 8) + self.sw2 + 0x10000:x}"[1:]
        if self.payload is None:
            return sw
        return bytes_to_hex(self.payload) + sw


def open_error(error: RilError) -> int:
    return {RilError.MISSING_RESOURCE: MISSING_RESOURCE,
            RilError.NO_SUCH_ELEMENT: NO_SUCH_ELEMENT}.get(error, GENERIC_ERROR)


def close_or_transmit_error(error: RilError) -> int:
    return INVALID_PARAMETER if error is RilError.INVALID_PARAMETER else GENERIC_ERROR


def build_exchange_frame(cla: int, ins: int, channel_id: int, p1: int, p2: int,
                         p3: int, data: Optional[bytes]) -> bytes:
    length = 9
    if data is not None:
        length += len(data)
    if p3 == -1:
        length -= 1
    if channel_id == 0:
        out = bytes([0x15, 0x08]) + struct.pack(">H", length)
    else:
        code = 0x0B if p3 != -1 else 0x0C
        out = bytes([0x15, code]) + struct.pack(">H", length + 4)
    out += bytes([cla, ins, p1, p2])
    if p3 != -1:
        out += bytes([p3])
    if channel_id != 0:
        out += struct.pack(">I", channel_id)
    if data is not None:
        out += data
    return out


def build_open_frame(aid: Optional[bytes]) -> bytes:
    aid = aid or b""
    return bytes([0x15, 0x09]) + struct.pack(">H", 4 + len(aid)) + aid


def build_close_frame(channel_id: int) -> bytes:
    # A zero id is left out entirely, which yields a short 4-byte frame.
    if channel_id == 0:
        return bytes([0x15, 0x0A, 0x00, 0x04])
    return bytes([0x15, 0x0A, 0x00, 0x08]) + struct.pack(">I", channel_id)


def build_atr_frame() -> bytes:
    return bytes([0x15, 0x0D, 0x00, 0x04])


class PhoneService:
    def __init__(self, modem: Modem):
        self.modem = modem
        self.last_error = SUCCESS
        self.cached_select_response: Optional[bytes] = None
        self._worker = ThreadPoolExecutor(max_workers=1, thread_name_prefix="phone-main")
        self._worker_thread: Optional[threading.Thread] = None
        self._worker.submit(self._mark_worker).result()

    def _mark_worker(self) -> None:
        self._worker_thread = threading.current_thread()

    def close(self) -> None:
        self._worker.shutdown(wait=True)

    def __enter__(self) -> "PhoneService":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _send_request(self, fn: Callable[[], T]) -> T:
        if threading.current_thread() is self._worker_thread:
            raise RuntimeError("request issued from the telephony worker thread would deadlock")
        return self._worker.submit(fn).result()

    # open

    def open_icc_logical_channel(self, aid_hex: str) -> int:
        return self._send_request(lambda: self._open(aid_hex))

    def _open(self, aid_hex: str) -> int:
        self.cached_select_response = None
        try:
            aid = hex_to_bytes(aid_hex)
        except HexError:
            self.last_error = GENERIC_ERROR
            return 0
        response = self.modem.submit(build_open_frame(aid))
        if not response.ok:
            self.last_error = open_error(response.error)
            return 0
        try:
            decoded = oemhook.decode_open_response(response.payload)
        except OemHookError:
            self.last_error = GENERIC_ERROR
            return 0
        self.cached_select_response = decoded.select_response
        self.last_error = SUCCESS
        return decoded.channel_id

    # close

    def close_icc_logical_channel(self, channel_id: int) -> bool:
        return self._send_request(lambda: self._close(channel_id))

    def _close(self, channel_id: int) -> bool:
        if not 0 <= channel_id <= 0xFFFFFFFF:
            self.last_error = INVALID_PARAMETER
            return False
        response = self.modem.submit(build_close_frame(channel_id))
        if not response.ok:
            self.last_error = close_or_transmit_error(response.error)
            return False
        self.last_error = SUCCESS
        return True

    # transmit

    def transmit_icc_logical_channel(self, cla: int, ins: int, channel_id: int, p1: int, p2: int,
                                     length: int, data_hex: Optional[str]) -> str:
        return self.exchange_icc_apdu(cla, ins, channel_id, p1, p2, length, data_hex).to_hex()

    def exchange_icc_apdu(self, cla: int, ins: int, channel_id: int, p1: int, p2: int,
                          length: int, data_hex: Optional[str]) -> IccIoResult:
        return self._send_request(lambda: self._exchange(cla, ins, channel_id, p1, p2, length, data_hex))

    def _exchange(self, cla, ins, channel_id, p1, p2, length, data_hex) -> IccIoResult:
        failure = IccIoResult(0x6F, 0x00, None)
        try:
            data = hex_to_bytes(data_hex)
            frame = build_exchange_frame(cla, ins, channel_id, p1, p2, length, data)
        except (HexError, ValueError, struct.error):
            # Out-of-range bytes or bad hex never reach the modem.
            self.last_error = INVALID_PARAMETER
            return failure
        response = self.modem.submit(frame)
        if not response.ok or len(response.payload) < 2:
            self.last_error = GENERIC_ERROR if response.ok else close_or_transmit_error(response.error)
            return failure
        raw = response.payload
        self.last_error = SUCCESS
        return IccIoResult(raw[-2], raw[-1], raw[:-2] if len(raw) > 2 else None)

    # ATR and accessors

    def get_atr(self) -> Optional[bytes]:
        return self._send_request(self._get_atr)

    def _get_atr(self) -> Optional[bytes]:
        response = self.modem.submit(build_atr_frame())
        if not response.ok:
            return None
        try:
            return oemhook.decode_atr_response(response.payload)
        except OemHookError:
            return None

    def get_select_response(self) -> Optional[bytes]:
        return self.cached_select_response

    def get_last_error(self) -> int:
        return self.last_error
