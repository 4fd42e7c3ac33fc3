"""Canned end-to-end scenarios shared by the experiment scripts and the tests."""

from __future__ import annotations

from typing import Optional

from .modem import ModemResponse
from .oemhook import trace_error, trace_request, trace_response
from .profile import CardProfile
from .stack import build_stack

LOOPBACK_AID = bytes.fromhex("0102030405")

# One APDU per ISO case, sent on the first logical channel.
LOOPBACK_APDUS = (
    bytes.fromhex("00440000"),
    bytes.fromhex("00b0000010"),
    bytes.fromhex("00d6000002cafe"),
    bytes.fromhex("0088000008010203040506070800"),
)


def trace_lines(pairs: list[tuple[bytes, ModemResponse]]) -> list[str]:
    lines = []
    for frame, response in pairs:
        lines.append(trace_request(frame))
        lines.append(trace_response(response.payload) if response.ok else trace_error(response.error))
    return lines


def run_loopback(profile: CardProfile, legacy_mode: bool = False) -> tuple[list[tuple[bytes, ModemResponse]], list[bytes]]:
    """Open a session and channel, send the four APDUs, close.

    Returns the recorded (frame, response) pairs and the APDU responses.
    """
    pairs: list[tuple[bytes, ModemResponse]] = []
    responses: list[bytes] = []
    with build_stack(profile, legacy_mode=legacy_mode) as stack:
        stack.modem.add_trace_hook(lambda frame, response: pairs.append((frame, response)))
        session = stack.reader.open_session()
        channel = session.open_logical_channel(LOOPBACK_AID)
        for apdu in LOOPBACK_APDUS:
            responses.append(channel.transmit(apdu))
        channel.close()
        session.close()
    return pairs, responses


def select_response(profile: CardProfile, aid: bytes, legacy_mode: bool) -> Optional[bytes]:
    with build_stack(profile, legacy_mode=legacy_mode) as stack:
        channel = stack.reader.open_session().open_logical_channel(aid)
        return channel.get_select_response()
